#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

// Shared numerical-linear-algebra helpers: SVD-based rank decisions,
// orthonormal bases, null spaces, and eigenvalue clustering. All rank
// decisions are relative: a singular value counts as zero when it falls
// below tol * sigma_max.

namespace diffstab {

using Complex = std::complex<double>;

inline constexpr double kDefaultTol = 1e-8;    // rank / GCD decisions
inline constexpr double kClusterTol = 1e-6;    // eigenvalue cluster merge radius
inline constexpr double kAxisMargin = 1e-7;    // Re >= -kAxisMargin counts as closed RHP
inline constexpr double kHurwitzMargin = 1e-9; // Re < -kHurwitzMargin counts as stable

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
int numerical_rank(const DenseMatrix<Scalar>& m, double tol = kDefaultTol) {
    if (m.rows() == 0 || m.cols() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<DenseMatrix<Scalar>> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) {
        return 0;
    }
    const double cutoff = tol * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            ++rank;
        }
    }
    return rank;
}

// Orthonormal basis of the column space.
template <typename Scalar>
DenseMatrix<Scalar> orth(const DenseMatrix<Scalar>& m, double tol = kDefaultTol) {
    if (m.rows() == 0 || m.cols() == 0) {
        return DenseMatrix<Scalar>(m.rows(), 0);
    }
    Eigen::JacobiSVD<DenseMatrix<Scalar>> svd(m, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) {
        return DenseMatrix<Scalar>(m.rows(), 0);
    }
    const double cutoff = tol * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            ++rank;
        }
    }
    return svd.matrixU().leftCols(rank);
}

// Orthonormal basis of the right null space {x : m x = 0}. The rank cutoff
// is tol * max(sigma_max, scale_floor): pass the natural scale of the
// problem as scale_floor so that an entirely tiny matrix reads as rank zero
// instead of as a well-conditioned small one.
template <typename Scalar>
DenseMatrix<Scalar> null_space(const DenseMatrix<Scalar>& m, double tol = kDefaultTol,
                               double scale_floor = 0.0) {
    if (m.cols() == 0) {
        return DenseMatrix<Scalar>(0, 0);
    }
    if (m.rows() == 0) {
        return DenseMatrix<Scalar>::Identity(m.cols(), m.cols());
    }
    Eigen::JacobiSVD<DenseMatrix<Scalar>> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double anchor = std::max(smax, scale_floor);
    const double cutoff = tol * (anchor > 0.0 ? anchor : 1.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            ++rank;
        }
    }
    return svd.matrixV().rightCols(m.cols() - rank);
}

// Orthonormal basis of the left null space {x : x^H m = 0}.
template <typename Scalar>
DenseMatrix<Scalar> left_null_space(const DenseMatrix<Scalar>& m, double tol = kDefaultTol,
                                    double scale_floor = 0.0) {
    DenseMatrix<Scalar> mh = m.adjoint();
    return null_space<Scalar>(mh, tol, scale_floor);
}

// Greedy clustering of complex points: two points land in the same cluster
// when they are within tol of an existing member. Returns (centroid, count)
// pairs sorted by (Re, Im) for determinism.
std::vector<std::pair<Complex, int>> cluster_points(std::vector<Complex> pts, double tol = kClusterTol);

// All eigenvalues of a real square matrix.
std::vector<Complex> eigenvalues(const Eigen::MatrixXd& a);

// Spectral abscissa: max Re of the eigenvalues (-inf for 0x0).
double spectral_abscissa(const Eigen::MatrixXd& a);

} // namespace diffstab
