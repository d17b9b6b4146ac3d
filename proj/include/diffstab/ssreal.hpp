#pragma once

#include "diffstab/linalg.hpp"
#include "diffstab/ratpoly.hpp"

#include <Eigen/Dense>

#include <vector>

// State-space realizations, Kalman reduction, poles and invariant zeros with
// their direction subspaces, and PBH tests.

namespace diffstab {

/// Realization G(s) = D + C (sI - A)^{-1} B with a rank tolerance used by
/// every reduction and kernel decision made on it.
struct StateSpace {
    Eigen::MatrixXd A, B, C, D;
    double tol = kDefaultTol;

    StateSpace();
    StateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d,
               double tol_ = kDefaultTol);
    /// Static system y = D u.
    static StateSpace gain(const Eigen::MatrixXd& d, double tol_ = kDefaultTol);

    int states() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(B.cols()); }
    int outputs() const { return static_cast<int>(C.rows()); }

    Eigen::MatrixXcd eval(const Complex& s) const;
    /// Spectral abscissa strictly below -margin.
    bool is_hurwitz(double margin = kHurwitzMargin) const;
};

/// Series interconnection: the signal passes through `inner` first, then
/// `outer`; the transfer function is outer(s) * inner(s).
StateSpace series(const StateSpace& inner, const StateSpace& outer);
StateSpace parallel_sum(const StateSpace& a, const StateSpace& b);
StateSpace block_diagonal(const std::vector<StateSpace>& blocks);
/// Transposed system (A^T, C^T, B^T, D^T); shares the pole set.
StateSpace transpose_system(const StateSpace& s);
/// Constant input/output mixing: w * G(s) * v.
StateSpace premultiply(const Eigen::MatrixXd& w, const StateSpace& s);
StateSpace postmultiply(const StateSpace& s, const Eigen::MatrixXd& v);

/// Subspace of C^n as an orthonormal column basis; zero columns encode the
/// trivial subspace.
struct Subspace {
    Eigen::MatrixXcd basis;
    int ambient_dim = 0;
    double tol = kDefaultTol;

    static Subspace trivial(int ambient, double tol = kDefaultTol);
    /// Orthonormalize the given spanning columns.
    static Subspace span(const Eigen::MatrixXcd& columns, double tol = kDefaultTol);

    int dim() const { return static_cast<int>(basis.cols()); }
    bool is_trivial() const { return basis.cols() == 0; }
    /// Orthogonal projector onto the subspace.
    Eigen::MatrixXcd projector() const;
    /// || (I - P) v || / || v ||; zero when v lies in the subspace.
    double residual(const Eigen::VectorXcd& v) const;
    /// max over basis vectors of `inner` of the residual against this space.
    double containment_residual(const Subspace& inner) const;
};

/// Intersection computed from the null space of stacked orthogonal-complement
/// projectors. Throws on ambient-dimension mismatch or empty input.
Subspace subspace_intersect(const std::vector<Subspace>& spaces, double tol = kDefaultTol);

struct PoleRecord {
    Complex lambda;
    int multiplicity = 0;
    Subspace in_dirs;  // B^H ker(lambda I - A)^H
    Subspace out_dirs; // C ker(lambda I - A)
};

struct ZeroRecord {
    Complex lambda;
    Subspace in_dirs;
    Subspace out_dirs;
};

/// Minimal realization of a proper rational matrix: each scalar entry is
/// realized in controllable canonical form, the entries are direct-summed,
/// and the result is Kalman-reduced. Throws std::domain_error on improper
/// entries.
StateSpace realize(const RationalMatrix& g, double tol = kDefaultTol);

/// Kalman reduction: controllable staircase followed by observable staircase
/// at the realization tolerance. Transfer function is preserved.
StateSpace minimalize(const StateSpace& s);

/// Rational transfer matrix of a realization, entry by entry through minimal
/// SISO subsystems (denominators from eigenvalues, numerators from
/// interpolated determinants of the bordered pencil).
RationalMatrix transfer_function(const StateSpace& s);

/// McMillan degree = state count of a minimal realization.
int mcmillan_degree(const RationalMatrix& g, double tol = kDefaultTol);

/// Distinct poles of the minimal realization of s (minimalizes internally),
/// clustered at cluster_tol, each with its direction subspaces.
std::vector<PoleRecord> poles(const StateSpace& s, double cluster_tol = kClusterTol);

/// Direction subspaces of lambda as a pole of the (minimal) realization;
/// trivial when lambda is not an eigenvalue.
std::pair<Subspace, Subspace> pole_directions(const StateSpace& minimal, const Complex& lambda);

/// Finite invariant zeros with directions from the Rosenbrock pencil. For
/// non-square systems candidates come from a randomly squared-up pencil and
/// are kept only where the original pencil genuinely drops rank.
std::vector<ZeroRecord> invariant_zeros(const StateSpace& s);

/// Zero directions at an arbitrary point: right resp. left kernel of the
/// Rosenbrock matrix projected onto the input resp. output coordinates.
/// For normal-rank-deficient systems this returns the normal null spaces.
std::pair<Subspace, Subspace> zero_directions(const StateSpace& s, const Complex& lambda);

/// PBH controllability test at lambda: true when rank [A - lambda I, B] < n,
/// together with the left null vectors witnessing the failure.
std::pair<bool, Subspace> pbh_uncontrollable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                             const Complex& lambda, double tol = kDefaultTol);

/// PBH observability test at lambda: true when rank [A - lambda I; C] < n,
/// together with the right null vectors.
std::pair<bool, Subspace> pbh_unobservable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                                           const Complex& lambda, double tol = kDefaultTol);

/// Eigenvalues of A with Re >= -kAxisMargin, clustered at cluster_tol.
std::vector<std::pair<Complex, int>> unstable_modes(const StateSpace& s,
                                                    double cluster_tol = kClusterTol);

} // namespace diffstab
