#include "diffstab/ssreal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace diffstab {

namespace {

void check_dims(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                const Eigen::MatrixXd& d) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("StateSpace: A must be square");
    }
    if (b.rows() != a.rows() || c.cols() != a.cols() || d.rows() != c.rows() ||
        d.cols() != b.cols()) {
        throw std::invalid_argument("StateSpace: inconsistent dimensions");
    }
}

// Orthonormal basis of the smallest A-invariant subspace containing im(B).
Eigen::MatrixXd invariant_image(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd v = orth<double>(b, tol);
    for (Eigen::Index it = 0; it < n && v.cols() < n; ++it) {
        Eigen::MatrixXd cat(n, v.cols() * 2);
        cat << v, a * v;
        Eigen::MatrixXd w = orth<double>(cat, tol);
        if (w.cols() == v.cols()) {
            return w;
        }
        v = std::move(w);
    }
    return v;
}

Eigen::MatrixXcd rosenbrock(const StateSpace& s, const Complex& lambda) {
    const int n = s.states(), m = s.inputs(), p = s.outputs();
    Eigen::MatrixXcd r(n + p, n + m);
    r.topLeftCorner(n, n) =
        s.A.cast<Complex>() - lambda * Eigen::MatrixXcd::Identity(n, n);
    r.topRightCorner(n, m) = s.B.cast<Complex>();
    r.bottomLeftCorner(p, n) = s.C.cast<Complex>();
    r.bottomRightCorner(p, m) = s.D.cast<Complex>();
    return r;
}

int rosenbrock_normal_rank(const StateSpace& s) {
    std::mt19937 rng(0x5eed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double scale = 2.0 + (s.states() > 0 ? s.A.cwiseAbs().maxCoeff() : 0.0);
    int best = 0;
    for (int k = 0; k < 5; ++k) {
        const Complex lambda = scale * Complex(u(rng), u(rng) + 2.0);
        best = std::max(best, numerical_rank<Complex>(rosenbrock(s, lambda), s.tol));
    }
    return best;
}

// Finite generalized eigenvalues of the Rosenbrock pencil of a square
// system, unfiltered.
std::vector<Complex> square_pencil_eigenvalues(const StateSpace& s) {
    const int n = s.states(), m = s.inputs();
    const int sz = n + m;
    if (sz == 0 || n == 0) {
        return {};
    }
    Eigen::MatrixXd mz(sz, sz), nz(sz, sz);
    mz << s.A, s.B, s.C, s.D;
    nz.setZero();
    nz.topLeftCorner(n, n).setIdentity();
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> qz(mz, nz, /*computeEigenvectors=*/false);
    std::vector<Complex> out;
    const double beta_floor = 1e-10 * std::max(1.0, mz.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < qz.alphas().size(); ++i) {
        const double beta = qz.betas()(i);
        if (std::abs(beta) <= beta_floor) {
            continue;
        }
        const Complex lambda = qz.alphas()(i) / beta;
        if (std::isfinite(lambda.real()) && std::isfinite(lambda.imag())) {
            out.push_back(lambda);
        }
    }
    return out;
}

} // namespace

StateSpace::StateSpace()
    : A(0, 0), B(0, 0), C(0, 0), D(0, 0) {}

StateSpace::StateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d,
                       double tol_)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)), tol(tol_) {
    check_dims(A, B, C, D);
}

StateSpace StateSpace::gain(const Eigen::MatrixXd& d, double tol_) {
    return StateSpace(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, d.cols()),
                      Eigen::MatrixXd(d.rows(), 0), d, tol_);
}

Eigen::MatrixXcd StateSpace::eval(const Complex& s) const {
    const int n = states();
    if (n == 0) {
        return D.cast<Complex>();
    }
    const Eigen::MatrixXcd resolvent =
        (s * Eigen::MatrixXcd::Identity(n, n) - A.cast<Complex>())
            .partialPivLu()
            .solve(B.cast<Complex>());
    return D.cast<Complex>() + C.cast<Complex>() * resolvent;
}

bool StateSpace::is_hurwitz(double margin) const {
    if (states() == 0) {
        return true;
    }
    return spectral_abscissa(A) < -margin;
}

StateSpace series(const StateSpace& inner, const StateSpace& outer) {
    if (outer.inputs() != inner.outputs()) {
        throw std::invalid_argument("series: dimension mismatch");
    }
    const int n1 = inner.states(), n2 = outer.states();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    a.topLeftCorner(n1, n1) = inner.A;
    a.bottomLeftCorner(n2, n1) = outer.B * inner.C;
    a.bottomRightCorner(n2, n2) = outer.A;
    Eigen::MatrixXd b(n1 + n2, inner.inputs());
    b << inner.B, outer.B * inner.D;
    Eigen::MatrixXd c(outer.outputs(), n1 + n2);
    c << outer.D * inner.C, outer.C;
    return StateSpace(std::move(a), std::move(b), std::move(c),
                      Eigen::MatrixXd(outer.D * inner.D), std::min(inner.tol, outer.tol));
}

StateSpace parallel_sum(const StateSpace& x, const StateSpace& y) {
    if (x.inputs() != y.inputs() || x.outputs() != y.outputs()) {
        throw std::invalid_argument("parallel_sum: dimension mismatch");
    }
    const int n1 = x.states(), n2 = y.states();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    a.topLeftCorner(n1, n1) = x.A;
    a.bottomRightCorner(n2, n2) = y.A;
    Eigen::MatrixXd b(n1 + n2, x.inputs());
    b << x.B, y.B;
    Eigen::MatrixXd c(x.outputs(), n1 + n2);
    c << x.C, y.C;
    return StateSpace(std::move(a), std::move(b), std::move(c), Eigen::MatrixXd(x.D + y.D),
                      std::min(x.tol, y.tol));
}

StateSpace block_diagonal(const std::vector<StateSpace>& blocks) {
    int n = 0, m = 0, p = 0;
    double tol = kDefaultTol;
    for (const auto& b : blocks) {
        n += b.states();
        m += b.inputs();
        p += b.outputs();
        tol = std::min(tol, b.tol);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd bb = Eigen::MatrixXd::Zero(n, m);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, n);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p, m);
    int rn = 0, rm = 0, rp = 0;
    for (const auto& blk : blocks) {
        a.block(rn, rn, blk.states(), blk.states()) = blk.A;
        bb.block(rn, rm, blk.states(), blk.inputs()) = blk.B;
        c.block(rp, rn, blk.outputs(), blk.states()) = blk.C;
        d.block(rp, rm, blk.outputs(), blk.inputs()) = blk.D;
        rn += blk.states();
        rm += blk.inputs();
        rp += blk.outputs();
    }
    return StateSpace(std::move(a), std::move(bb), std::move(c), std::move(d), tol);
}

StateSpace transpose_system(const StateSpace& s) {
    return StateSpace(s.A.transpose(), s.C.transpose(), s.B.transpose(), s.D.transpose(), s.tol);
}

StateSpace premultiply(const Eigen::MatrixXd& w, const StateSpace& s) {
    if (w.cols() != s.outputs()) {
        throw std::invalid_argument("premultiply: dimension mismatch");
    }
    return StateSpace(s.A, s.B, Eigen::MatrixXd(w * s.C), Eigen::MatrixXd(w * s.D), s.tol);
}

StateSpace postmultiply(const StateSpace& s, const Eigen::MatrixXd& v) {
    if (v.rows() != s.inputs()) {
        throw std::invalid_argument("postmultiply: dimension mismatch");
    }
    return StateSpace(s.A, Eigen::MatrixXd(s.B * v), s.C, Eigen::MatrixXd(s.D * v), s.tol);
}

Subspace Subspace::trivial(int ambient, double tol) {
    Subspace s;
    s.basis = Eigen::MatrixXcd(ambient, 0);
    s.ambient_dim = ambient;
    s.tol = tol;
    return s;
}

Subspace Subspace::span(const Eigen::MatrixXcd& columns, double tol) {
    Subspace s;
    s.ambient_dim = static_cast<int>(columns.rows());
    s.tol = tol;
    s.basis = orth<Complex>(columns, tol);
    return s;
}

Eigen::MatrixXcd Subspace::projector() const {
    if (is_trivial()) {
        return Eigen::MatrixXcd::Zero(ambient_dim, ambient_dim);
    }
    return basis * basis.adjoint();
}

double Subspace::residual(const Eigen::VectorXcd& v) const {
    const double norm = v.norm();
    if (norm == 0.0) {
        return 0.0;
    }
    return (v - projector() * v).norm() / norm;
}

double Subspace::containment_residual(const Subspace& inner) const {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < inner.basis.cols(); ++j) {
        worst = std::max(worst, residual(inner.basis.col(j)));
    }
    return worst;
}

Subspace subspace_intersect(const std::vector<Subspace>& spaces, double tol) {
    if (spaces.empty()) {
        throw std::invalid_argument("subspace_intersect: empty input");
    }
    const int ambient = spaces.front().ambient_dim;
    for (const auto& s : spaces) {
        if (s.ambient_dim != ambient) {
            throw std::invalid_argument("subspace_intersect: ambient dimension mismatch");
        }
        if (s.is_trivial()) {
            return Subspace::trivial(ambient, tol);
        }
    }
    if (spaces.size() == 1) {
        return spaces.front();
    }
    Eigen::MatrixXcd stacked(static_cast<Eigen::Index>(spaces.size()) * ambient, ambient);
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(ambient, ambient);
    for (std::size_t i = 0; i < spaces.size(); ++i) {
        stacked.middleRows(static_cast<Eigen::Index>(i) * ambient, ambient) =
            eye - spaces[i].projector();
    }
    Subspace out;
    out.ambient_dim = ambient;
    out.tol = tol;
    out.basis = null_space<Complex>(stacked, tol, 1.0);
    return out;
}

StateSpace realize(const RationalMatrix& g, double tol) {
    const int p = g.rows(), m = g.cols();
    std::vector<Eigen::MatrixXd> blocks_a;
    std::vector<std::pair<int, Eigen::VectorXd>> blocks_b; // input index, column
    std::vector<std::pair<int, Eigen::VectorXd>> blocks_c; // output index, row
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p, m);
    int total = 0;

    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < m; ++j) {
            const RationalFunction f = g(i, j).simplified(tol);
            if (!f.is_proper()) {
                throw std::domain_error("realize: improper entry at (" + std::to_string(i) +
                                        ", " + std::to_string(j) + ")");
            }
            const int k = f.den().degree();
            const double direct = (f.num().degree() == k && k >= 0)
                                      ? f.num().coeff(k) / f.den().coeff(k)
                                      : 0.0;
            d(i, j) = k == 0 ? f(0.0) : direct;
            if (k == 0) {
                continue;
            }
            const Polynomial den = f.den().monic();
            const Polynomial rem = f.num() * (1.0 / f.den().leading()) - direct * den;
            // Controllable canonical block for the strictly proper remainder.
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
            for (int r = 0; r + 1 < k; ++r) {
                a(r, r + 1) = 1.0;
            }
            for (int r = 0; r < k; ++r) {
                a(k - 1, r) = -den.coeff(r);
            }
            Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
            b(k - 1) = 1.0;
            Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
            for (int r = 0; r < k; ++r) {
                c(r) = rem.coeff(r);
            }
            blocks_a.push_back(std::move(a));
            blocks_b.emplace_back(j, std::move(b));
            blocks_c.emplace_back(i, std::move(c));
            total += k;
        }
    }

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(total, total);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(total, m);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, total);
    int offset = 0;
    for (std::size_t blk = 0; blk < blocks_a.size(); ++blk) {
        const int k = static_cast<int>(blocks_a[blk].rows());
        a.block(offset, offset, k, k) = blocks_a[blk];
        b.block(offset, blocks_b[blk].first, k, 1) = blocks_b[blk].second;
        c.block(blocks_c[blk].first, offset, 1, k) = blocks_c[blk].second.transpose();
        offset += k;
    }
    return minimalize(StateSpace(std::move(a), std::move(b), std::move(c), std::move(d), tol));
}

StateSpace minimalize(const StateSpace& s) {
    // Controllable part.
    const Eigen::MatrixXd v = invariant_image(s.A, s.B, s.tol);
    Eigen::MatrixXd a1 = v.transpose() * s.A * v;
    Eigen::MatrixXd b1 = v.transpose() * s.B;
    Eigen::MatrixXd c1 = s.C * v;
    // Observable part of the controllable part.
    const Eigen::MatrixXd w = invariant_image(a1.transpose(), c1.transpose(), s.tol);
    Eigen::MatrixXd a2 = w.transpose() * a1 * w;
    Eigen::MatrixXd b2 = w.transpose() * b1;
    Eigen::MatrixXd c2 = c1 * w;
    return StateSpace(std::move(a2), std::move(b2), std::move(c2), s.D, s.tol);
}

RationalMatrix transfer_function(const StateSpace& s) {
    RationalMatrix g(s.outputs(), s.inputs());
    for (int i = 0; i < s.outputs(); ++i) {
        for (int j = 0; j < s.inputs(); ++j) {
            const StateSpace sub = minimalize(
                StateSpace(s.A, s.B.col(j), s.C.row(i), s.D.block(i, j, 1, 1), s.tol));
            const int n = sub.states();
            if (n == 0) {
                g(i, j) = RationalFunction(sub.D(0, 0));
                continue;
            }
            const std::vector<Complex> ev = eigenvalues(sub.A);
            const Polynomial den = Polynomial::from_roots(ev);
            double radius = 2.0;
            for (const Complex& lambda : ev) {
                radius = std::max(radius, 2.0 + std::abs(lambda));
            }
            // Numerator of D + C (sI-A)^{-1} B as det [sI-A, B; -C, D],
            // interpolated at scaled roots of unity.
            const int pts = n + 1;
            Eigen::VectorXcd values(pts);
            for (int k = 0; k < pts; ++k) {
                const double theta = 2.0 * std::numbers::pi * k / pts;
                const Complex sk = radius * Complex(std::cos(theta), std::sin(theta));
                Eigen::MatrixXcd bordered(n + 1, n + 1);
                bordered.topLeftCorner(n, n) =
                    sk * Eigen::MatrixXcd::Identity(n, n) - sub.A.cast<Complex>();
                bordered.topRightCorner(n, 1) = sub.B.cast<Complex>();
                bordered.bottomLeftCorner(1, n) = -sub.C.cast<Complex>();
                bordered(n, n) = Complex(sub.D(0, 0), 0.0);
                values(k) = bordered.partialPivLu().determinant();
            }
            Eigen::VectorXd num_coeffs(pts);
            double rpow = 1.0;
            for (int jj = 0; jj < pts; ++jj) {
                Complex acc(0.0, 0.0);
                for (int k = 0; k < pts; ++k) {
                    const double theta = -2.0 * std::numbers::pi * jj * k / pts;
                    acc += values(k) * Complex(std::cos(theta), std::sin(theta));
                }
                num_coeffs(jj) = acc.real() / (pts * rpow);
                rpow *= radius;
            }
            g(i, j) = RationalFunction(Polynomial(std::move(num_coeffs)), den).simplified(s.tol);
        }
    }
    return g;
}

int mcmillan_degree(const RationalMatrix& g, double tol) {
    return realize(g, tol).states();
}

std::pair<Subspace, Subspace> pole_directions(const StateSpace& minimal, const Complex& lambda) {
    const int n = minimal.states();
    const int m = minimal.inputs();
    const int p = minimal.outputs();
    if (n == 0) {
        return {Subspace::trivial(m, minimal.tol), Subspace::trivial(p, minimal.tol)};
    }
    const double kernel_tol = std::max(minimal.tol, kClusterTol);
    const double scale =
        std::max(1.0, minimal.A.cwiseAbs().maxCoeff() + std::abs(lambda));
    const Eigen::MatrixXcd shifted =
        lambda * Eigen::MatrixXcd::Identity(n, n) - minimal.A.cast<Complex>();
    const Eigen::MatrixXcd right = null_space<Complex>(shifted, kernel_tol, scale);
    const Eigen::MatrixXcd left = left_null_space<Complex>(shifted, kernel_tol, scale);
    Subspace in = Subspace::span(minimal.B.transpose().cast<Complex>() * left, minimal.tol);
    Subspace out = Subspace::span(minimal.C.cast<Complex>() * right, minimal.tol);
    return {std::move(in), std::move(out)};
}

std::vector<PoleRecord> poles(const StateSpace& s, double cluster_tol) {
    const StateSpace min = minimalize(s);
    std::vector<PoleRecord> out;
    for (const auto& [lambda, mult] : cluster_points(eigenvalues(min.A), cluster_tol)) {
        PoleRecord rec;
        rec.lambda = lambda;
        rec.multiplicity = mult;
        std::tie(rec.in_dirs, rec.out_dirs) = pole_directions(min, lambda);
        out.push_back(std::move(rec));
    }
    return out;
}

std::pair<Subspace, Subspace> zero_directions(const StateSpace& s, const Complex& lambda) {
    const Eigen::MatrixXcd r = rosenbrock(s, lambda);
    const int n = s.states(), m = s.inputs(), p = s.outputs();
    const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
    const Eigen::MatrixXcd right = null_space<Complex>(r, s.tol, scale);
    const Eigen::MatrixXcd left = left_null_space<Complex>(r, s.tol, scale);
    Subspace in = Subspace::span(right.bottomRows(m), s.tol);
    Subspace out = Subspace::span(left.bottomRows(p), s.tol);
    return {std::move(in), std::move(out)};
}

std::vector<ZeroRecord> invariant_zeros(const StateSpace& s) {
    const int m = s.inputs(), p = s.outputs();
    const int normal = rosenbrock_normal_rank(s);
    std::vector<Complex> candidates;
    if (p == m) {
        candidates = square_pencil_eigenvalues(s);
    } else if (p > m) {
        // Square up with a random output mix; true zeros survive, spurious
        // candidates are removed by the rank test below.
        std::mt19937 rng(0xacce55);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::MatrixXd w(m, p);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < p; ++j) {
                w(i, j) = u(rng);
            }
        }
        candidates = square_pencil_eigenvalues(premultiply(w, s));
    } else {
        // Wide system: the transposed system has the same zero locations
        // (its Rosenbrock pencil is the transpose); directions are computed
        // on the original below.
        for (const auto& rec : invariant_zeros(transpose_system(s))) {
            candidates.push_back(rec.lambda);
        }
    }
    std::vector<Complex> confirmed;
    for (const Complex& lambda : candidates) {
        if (numerical_rank<Complex>(rosenbrock(s, lambda), s.tol) < normal) {
            confirmed.push_back(lambda);
        }
    }
    std::vector<ZeroRecord> out;
    for (const auto& [lambda, mult] : cluster_points(confirmed, kClusterTol)) {
        ZeroRecord rec;
        rec.lambda = lambda;
        std::tie(rec.in_dirs, rec.out_dirs) = zero_directions(s, lambda);
        out.push_back(std::move(rec));
    }
    return out;
}

std::pair<bool, Subspace> pbh_uncontrollable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                             const Complex& lambda, double tol) {
    const int n = static_cast<int>(a.rows());
    if (n == 0) {
        return {false, Subspace::trivial(0, tol)};
    }
    Eigen::MatrixXcd pencil(n, n + b.cols());
    pencil.leftCols(n) = a.cast<Complex>() - lambda * Eigen::MatrixXcd::Identity(n, n);
    pencil.rightCols(b.cols()) = b.cast<Complex>();
    const double scale = std::max(1.0, pencil.cwiseAbs().maxCoeff());
    const Eigen::MatrixXcd left = left_null_space<Complex>(pencil, tol, scale);
    return {left.cols() > 0, Subspace::span(left, tol)};
}

std::pair<bool, Subspace> pbh_unobservable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                                           const Complex& lambda, double tol) {
    auto [fails, sub] = pbh_uncontrollable(a.transpose(), c.transpose(), std::conj(lambda), tol);
    // Right null vectors of [A - lambda I; C] are the conjugates of the left
    // null vectors of the transposed pencil.
    Subspace out = Subspace::span(sub.basis.conjugate(), tol);
    return {fails, std::move(out)};
}

std::vector<std::pair<Complex, int>> unstable_modes(const StateSpace& s, double cluster_tol) {
    std::vector<Complex> bad;
    for (const Complex& ev : eigenvalues(s.A)) {
        if (ev.real() >= -kAxisMargin) {
            bad.push_back(ev);
        }
    }
    return cluster_points(bad, cluster_tol);
}

} // namespace diffstab
