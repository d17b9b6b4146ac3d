#include "diffstab/coprime.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace diffstab {

namespace {

// Swap the adjacent diagonal entries (k, k+1) of the complex Schur form
// t, accumulating the transformation into u. Standard 1x1-block exchange:
// rotate so that the eigenvector of the trailing eigenvalue becomes the
// leading Schur vector.
void swap_schur_blocks(Eigen::MatrixXcd& t, Eigen::MatrixXcd& u, int k) {
    const Complex t11 = t(k, k);
    const Complex t12 = t(k, k + 1);
    const Complex t22 = t(k + 1, k + 1);
    Eigen::Vector2cd x;
    x << t12, t22 - t11;
    const double r = x.norm();
    if (r == 0.0) {
        return; // identical eigenvalues; nothing to move
    }
    Eigen::Matrix2cd q;
    q.col(0) = x / r;
    q(0, 1) = -std::conj(x(1)) / r;
    q(1, 1) = std::conj(x(0)) / r;
    t.middleCols(k, 2) = t.middleCols(k, 2) * q;
    t.middleRows(k, 2) = q.adjoint() * t.middleRows(k, 2);
    u.middleCols(k, 2) = u.middleCols(k, 2) * q;
    t(k + 1, k) = Complex(0.0, 0.0);
}

std::string mode_to_string(const Complex& lambda) {
    std::ostringstream os;
    os << lambda.real();
    if (lambda.imag() != 0.0) {
        os << (lambda.imag() > 0 ? "+" : "-") << std::abs(lambda.imag()) << "i";
    }
    return os.str();
}

} // namespace

Eigen::MatrixXd solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const Eigen::MatrixXd& q) {
    const int n = static_cast<int>(a.rows());
    if (n == 0) {
        return Eigen::MatrixXd(0, 0);
    }
    Eigen::MatrixXd ham(2 * n, 2 * n);
    ham.topLeftCorner(n, n) = a;
    ham.topRightCorner(n, n) = -b * b.transpose();
    ham.bottomLeftCorner(n, n) = -q;
    ham.bottomRightCorner(n, n) = -a.transpose();

    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(ham.cast<Complex>());
    if (schur.info() != Eigen::Success) {
        throw std::runtime_error("solve_care: Schur decomposition failed");
    }
    Eigen::MatrixXcd t = schur.matrixT();
    Eigen::MatrixXcd u = schur.matrixU();

    // Bubble the stable eigenvalues into the leading positions.
    bool moved = true;
    while (moved) {
        moved = false;
        for (int k = 0; k + 1 < 2 * n; ++k) {
            if (t(k, k).real() >= 0.0 && t(k + 1, k + 1).real() < 0.0) {
                swap_schur_blocks(t, u, k);
                moved = true;
            }
        }
    }
    int stable = 0;
    for (int k = 0; k < 2 * n; ++k) {
        if (t(k, k).real() < 0.0) {
            ++stable;
        }
    }
    if (stable != n) {
        throw std::runtime_error(
            "solve_care: Hamiltonian has eigenvalues on the imaginary axis");
    }

    const Eigen::MatrixXcd x1 = u.topLeftCorner(n, n);
    const Eigen::MatrixXcd x2 = u.bottomLeftCorner(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(x1);
    const Eigen::MatrixXcd sol = x2 * lu.inverse();
    Eigen::MatrixXd p = sol.real();
    return 0.5 * (p + p.transpose()).eval();
}

Eigen::MatrixXd stabilizing_state_feedback(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd p =
        solve_care(a, b, Eigen::MatrixXd::Identity(a.rows(), a.rows()));
    return -b.transpose() * p;
}

Eigen::MatrixXd stabilizing_output_injection(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c) {
    const Eigen::MatrixXd p =
        solve_care(a.transpose(), c.transpose(), Eigen::MatrixXd::Identity(a.rows(), a.rows()));
    return -p * c.transpose();
}

CoprimeFactors factorize(const StateSpace& s, double tol) {
    const int n = s.states(), m = s.inputs(), p = s.outputs();

    for (const auto& [lambda, mult] : unstable_modes(s)) {
        if (pbh_uncontrollable(s.A, s.B, lambda, tol).first) {
            throw std::domain_error("factorize: unstabilizable mode at s = " +
                                    mode_to_string(lambda));
        }
        if (pbh_unobservable(s.A, s.C, lambda, tol).first) {
            throw std::domain_error("factorize: undetectable mode at s = " +
                                    mode_to_string(lambda));
        }
    }

    CoprimeFactors f;
    f.source = s;
    if (n == 0) {
        const Eigen::MatrixXd im = Eigen::MatrixXd::Identity(m, m);
        const Eigen::MatrixXd ip = Eigen::MatrixXd::Identity(p, p);
        const Eigen::MatrixXd zmp = Eigen::MatrixXd::Zero(m, p);
        f.M = StateSpace::gain(im, tol);
        f.N = StateSpace::gain(s.D, tol);
        f.M_tilde = StateSpace::gain(ip, tol);
        f.N_tilde = StateSpace::gain(s.D, tol);
        f.X = StateSpace::gain(im, tol);
        f.Y = StateSpace::gain(zmp, tol);
        f.X_tilde = StateSpace::gain(ip, tol);
        f.Y_tilde = StateSpace::gain(zmp, tol);
        return f;
    }

    const Eigen::MatrixXd fgain = stabilizing_state_feedback(s.A, s.B);
    const Eigen::MatrixXd lgain = stabilizing_output_injection(s.A, s.C);
    const Eigen::MatrixXd af = s.A + s.B * fgain;
    const Eigen::MatrixXd al = s.A + lgain * s.C;
    const Eigen::MatrixXd cdf = s.C + s.D * fgain;
    const Eigen::MatrixXd bld = s.B + lgain * s.D;
    const Eigen::MatrixXd im = Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd ip = Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd zmp = Eigen::MatrixXd::Zero(m, p);

    f.M = StateSpace(af, s.B, fgain, im, tol);
    f.N = StateSpace(af, s.B, cdf, s.D, tol);
    f.M_tilde = StateSpace(al, lgain, s.C, ip, tol);
    f.N_tilde = StateSpace(al, bld, s.C, s.D, tol);
    f.X = StateSpace(al, bld, -fgain, im, tol);
    f.Y = StateSpace(al, -lgain, -fgain, zmp, tol);
    f.X_tilde = StateSpace(af, -lgain, cdf, ip, tol);
    f.Y_tilde = StateSpace(af, -lgain, -fgain, zmp, tol);

    for (const StateSpace* factor :
         {&f.M, &f.N, &f.M_tilde, &f.N_tilde, &f.X, &f.Y, &f.X_tilde, &f.Y_tilde}) {
        if (!factor->is_hurwitz()) {
            throw std::runtime_error("factorize: a computed factor is not stable");
        }
    }
    return f;
}

double bezout_residual(const CoprimeFactors& f, int grid_points) {
    const int m = f.M.inputs();
    const int p = f.M_tilde.inputs();
    const Eigen::MatrixXcd im = Eigen::MatrixXcd::Identity(m, m);
    const Eigen::MatrixXcd ip = Eigen::MatrixXcd::Identity(p, p);
    double worst = 0.0;
    for (int k = 0; k < grid_points; ++k) {
        // Log grid over [1e-3, 1e3] rad/s plus the origin.
        const double omega =
            k == 0 ? 0.0
                   : std::pow(10.0, -3.0 + 6.0 * (k - 1) / std::max(1, grid_points - 2));
        const Complex s(0.0, omega);
        const Eigen::MatrixXcd right =
            f.X.eval(s) * f.M.eval(s) + f.Y.eval(s) * f.N.eval(s) - im;
        const Eigen::MatrixXcd left =
            f.M_tilde.eval(s) * f.X_tilde.eval(s) + f.N_tilde.eval(s) * f.Y_tilde.eval(s) - ip;
        worst = std::max({worst, right.norm(), left.norm()});
    }
    return worst;
}

double reconstruction_residual(const CoprimeFactors& f, int grid_points) {
    double radius = 2.0;
    if (f.source.states() > 0) {
        for (const Complex& ev : eigenvalues(f.source.A)) {
            radius = std::max(radius, 2.0 + std::abs(ev));
        }
    }
    double worst = 0.0;
    for (int k = 0; k < grid_points; ++k) {
        const double theta = 2.0 * 3.14159265358979323846 * (k + 0.37) / grid_points;
        const Complex s = radius * Complex(std::cos(theta), std::sin(theta));
        const Eigen::MatrixXcd g = f.source.eval(s);
        const Eigen::MatrixXcd right =
            f.N.eval(s) * f.M.eval(s).partialPivLu().inverse() - g;
        const Eigen::MatrixXcd left =
            f.M_tilde.eval(s).partialPivLu().inverse() * f.N_tilde.eval(s) - g;
        const double scale = std::max(1.0, g.norm());
        worst = std::max({worst, right.norm() / scale, left.norm() / scale});
    }
    return worst;
}

std::pair<Subspace, Subspace> denominator_kernel_test(const std::vector<CoprimeFactors>& agents,
                                                      const Complex& lambda, double tol) {
    if (agents.empty()) {
        throw std::invalid_argument("denominator_kernel_test: no agents");
    }
    if (lambda.real() < -kAxisMargin) {
        throw std::domain_error(
            "denominator_kernel_test: lambda must lie in the closed right half-plane");
    }
    const int m = agents.front().M.inputs();
    const int p = agents.front().M_tilde.inputs();
    std::vector<Subspace> right_kernels, left_kernels;
    for (const auto& f : agents) {
        if (f.M.inputs() != m || f.M_tilde.inputs() != p) {
            throw std::invalid_argument("denominator_kernel_test: agent dimension mismatch");
        }
        // Denominators are normalized (value I at infinity), so kernel
        // decisions are anchored at unit scale.
        right_kernels.push_back(Subspace::span(
            null_space<Complex>(f.M.eval(lambda).adjoint().eval(), tol, 1.0), tol));
        left_kernels.push_back(Subspace::span(
            null_space<Complex>(Eigen::MatrixXcd(f.M_tilde.eval(lambda)), tol, 1.0), tol));
    }
    return {subspace_intersect(right_kernels, tol), subspace_intersect(left_kernels, tol)};
}

} // namespace diffstab
