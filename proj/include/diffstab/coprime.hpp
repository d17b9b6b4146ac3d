#pragma once

#include "diffstab/ssreal.hpp"

#include <vector>

// Doubly-coprime factorization over the stable rationals for proper systems,
// with the Riccati-based stabilizing gains and the shared-denominator kernel
// tests used by the stabilizability analysis.

namespace diffstab {

/// The eight stable factors of a doubly-coprime factorization of `source`:
///   source = N M^{-1} = M_tilde^{-1} N_tilde,
///   X M + Y N = I,   M_tilde X_tilde + N_tilde Y_tilde = I.
struct CoprimeFactors {
    StateSpace M, N, M_tilde, N_tilde;
    StateSpace X, Y, X_tilde, Y_tilde;
    StateSpace source;
};

/// Stabilizing solution of A^T P + P A - P B B^T P + Q = 0 (A - B B^T P
/// Hurwitz), via the stable invariant subspace of the Hamiltonian matrix,
/// computed from a reordered complex Schur form. Q must be symmetric
/// positive semidefinite with (A, Q) detectable; Q = I always qualifies.
Eigen::MatrixXd solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const Eigen::MatrixXd& q);

/// State feedback F with A + B F Hurwitz (LQR with identity weights).
Eigen::MatrixXd stabilizing_state_feedback(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Output injection L with A + L C Hurwitz (dual problem).
Eigen::MatrixXd stabilizing_output_injection(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c);

/// Doubly-coprime factorization built from Riccati gains. Throws
/// std::domain_error naming the offending mode when the realization has an
/// unstabilizable or undetectable closed-right-half-plane mode.
CoprimeFactors factorize(const StateSpace& s, double tol = kDefaultTol);

/// max over the grid of || X(s) M(s) + Y(s) N(s) - I || and the dual
/// residual, evaluated on the imaginary axis.
double bezout_residual(const CoprimeFactors& f, int grid_points = 100);

/// max over the grid of || G(s) - N(s) M(s)^{-1} || and the left-factor
/// counterpart.
double reconstruction_residual(const CoprimeFactors& f, int grid_points = 20);

/// Intersection over the agents of the left kernels of M_i(lambda) (first)
/// and of the right kernels of M_tilde_i(lambda) (second). Throws when
/// lambda lies in the open left half-plane.
std::pair<Subspace, Subspace> denominator_kernel_test(const std::vector<CoprimeFactors>& agents,
                                                      const Complex& lambda,
                                                      double tol = kDefaultTol);

} // namespace diffstab
