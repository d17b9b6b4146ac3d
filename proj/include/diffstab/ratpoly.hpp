#pragma once

#include "diffstab/linalg.hpp"

#include <Eigen/Dense>

#include <complex>
#include <initializer_list>
#include <string>
#include <vector>

// Tolerance-aware polynomial and rational-function algebra. Coefficients are
// real, stored in ascending powers of s; complex arithmetic enters only
// through root finding and pointwise evaluation.

namespace diffstab {

/// Real univariate polynomial in s, ascending coefficients, canonically
/// trimmed (leading coefficient nonzero unless identically zero). The zero
/// polynomial has an empty coefficient vector and degree() == -1, standing
/// in for degree -infinity.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(std::initializer_list<double> ascending);
    explicit Polynomial(Eigen::VectorXd ascending);
    explicit Polynomial(double constant);

    static Polynomial zero() { return Polynomial{}; }
    static Polynomial one() { return Polynomial{1.0}; }
    static Polynomial variable() { return Polynomial{0.0, 1.0}; } // the monomial s
    // Monic real polynomial with the given roots; conjugate pairs are
    // combined into real quadratic factors.
    static Polynomial from_roots(const std::vector<Complex>& roots, double pair_tol = kClusterTol);

    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const { return coeffs_.size() == 0; }
    bool is_constant() const { return coeffs_.size() <= 1; }
    double leading() const { return is_zero() ? 0.0 : coeffs_(coeffs_.size() - 1); }
    double max_abs_coeff() const { return is_zero() ? 0.0 : coeffs_.cwiseAbs().maxCoeff(); }
    const Eigen::VectorXd& coeffs() const { return coeffs_; }
    double coeff(int k) const {
        return (k >= 0 && k < static_cast<int>(coeffs_.size())) ? coeffs_(k) : 0.0;
    }

    template <typename Scalar>
    Scalar operator()(const Scalar& s) const {
        Scalar acc = Scalar(0);
        for (Eigen::Index i = coeffs_.size(); i-- > 0;) {
            acc = acc * s + Scalar(coeffs_(i));
        }
        return acc;
    }

    Polynomial monic() const;
    Polynomial derivative() const;
    std::string to_string(const std::string& var = "s") const;

    Polynomial operator-() const;
    Polynomial& operator+=(const Polynomial& rhs);
    Polynomial& operator-=(const Polynomial& rhs);
    Polynomial& operator*=(const Polynomial& rhs);
    Polynomial& operator*=(double k);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, const Polynomial& b) { return a *= b; }
    friend Polynomial operator*(Polynomial a, double k) { return a *= k; }
    friend Polynomial operator*(double k, Polynomial a) { return a *= k; }

private:
    void trim();
    Eigen::VectorXd coeffs_; // empty == zero polynomial
};

/// Roots with multiplicity via companion-matrix eigenvalues; conjugate pairs
/// for real input. Throws std::domain_error on the zero polynomial.
std::vector<Complex> poly_roots(const Polynomial& p);

/// Monic approximate GCD decided by the numerical rank of the Sylvester
/// matrix at relative threshold tol. Throws if both inputs are zero.
Polynomial poly_gcd(const Polynomial& p, const Polynomial& q, double tol = kDefaultTol);

/// Euclidean division p = q * d + r with deg r < deg d. Throws on zero divisor.
std::pair<Polynomial, Polynomial> poly_divmod(const Polynomial& p, const Polynomial& d);

/// Monic least common multiple p * q / gcd(p, q).
Polynomial poly_lcm(const Polynomial& p, const Polynomial& q, double tol = kDefaultTol);

/// Ratio of real polynomials. The denominator is kept monic; common factors
/// are removed by the arithmetic operators (at the default tolerance) and by
/// simplified() under an explicit tolerance.
class RationalFunction {
public:
    RationalFunction() : num_(), den_(Polynomial::one()) {}
    RationalFunction(Polynomial num, Polynomial den);
    explicit RationalFunction(double constant)
        : num_(Polynomial(constant)), den_(Polynomial::one()) {}

    const Polynomial& num() const { return num_; }
    const Polynomial& den() const { return den_; }
    bool is_zero() const { return num_.is_zero(); }
    bool is_proper() const { return num_.degree() <= den_.degree(); }
    bool is_strictly_proper() const { return num_.degree() < den_.degree(); }

    template <typename Scalar>
    Scalar operator()(const Scalar& s) const {
        return num_(s) / den_(s);
    }

    /// Canonical form: common factors removed at tol, denominator monic.
    RationalFunction simplified(double tol = kDefaultTol) const;
    std::string to_string(const std::string& var = "s") const;

    RationalFunction operator-() const;
    friend RationalFunction operator+(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator-(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator/(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator*(const RationalFunction& a, double k);
    friend RationalFunction operator*(double k, const RationalFunction& a) { return a * k; }

private:
    Polynomial num_, den_; // den monic, never zero
};

/// Dense matrix of rational functions (row-major storage).
class RationalMatrix {
public:
    RationalMatrix() : rows_(0), cols_(0) {}
    RationalMatrix(int rows, int cols);
    explicit RationalMatrix(const Eigen::MatrixXd& constant);
    explicit RationalMatrix(RationalFunction scalar);

    static RationalMatrix identity(int n);
    static RationalMatrix zero(int rows, int cols) { return RationalMatrix(rows, cols); }
    static RationalMatrix block_diagonal(const std::vector<RationalMatrix>& blocks);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    RationalFunction& operator()(int i, int j);
    const RationalFunction& operator()(int i, int j) const;

    bool is_proper() const;
    RationalMatrix transpose() const;
    RationalMatrix block(int row0, int col0, int nrows, int ncols) const;

    Eigen::MatrixXcd eval(const Complex& s) const;

    /// All denominator roots across entries (with per-entry multiplicity).
    std::vector<Complex> entry_poles() const;
    /// Monic least common denominator across all entries.
    Polynomial common_denominator(double tol = kDefaultTol) const;

    friend RationalMatrix operator+(const RationalMatrix& a, const RationalMatrix& b);
    friend RationalMatrix operator-(const RationalMatrix& a, const RationalMatrix& b);
    friend RationalMatrix operator*(const RationalMatrix& a, const RationalMatrix& b);
    friend RationalMatrix operator*(const RationalFunction& f, const RationalMatrix& a);
    friend RationalMatrix operator*(double k, const RationalMatrix& a);
    friend RationalMatrix operator*(const Eigen::MatrixXd& a, const RationalMatrix& g);
    friend RationalMatrix operator*(const RationalMatrix& g, const Eigen::MatrixXd& a);

private:
    int rows_, cols_;
    std::vector<RationalFunction> entries_;
};

/// Kronecker product of a constant matrix with a rational matrix.
RationalMatrix kron(const Eigen::MatrixXd& a, const RationalMatrix& g);

/// Normal rank: maximal numerical rank over sample points on a circle of
/// radius 2 + (largest entry-pole magnitude), which keeps samples away from
/// all entry poles.
int rm_normal_rank(const RationalMatrix& g, double tol = kDefaultTol, int samples = 7);

/// True when every entry of a equals the corresponding entry of b at a fixed
/// set of sample points, to relative tolerance.
bool rm_equal_sampled(const RationalMatrix& a, const RationalMatrix& b, double rel_tol = 1e-6);

} // namespace diffstab
