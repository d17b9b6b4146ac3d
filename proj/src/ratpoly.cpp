#include "diffstab/ratpoly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace diffstab {

namespace {

constexpr double kTrimRel = 1e-12; // leading-coefficient trim, relative to max |coeff|

// Convolution (multiplication) matrix: maps ascending coefficients of a
// polynomial with `cols` coefficients to the coefficients of its product
// with a.
Eigen::MatrixXd convolution_matrix(const Polynomial& a, int cols) {
    const int da = std::max(a.degree(), 0);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(da + cols, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i <= a.degree(); ++i) {
            m(i + j, j) = a.coeff(i);
        }
    }
    return m;
}

} // namespace

Polynomial::Polynomial(std::initializer_list<double> ascending) {
    coeffs_.resize(static_cast<Eigen::Index>(ascending.size()));
    Eigen::Index i = 0;
    for (double c : ascending) {
        coeffs_(i++) = c;
    }
    trim();
}

Polynomial::Polynomial(Eigen::VectorXd ascending) : coeffs_(std::move(ascending)) {
    trim();
}

Polynomial::Polynomial(double constant) {
    coeffs_.resize(1);
    coeffs_(0) = constant;
    trim();
}

void Polynomial::trim() {
    if (coeffs_.size() == 0) {
        return;
    }
    const double scale = coeffs_.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        coeffs_.resize(0);
        return;
    }
    Eigen::Index n = coeffs_.size();
    while (n > 0 && std::abs(coeffs_(n - 1)) <= kTrimRel * scale) {
        --n;
    }
    coeffs_.conservativeResize(n);
}

Polynomial Polynomial::from_roots(const std::vector<Complex>& roots, double pair_tol) {
    Polynomial p = Polynomial::one();
    std::vector<Complex> pending;
    for (const Complex& r : roots) {
        if (std::abs(r.imag()) <= pair_tol * std::max(1.0, std::abs(r))) {
            p *= Polynomial{-r.real(), 1.0};
            continue;
        }
        // Match against a previously seen conjugate.
        auto it = std::find_if(pending.begin(), pending.end(), [&](const Complex& c) {
            return std::abs(std::conj(c) - r) <= pair_tol * std::max(1.0, std::abs(r));
        });
        if (it != pending.end()) {
            const Complex c = *it;
            pending.erase(it);
            p *= Polynomial{std::norm(c), -2.0 * c.real(), 1.0};
        } else {
            pending.push_back(r);
        }
    }
    // Unpaired complex roots (should not happen for eigenvalue input): use
    // the real quadratic with the same root pair.
    for (const Complex& c : pending) {
        p *= Polynomial{std::norm(c), -2.0 * c.real(), 1.0};
    }
    return p;
}

Polynomial Polynomial::monic() const {
    if (is_zero()) {
        return *this;
    }
    Polynomial out = *this;
    out.coeffs_ /= leading();
    return out;
}

Polynomial Polynomial::derivative() const {
    if (degree() <= 0) {
        return Polynomial::zero();
    }
    Eigen::VectorXd d(coeffs_.size() - 1);
    for (Eigen::Index i = 1; i < coeffs_.size(); ++i) {
        d(i - 1) = coeffs_(i) * static_cast<double>(i);
    }
    return Polynomial(std::move(d));
}

std::string Polynomial::to_string(const std::string& var) const {
    if (is_zero()) {
        return "0";
    }
    std::ostringstream os;
    bool first = true;
    for (int k = degree(); k >= 0; --k) {
        const double c = coeff(k);
        if (c == 0.0) {
            continue;
        }
        if (!first) {
            os << (c < 0 ? " - " : " + ");
        } else if (c < 0) {
            os << "-";
        }
        const double a = std::abs(c);
        if (k == 0 || a != 1.0) {
            os << a;
            if (k > 0) {
                os << "*";
            }
        }
        if (k >= 1) {
            os << var;
            if (k > 1) {
                os << "^" << k;
            }
        }
        first = false;
    }
    return os.str();
}

Polynomial Polynomial::operator-() const {
    Polynomial out = *this;
    out.coeffs_ = -out.coeffs_;
    return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
    const Eigen::Index n = std::max(coeffs_.size(), rhs.coeffs_.size());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    sum.head(coeffs_.size()) = coeffs_;
    sum.head(rhs.coeffs_.size()) += rhs.coeffs_;
    coeffs_ = std::move(sum);
    trim();
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& rhs) {
    return *this += -rhs;
}

Polynomial& Polynomial::operator*=(const Polynomial& rhs) {
    if (is_zero() || rhs.is_zero()) {
        coeffs_.resize(0);
        return *this;
    }
    Eigen::VectorXd prod = Eigen::VectorXd::Zero(coeffs_.size() + rhs.coeffs_.size() - 1);
    for (Eigen::Index i = 0; i < coeffs_.size(); ++i) {
        for (Eigen::Index j = 0; j < rhs.coeffs_.size(); ++j) {
            prod(i + j) += coeffs_(i) * rhs.coeffs_(j);
        }
    }
    coeffs_ = std::move(prod);
    trim();
    return *this;
}

Polynomial& Polynomial::operator*=(double k) {
    coeffs_ *= k;
    trim();
    return *this;
}

std::vector<Complex> poly_roots(const Polynomial& p) {
    if (p.is_zero()) {
        throw std::domain_error("poly_roots: zero polynomial has no root set");
    }
    const int n = p.degree();
    if (n == 0) {
        return {};
    }
    const Polynomial m = p.monic();
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n - 1; ++i) {
        companion(i + 1, i) = 1.0;
    }
    for (int i = 0; i < n; ++i) {
        companion(i, n - 1) = -m.coeff(i);
    }
    std::vector<Complex> roots = eigenvalues(companion);
    std::sort(roots.begin(), roots.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) {
            return a.real() < b.real();
        }
        return a.imag() < b.imag();
    });
    return roots;
}

std::pair<Polynomial, Polynomial> poly_divmod(const Polynomial& p, const Polynomial& d) {
    if (d.is_zero()) {
        throw std::domain_error("poly_divmod: division by the zero polynomial");
    }
    if (p.degree() < d.degree()) {
        return {Polynomial::zero(), p};
    }
    const int qdeg = p.degree() - d.degree();
    Eigen::VectorXd rem = p.coeffs();
    Eigen::VectorXd quot = Eigen::VectorXd::Zero(qdeg + 1);
    const double lead = d.leading();
    for (int k = qdeg; k >= 0; --k) {
        const double factor = rem(k + d.degree()) / lead;
        quot(k) = factor;
        for (int i = 0; i <= d.degree(); ++i) {
            rem(k + i) -= factor * d.coeff(i);
        }
    }
    rem.conservativeResize(std::max(d.degree(), 1));
    return {Polynomial(std::move(quot)), Polynomial(std::move(rem))};
}

Polynomial poly_gcd(const Polynomial& p, const Polynomial& q, double tol) {
    if (p.is_zero() && q.is_zero()) {
        throw std::domain_error("poly_gcd: gcd(0, 0) is undefined");
    }
    if (p.is_zero()) {
        return q.monic();
    }
    if (q.is_zero()) {
        return p.monic();
    }
    if (p.is_constant() || q.is_constant()) {
        return Polynomial::one();
    }
    // Scale both to unit max coefficient; GCD support is scale invariant.
    const Polynomial ps = p * (1.0 / p.max_abs_coeff());
    const Polynomial qs = q * (1.0 / q.max_abs_coeff());
    const int m = ps.degree();
    const int n = qs.degree();

    Eigen::MatrixXd sylvester(m + n, m + n);
    sylvester << convolution_matrix(ps, n), convolution_matrix(qs, m);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sylvester, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = tol * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            ++rank;
        }
    }
    const int d = m + n - rank;
    if (d == 0) {
        return Polynomial::one();
    }

    // Cofactors from the reduced Sylvester (subresultant) matrix of order
    // d-1, whose null space is one-dimensional: its null vector (b; c)
    // satisfies p*b + q*c = 0 with b ~ q/g and c ~ -p/g up to a common
    // scale. The full Sylvester null space has dimension d and a generic
    // null vector there mixes in spurious polynomial multiples.
    const int nb = n - d + 1;
    const int nc = m - d + 1;
    Eigen::MatrixXd reduced(std::max(m + nb, n + nc), nb + nc);
    reduced.setZero();
    reduced.topLeftCorner(m + nb, nb) = convolution_matrix(ps, nb);
    reduced.topRightCorner(n + nc, nc) = convolution_matrix(qs, nc);
    Eigen::JacobiSVD<Eigen::MatrixXd> rsvd(reduced, Eigen::ComputeFullV);
    const Eigen::VectorXd z = rsvd.matrixV().col(nb + nc - 1);
    Polynomial b(Eigen::VectorXd(z.head(nb)));
    Polynomial c(Eigen::VectorXd(z.tail(nc)));
    if (b.is_zero() && c.is_zero()) {
        return Polynomial::one();
    }

    // Recover g of degree d from the homogeneous least-squares system
    // [conv(b) -q; conv(c) p] * (g; alpha) = 0.

    const Eigen::MatrixXd cb = convolution_matrix(b, d + 1);
    const Eigen::MatrixXd cc = convolution_matrix(c, d + 1);
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(cb.rows() + cc.rows(), d + 2);
    sys.topLeftCorner(cb.rows(), d + 1) = cb;
    sys.bottomLeftCorner(cc.rows(), d + 1) = cc;
    for (Eigen::Index i = 0; i < cb.rows(); ++i) {
        sys(i, d + 1) = -qs.coeff(static_cast<int>(i));
    }
    for (Eigen::Index i = 0; i < cc.rows(); ++i) {
        sys(cb.rows() + i, d + 1) = ps.coeff(static_cast<int>(i));
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> gsvd(sys, Eigen::ComputeFullV);
    Eigen::VectorXd gv = gsvd.matrixV().col(d + 1).head(d + 1);
    Polynomial g(std::move(gv));
    if (g.is_zero() || g.degree() < d) {
        // Fall back to deconvolution of q by the cofactor b.
        Eigen::MatrixXd cb2 = convolution_matrix(b, d + 1);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cb2.rows());
        for (Eigen::Index i = 0; i < rhs.size(); ++i) {
            rhs(i) = qs.coeff(static_cast<int>(i));
        }
        Eigen::VectorXd sol = cb2.colPivHouseholderQr().solve(rhs);
        g = Polynomial(std::move(sol));
    }
    if (g.is_zero()) {
        return Polynomial::one();
    }
    return g.monic();
}

Polynomial poly_lcm(const Polynomial& p, const Polynomial& q, double tol) {
    if (p.is_zero() || q.is_zero()) {
        return Polynomial::zero();
    }
    const Polynomial g = poly_gcd(p, q, tol);
    return poly_divmod(p * q, g).first.monic();
}

RationalFunction::RationalFunction(Polynomial num, Polynomial den)
    : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) {
        throw std::domain_error("RationalFunction: zero denominator");
    }
    const double lead = den_.leading();
    den_ = den_ * (1.0 / lead);
    num_ = num_ * (1.0 / lead);
    if (num_.is_zero()) {
        den_ = Polynomial::one();
    }
}

namespace {

// Relative deviation between n1/d1 and n2/d2 at fixed off-axis sample points,
// skipping samples too close to a root of either denominator.
double rational_deviation(const Polynomial& n1, const Polynomial& d1, const Polynomial& n2,
                          const Polynomial& d2) {
    double worst = 0.0;
    const double scale1 = std::max(1.0, d1.max_abs_coeff());
    const double scale2 = std::max(1.0, d2.max_abs_coeff());
    for (int k = 0; k < 8; ++k) {
        const double theta = 2.0 * std::numbers::pi * (k + 0.2360679) / 8.0;
        const Complex s = 3.0 * Complex(std::cos(theta), std::sin(theta));
        const Complex e1 = d1(s), e2 = d2(s);
        if (std::abs(e1) < 1e-8 * scale1 || std::abs(e2) < 1e-8 * scale2) {
            continue;
        }
        const Complex v1 = n1(s) / e1, v2 = n2(s) / e2;
        worst = std::max(worst, std::abs(v1 - v2) / std::max(1.0, std::abs(v1)));
    }
    return worst;
}

} // namespace

RationalFunction RationalFunction::simplified(double tol) const {
    if (num_.is_zero()) {
        return RationalFunction{};
    }
    // Cancel at tol, but accept only value-preserving cancellations; retry
    // with a tighter threshold when the approximate gcd was too greedy.
    double t = tol;
    for (int attempt = 0; attempt < 3; ++attempt, t *= 1e-3) {
        const Polynomial g = poly_gcd(num_, den_, t);
        if (g.degree() < 1) {
            return *this;
        }
        Polynomial n = poly_divmod(num_, g).first;
        Polynomial d = poly_divmod(den_, g).first;
        if (d.is_zero()) {
            continue;
        }
        if (rational_deviation(num_, den_, n, d) < 1e-9) {
            return RationalFunction(std::move(n), std::move(d));
        }
    }
    return *this;
}

std::string RationalFunction::to_string(const std::string& var) const {
    std::ostringstream os;
    if (den_.is_constant()) {
        os << num_.to_string(var);
    } else {
        os << "(" << num_.to_string(var) << ")/(" << den_.to_string(var) << ")";
    }
    return os.str();
}

RationalFunction RationalFunction::operator-() const {
    RationalFunction out = *this;
    out.num_ = -out.num_;
    return out;
}

RationalFunction operator+(const RationalFunction& a, const RationalFunction& b) {
    return RationalFunction(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_).simplified();
}

RationalFunction operator-(const RationalFunction& a, const RationalFunction& b) {
    return a + (-b);
}

RationalFunction operator*(const RationalFunction& a, const RationalFunction& b) {
    return RationalFunction(a.num_ * b.num_, a.den_ * b.den_).simplified();
}

RationalFunction operator/(const RationalFunction& a, const RationalFunction& b) {
    if (b.is_zero()) {
        throw std::domain_error("RationalFunction: division by zero");
    }
    return RationalFunction(a.num_ * b.den_, a.den_ * b.num_).simplified();
}

RationalFunction operator*(const RationalFunction& a, double k) {
    return RationalFunction(a.num_ * k, a.den_);
}

RationalMatrix::RationalMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) {
        throw std::invalid_argument("RationalMatrix: negative dimension");
    }
    entries_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
                    RationalFunction{});
}

RationalMatrix::RationalMatrix(const Eigen::MatrixXd& constant)
    : RationalMatrix(static_cast<int>(constant.rows()), static_cast<int>(constant.cols())) {
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) {
            (*this)(i, j) = RationalFunction(constant(i, j));
        }
    }
}

RationalMatrix::RationalMatrix(RationalFunction scalar) : RationalMatrix(1, 1) {
    (*this)(0, 0) = std::move(scalar);
}

RationalMatrix RationalMatrix::identity(int n) {
    RationalMatrix m(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = RationalFunction(1.0);
    }
    return m;
}

RationalMatrix RationalMatrix::block_diagonal(const std::vector<RationalMatrix>& blocks) {
    int rows = 0, cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    RationalMatrix out(rows, cols);
    int r0 = 0, c0 = 0;
    for (const auto& b : blocks) {
        for (int i = 0; i < b.rows(); ++i) {
            for (int j = 0; j < b.cols(); ++j) {
                out(r0 + i, c0 + j) = b(i, j);
            }
        }
        r0 += b.rows();
        c0 += b.cols();
    }
    return out;
}

RationalFunction& RationalMatrix::operator()(int i, int j) {
    return entries_[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols_) +
                    static_cast<std::size_t>(j)];
}

const RationalFunction& RationalMatrix::operator()(int i, int j) const {
    return entries_[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols_) +
                    static_cast<std::size_t>(j)];
}

bool RationalMatrix::is_proper() const {
    for (const auto& f : entries_) {
        if (!f.is_proper()) {
            return false;
        }
    }
    return true;
}

RationalMatrix RationalMatrix::transpose() const {
    RationalMatrix out(cols_, rows_);
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) {
            out(j, i) = (*this)(i, j);
        }
    }
    return out;
}

RationalMatrix RationalMatrix::block(int row0, int col0, int nrows, int ncols) const {
    if (row0 < 0 || col0 < 0 || row0 + nrows > rows_ || col0 + ncols > cols_) {
        throw std::invalid_argument("RationalMatrix::block: out of range");
    }
    RationalMatrix out(nrows, ncols);
    for (int i = 0; i < nrows; ++i) {
        for (int j = 0; j < ncols; ++j) {
            out(i, j) = (*this)(row0 + i, col0 + j);
        }
    }
    return out;
}

Eigen::MatrixXcd RationalMatrix::eval(const Complex& s) const {
    Eigen::MatrixXcd m(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) {
            m(i, j) = (*this)(i, j)(s);
        }
    }
    return m;
}

std::vector<Complex> RationalMatrix::entry_poles() const {
    std::vector<Complex> out;
    for (const auto& f : entries_) {
        if (f.is_zero() || f.den().is_constant()) {
            continue;
        }
        for (const Complex& r : poly_roots(f.den())) {
            out.push_back(r);
        }
    }
    return out;
}

Polynomial RationalMatrix::common_denominator(double tol) const {
    Polynomial lcd = Polynomial::one();
    for (const auto& f : entries_) {
        if (f.is_zero()) {
            continue;
        }
        lcd = poly_lcm(lcd, f.den(), tol);
    }
    return lcd;
}

RationalMatrix operator+(const RationalMatrix& a, const RationalMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("RationalMatrix: dimension mismatch in +");
    }
    RationalMatrix out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            out(i, j) = a(i, j) + b(i, j);
        }
    }
    return out;
}

RationalMatrix operator-(const RationalMatrix& a, const RationalMatrix& b) {
    return a + (-1.0 * b);
}

RationalMatrix operator*(const RationalMatrix& a, const RationalMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("RationalMatrix: dimension mismatch in *");
    }
    RationalMatrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < b.cols(); ++j) {
            RationalFunction acc;
            for (int k = 0; k < a.cols(); ++k) {
                acc = acc + a(i, k) * b(k, j);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

RationalMatrix operator*(const RationalFunction& f, const RationalMatrix& a) {
    RationalMatrix out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            out(i, j) = f * a(i, j);
        }
    }
    return out;
}

RationalMatrix operator*(double k, const RationalMatrix& a) {
    return RationalFunction(k) * a;
}

RationalMatrix operator*(const Eigen::MatrixXd& a, const RationalMatrix& g) {
    return RationalMatrix(a) * g;
}

RationalMatrix operator*(const RationalMatrix& g, const Eigen::MatrixXd& a) {
    return g * RationalMatrix(a);
}

RationalMatrix kron(const Eigen::MatrixXd& a, const RationalMatrix& g) {
    RationalMatrix out(static_cast<int>(a.rows()) * g.rows(),
                       static_cast<int>(a.cols()) * g.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            if (a(i, j) == 0.0) {
                continue;
            }
            for (int k = 0; k < g.rows(); ++k) {
                for (int l = 0; l < g.cols(); ++l) {
                    out(i * g.rows() + k, j * g.cols() + l) = a(i, j) * g(k, l);
                }
            }
        }
    }
    return out;
}

int rm_normal_rank(const RationalMatrix& g, double tol, int samples) {
    if (g.rows() == 0 || g.cols() == 0) {
        return 0;
    }
    double radius = 2.0;
    for (const Complex& p : g.entry_poles()) {
        radius = std::max(radius, 2.0 + std::abs(p));
    }
    int best = 0;
    for (int k = 0; k < samples; ++k) {
        // Irrational angle step keeps samples off axes and conjugate pairs.
        const double theta = 2.0 * std::numbers::pi * (k + 0.31830988618) / samples;
        const Complex s = radius * Complex(std::cos(theta), std::sin(theta));
        const Eigen::MatrixXcd m = g.eval(s);
        best = std::max(best, numerical_rank<Complex>(m, tol));
    }
    return best;
}

bool rm_equal_sampled(const RationalMatrix& a, const RationalMatrix& b, double rel_tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return false;
    }
    double radius = 2.0;
    for (const Complex& p : a.entry_poles()) {
        radius = std::max(radius, 2.0 + std::abs(p));
    }
    for (const Complex& p : b.entry_poles()) {
        radius = std::max(radius, 2.0 + std::abs(p));
    }
    for (int k = 0; k < 20; ++k) {
        const double theta = 2.0 * std::numbers::pi * (k + 0.61803398875) / 20.0;
        const Complex s = radius * Complex(std::cos(theta), std::sin(theta));
        const Eigen::MatrixXcd ma = a.eval(s);
        const Eigen::MatrixXcd mb = b.eval(s);
        const double scale = std::max({1.0, ma.norm(), mb.norm()});
        if ((ma - mb).norm() > rel_tol * scale) {
            return false;
        }
    }
    return true;
}

} // namespace diffstab
