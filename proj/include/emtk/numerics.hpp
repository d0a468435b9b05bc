// Shared numerical utilities: log-sum-exp, compensated summation, and a
// small dense matrix with just enough linear algebra for Gaussian densities.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace emtk {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow; handles -inf operands
inline double log_add(double a, double b) {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// log of sum of exponentials over a range, max-shifted
inline double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) return neg_inf;
    const double m = *std::max_element(xs.begin(), xs.end());
    if (m == neg_inf) return neg_inf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

// Kahan compensated accumulator; keeps count reductions order-robust
class KahanSum {
  public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Row-major dense matrix of doubles. Deliberately minimal: the toolkit
// needs p x p covariance work for small p and an n x p data holder.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(data_.data() + i * cols_, cols_);
    }
    std::span<double> row(std::size_t i) {
        return std::span<double>(data_.data() + i * cols_, cols_);
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Cholesky factorization A = L L^T for symmetric positive definite A.
// Returns false if a pivot drops below `floor` (not positive definite).
inline bool cholesky(const Matrix& a, Matrix& lower, double floor = 0.0) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("cholesky: matrix not square");
    lower = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
        if (!(d > floor)) return false;
        lower(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / lower(j, j);
        }
    }
    return true;
}

// Solve L y = b in place given lower-triangular L
inline void forward_substitute(const Matrix& lower, std::span<double> b) {
    const std::size_t n = lower.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * b[k];
        b[i] = s / lower(i, i);
    }
}

inline double log_det_from_cholesky(const Matrix& lower) {
    double s = 0.0;
    for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
    return 2.0 * s;
}

// Multivariate normal log-density given the Cholesky factor of Sigma
inline double gaussian_log_density(std::span<const double> x, std::span<const double> mean,
                                   const Matrix& chol_lower) {
    const std::size_t p = x.size();
    static const double log_two_pi = std::log(2.0 * 3.14159265358979323846);
    std::vector<double> diff(p);
    for (std::size_t j = 0; j < p; ++j) diff[j] = x[j] - mean[j];
    forward_substitute(chol_lower, diff);
    double quad = 0.0;
    for (double v : diff) quad += v * v;
    return -0.5 * (static_cast<double>(p) * log_two_pi + log_det_from_cholesky(chol_lower) + quad);
}

inline bool almost_equal(double a, double b, double rel_tol, double abs_tol = 0.0) {
    return std::abs(a - b) <= std::max(abs_tol, rel_tol * std::max(std::abs(a), std::abs(b)));
}

}  // namespace emtk
