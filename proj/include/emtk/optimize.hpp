// Small dense quasi-Newton optimizer used by numeric M-steps.
// BFGS with central finite-difference gradients and Armijo backtracking;
// box constraints are handled through a smooth logit reparameterization.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace emtk {

using Objective = std::function<double(std::span<const double>)>;

struct OptimOptions {
    int max_iter = 300;
    double grad_tol = 1e-8;   // stop when max |g_i| < grad_tol * (1 + |f|)
    double fd_step = 1e-6;
    double step_shrink = 0.5;
    double armijo = 1e-4;
    // Per-iteration cap on max |d_i|. Without it a single long step can land
    // on the flat tail of a logit-transformed objective, where the vanishing
    // gradient looks like convergence.
    double max_step = 2.0;
};

struct OptimResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline std::vector<double> fd_gradient(const Objective& f, std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double hi = h * (1.0 + std::abs(xi));
        x[i] = xi + hi;
        const double fp = f(x);
        x[i] = xi - hi;
        const double fm = f(x);
        x[i] = xi;
        g[i] = (fp - fm) / (2.0 * hi);
    }
    return g;
}

}  // namespace detail

// Minimize f starting from x0. Always returns the best point seen, so the
// result is never worse than the start even on ill-conditioned objectives.
inline OptimResult minimize_bfgs(const Objective& f, std::vector<double> x0,
                                 const OptimOptions& opt = {}) {
    const std::size_t n = x0.size();
    OptimResult best;
    best.x = x0;
    best.f = f(x0);
    if (!std::isfinite(best.f)) throw std::runtime_error("minimize_bfgs: objective not finite at start");
    if (n == 0) {
        best.converged = true;
        return best;
    }

    std::vector<double> x = x0;
    double fx = best.f;
    std::vector<double> g = detail::fd_gradient(f, x, opt.fd_step);

    // inverse Hessian approximation, start at identity
    std::vector<double> hinv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) hinv[i * n + i] = 1.0;

    for (int iter = 0; iter < opt.max_iter; ++iter) {
        best.iterations = iter;
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax < opt.grad_tol * (1.0 + std::abs(fx))) {
            best.converged = true;
            break;
        }

        // direction d = -Hinv g
        std::vector<double> d(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i] -= hinv[i * n + j] * g[j];

        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) slope += g[i] * d[i];
        if (slope >= 0.0) {  // not a descent direction: reset to steepest descent
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) hinv[i * n + j] = (i == j) ? 1.0 : 0.0;
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            slope = 0.0;
            for (std::size_t i = 0; i < n; ++i) slope += g[i] * d[i];
            if (slope == 0.0) {
                best.converged = true;
                break;
            }
        }

        double dmax = 0.0;
        for (double v : d) dmax = std::max(dmax, std::abs(v));
        if (dmax > opt.max_step) {
            const double scale = opt.max_step / dmax;
            for (double& v : d) v *= scale;
            slope *= scale;
        }

        // backtracking line search
        double step = 1.0;
        std::vector<double> xn(n);
        double fn = fx;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
            fn = f(xn);
            if (std::isfinite(fn) && fn <= fx + opt.armijo * step * slope) {
                accepted = true;
                break;
            }
            step *= opt.step_shrink;
        }
        if (!accepted) break;  // step collapsed; best point already recorded

        std::vector<double> gn = detail::fd_gradient(f, xn, opt.fd_step);

        // BFGS inverse update with s = xn - x, y = gn - g
        std::vector<double> s(n), y(n);
        double sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
            sy += s[i] * y[i];
        }
        if (sy > 1e-14) {
            const double rho = 1.0 / sy;
            // Hinv = (I - rho s y^T) Hinv (I - rho y s^T) + rho s s^T
            std::vector<double> hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) hy[i] += hinv[i * n + j] * y[j];
            double yhy = 0.0;
            for (std::size_t i = 0; i < n; ++i) yhy += y[i] * hy[i];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    hinv[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) +
                                       rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j];
                }
        }

        x = xn;
        fx = fn;
        g = gn;
        if (fx < best.f) {
            best.f = fx;
            best.x = x;
        }
    }
    if (fx < best.f) {
        best.f = fx;
        best.x = x;
    }
    return best;
}

// Smooth bijection between a box [lo, hi] and the real line. Numeric
// M-steps optimize in the unconstrained space and map back.
class BoxTransform {
  public:
    BoxTransform(std::vector<double> lo, std::vector<double> hi)
        : lo_(std::move(lo)), hi_(std::move(hi)) {
        if (lo_.size() != hi_.size()) throw std::invalid_argument("BoxTransform: bound size mismatch");
    }

    std::size_t size() const { return lo_.size(); }

    // box -> unconstrained (logit); clamps just inside the box first
    std::vector<double> to_unconstrained(std::span<const double> v) const {
        std::vector<double> x(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double w = hi_[i] - lo_[i];
            double u = (v[i] - lo_[i]) / w;
            u = std::min(1.0 - 1e-12, std::max(1e-12, u));
            x[i] = std::log(u / (1.0 - u));
        }
        return x;
    }

    std::vector<double> to_box(std::span<const double> x) const {
        std::vector<double> v(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-x[i]));
            v[i] = lo_[i] + (hi_[i] - lo_[i]) * sig;
        }
        return v;
    }

    const std::vector<double>& lower() const { return lo_; }
    const std::vector<double>& upper() const { return hi_; }

  private:
    std::vector<double> lo_;
    std::vector<double> hi_;
};

// Maximize f over the box: never returns a point worse than start.
inline std::vector<double> maximize_in_box(const Objective& f, std::span<const double> start,
                                           const BoxTransform& box, const OptimOptions& opt = {}) {
    const Objective neg = [&](std::span<const double> x) { return -f(box.to_box(x)); };
    OptimResult r = minimize_bfgs(neg, box.to_unconstrained(start), opt);
    std::vector<double> cand = box.to_box(r.x);
    // guard against transform round-off: keep the better of {start, cand}
    std::vector<double> s(start.begin(), start.end());
    return (f(cand) >= f(s)) ? cand : s;
}

}  // namespace emtk
