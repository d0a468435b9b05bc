// Gaussian finite-mixture clustering with covariance-family constraints,
// BIC model selection, and the rejection-controlled E-step variant that
// sparsifies small responsibilities without biasing the weighted sums.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emtk/em.hpp"
#include "emtk/numerics.hpp"
#include "emtk/rng.hpp"

namespace emtk {

enum class CovarianceFamily {
    spherical,   // lambda_k * I
    diagonal,    // per-dimension variances
    full,        // unconstrained SPD per component
    shared_full  // one unconstrained SPD matrix for all components
};

inline const char* family_name(CovarianceFamily family) {
    switch (family) {
        case CovarianceFamily::spherical: return "spherical";
        case CovarianceFamily::diagonal: return "diagonal";
        case CovarianceFamily::full: return "full";
        case CovarianceFamily::shared_full: return "shared-full";
    }
    return "?";
}

inline std::optional<CovarianceFamily> family_from_name(const std::string& name) {
    if (name == "spherical") return CovarianceFamily::spherical;
    if (name == "diagonal") return CovarianceFamily::diagonal;
    if (name == "full") return CovarianceFamily::full;
    if (name == "shared-full") return CovarianceFamily::shared_full;
    return std::nullopt;
}

struct MixtureModel {
    CovarianceFamily family = CovarianceFamily::full;
    std::vector<double> tau;                 // K mixing weights
    std::vector<std::vector<double>> mean;   // K x p
    std::vector<Matrix> sigma;               // K covariance matrices (p x p)

    std::size_t components() const { return tau.size(); }
    std::size_t dimension() const { return mean.empty() ? 0 : mean.front().size(); }

    void validate() const {
        const std::size_t k = components();
        const std::size_t p = dimension();
        if (k == 0) throw std::invalid_argument("MixtureModel: no components");
        if (p == 0) throw std::invalid_argument("MixtureModel: zero dimension");
        if (mean.size() != k || sigma.size() != k)
            throw std::invalid_argument("MixtureModel: component count mismatch");
        double total = 0.0;
        for (double t : tau) {
            if (!(t >= 0.0)) throw std::invalid_argument("MixtureModel: negative weight");
            total += t;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("MixtureModel: weights do not sum to 1");
        for (std::size_t j = 0; j < k; ++j) {
            if (mean[j].size() != p)
                throw std::invalid_argument("MixtureModel: mean dimension mismatch");
            if (sigma[j].rows() != p || sigma[j].cols() != p)
                throw std::invalid_argument("MixtureModel: covariance shape mismatch");
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = a + 1; b < p; ++b)
                    if (std::abs(sigma[j](a, b) - sigma[j](b, a)) > 1e-9)
                        throw std::invalid_argument("MixtureModel: covariance not symmetric");
        }
    }
};

using Responsibilities = Matrix;  // n x K, each row a posterior over components

struct RcemConfig {
    double threshold = 0.05;  // c: weights below it are kept at c or dropped
    std::uint64_t seed = 0;

    void validate() const {
        if (!(threshold > 0.0 && threshold < 1.0))
            throw std::invalid_argument("RcemConfig: threshold must lie in (0, 1)");
    }
};

namespace detail {

inline std::vector<Matrix> component_cholesky(const MixtureModel& model) {
    std::vector<Matrix> chol(model.components());
    for (std::size_t k = 0; k < model.components(); ++k)
        if (!cholesky(model.sigma[k], chol[k])) {
            std::ostringstream msg;
            msg << "component " << (k + 1) << " has a singular covariance";
            throw std::invalid_argument(msg.str());
        }
    return chol;
}

}  // namespace detail

struct MixtureEStep {
    Responsibilities resp;
    std::vector<double> point_loglik;  // log mixture density per row
    double loglik = 0.0;
};

// Posterior component memberships and the observed-data log-likelihood,
// evaluated in log space.
inline MixtureEStep e_step(const Matrix& data, const MixtureModel& model) {
    model.validate();
    const std::size_t n = data.rows();
    const std::size_t p = data.cols();
    const std::size_t k = model.components();
    if (n == 0) throw std::invalid_argument("e_step: no data rows");
    if (p != model.dimension()) throw std::invalid_argument("e_step: dimension mismatch");
    const std::vector<Matrix> chol = detail::component_cholesky(model);

    MixtureEStep out;
    out.resp = Matrix(n, k);
    out.point_loglik.resize(n);
    std::vector<double> lw(k);
    KahanSum total;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j)
            lw[j] = model.tau[j] > 0.0
                        ? std::log(model.tau[j]) +
                              gaussian_log_density(data.row(i), model.mean[j], chol[j])
                        : neg_inf;
        const double lse = log_sum_exp(lw);
        if (!std::isfinite(lse)) {
            std::ostringstream msg;
            msg << "e_step: data row " << (i + 1) << " has zero density under every component";
            throw std::runtime_error(msg.str());
        }
        for (std::size_t j = 0; j < k; ++j) out.resp(i, j) = std::exp(lw[j] - lse);
        out.point_loglik[i] = lse;
        total.add(lse);
    }
    out.loglik = total.value();
    return out;
}

class EmptyClusterError : public std::runtime_error {
  public:
    EmptyClusterError(std::vector<std::size_t> components, const std::string& what)
        : std::runtime_error(what), components_(std::move(components)) {}
    const std::vector<std::size_t>& components() const { return components_; }

  private:
    std::vector<std::size_t> components_;
};

namespace detail {

inline double mean_data_variance(const Matrix& data) {
    const std::size_t n = data.rows();
    const std::size_t p = data.cols();
    double acc = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += data(i, j);
        m /= double(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (data(i, j) - m) * (data(i, j) - m);
        acc += v / double(n);
    }
    return acc / double(p);
}

struct WeightedUpdate {
    MixtureModel model;
    std::vector<double> weight;       // total responsibility per component
    std::vector<std::size_t> empty;   // components with weight below 1e-8
};

// Weighted MLE of (tau, mean, covariance) with the covariance projected onto
// the requested family and a diagonal ridge added. Accepts unnormalized row
// weights so the rejection-controlled variant can reuse it.
inline WeightedUpdate weighted_mle(const Matrix& data, const Matrix& resp,
                                   CovarianceFamily family, double ridge) {
    const std::size_t n = data.rows();
    const std::size_t p = data.cols();
    const std::size_t k = resp.cols();
    if (resp.rows() != n) throw std::invalid_argument("m_step: responsibility rows mismatch");
    if (k == 0) throw std::invalid_argument("m_step: no components");

    WeightedUpdate out;
    out.model.family = family;
    out.model.tau.assign(k, 0.0);
    out.model.mean.assign(k, std::vector<double>(p, 0.0));
    out.model.sigma.assign(k, Matrix(p, p));
    out.weight.assign(k, 0.0);

    for (std::size_t j = 0; j < k; ++j) {
        KahanSum w;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = resp(i, j);
            if (!(r >= 0.0)) throw std::invalid_argument("m_step: negative responsibility");
            w.add(r);
        }
        out.weight[j] = w.value();
        if (out.weight[j] < 1e-8) out.empty.push_back(j);
    }

    double grand_total = 0.0;
    for (double w : out.weight) grand_total += w;
    if (!(grand_total > 0.0)) throw std::invalid_argument("m_step: all responsibilities zero");
    for (std::size_t j = 0; j < k; ++j) out.model.tau[j] = out.weight[j] / grand_total;

    // data-wide fallbacks for starved components; the caller re-seeds them
    std::vector<double> global_mean(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < p; ++d) global_mean[d] += data(i, d);
    for (double& g : global_mean) g /= double(n);

    for (std::size_t j = 0; j < k; ++j) {
        if (out.weight[j] < 1e-8) {
            out.model.mean[j] = global_mean;
            continue;
        }
        std::vector<KahanSum> acc(p);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = resp(i, j);
            if (r == 0.0) continue;
            for (std::size_t d = 0; d < p; ++d) acc[d].add(r * data(i, d));
        }
        for (std::size_t d = 0; d < p; ++d) out.model.mean[j][d] = acc[d].value() / out.weight[j];
    }

    Matrix pooled(p, p);
    for (std::size_t j = 0; j < k; ++j) {
        Matrix scatter(p, p);
        if (out.weight[j] >= 1e-8) {
            std::vector<double> diff(p);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp(i, j);
                if (r == 0.0) continue;
                for (std::size_t d = 0; d < p; ++d) diff[d] = data(i, d) - out.model.mean[j][d];
                for (std::size_t a = 0; a < p; ++a)
                    for (std::size_t b = a; b < p; ++b) scatter(a, b) += r * diff[a] * diff[b];
            }
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = a; b < p; ++b) {
                    scatter(b, a) = scatter(a, b);
                    pooled(a, b) += scatter(a, b);
                    pooled(b, a) = pooled(a, b);
                }
            for (auto& v : scatter.data()) v /= out.weight[j];
        }
        out.model.sigma[j] = scatter;
    }
    for (auto& v : pooled.data()) v /= grand_total;

    for (std::size_t j = 0; j < k; ++j) {
        Matrix& s = out.model.sigma[j];
        switch (family) {
            case CovarianceFamily::spherical: {
                double tr = 0.0;
                for (std::size_t d = 0; d < p; ++d) tr += s(d, d);
                s = Matrix(p, p);
                for (std::size_t d = 0; d < p; ++d) s(d, d) = tr / double(p);
                break;
            }
            case CovarianceFamily::diagonal: {
                Matrix diag(p, p);
                for (std::size_t d = 0; d < p; ++d) diag(d, d) = s(d, d);
                s = diag;
                break;
            }
            case CovarianceFamily::full:
                break;
            case CovarianceFamily::shared_full:
                s = pooled;
                break;
        }
        for (std::size_t d = 0; d < p; ++d) s(d, d) += ridge;
    }
    return out;
}

}  // namespace detail

// Family-constrained weighted MLE; the ridge is 1e-6 of the mean per-axis
// data variance. Starved components are reported as an error here; the EM
// driver path re-seeds them instead.
inline MixtureModel m_step(const Matrix& data, const Responsibilities& resp,
                           CovarianceFamily family) {
    double ridge = 1e-6 * detail::mean_data_variance(data);
    if (!(ridge > 0.0)) ridge = 1e-10;
    auto update = detail::weighted_mle(data, resp, family, ridge);
    if (!update.empty.empty()) {
        std::ostringstream msg;
        msg << "component " << (update.empty.front() + 1)
            << " has vanishing total responsibility";
        throw EmptyClusterError(std::move(update.empty), msg.str());
    }
    return std::move(update.model);
}

// Rejection control: keep weights at or above the threshold as they are;
// smaller weights are promoted to the threshold with probability weight/c and
// dropped otherwise. Entry-wise unbiased, rows deliberately not renormalized.
// Randomness is a counter-based stream per (row, column, counter) so repeated
// and parallel evaluation stay reproducible.
inline Responsibilities rcem_reweight(const Responsibilities& resp, const RcemConfig& config,
                                      std::uint64_t counter = 0) {
    config.validate();
    const double c = config.threshold;
    const std::uint64_t round = derive_seed(config.seed, counter);
    Responsibilities out(resp.rows(), resp.cols());
    for (std::size_t i = 0; i < resp.rows(); ++i)
        for (std::size_t j = 0; j < resp.cols(); ++j) {
            const double g = resp(i, j);
            if (!(g >= 0.0)) throw std::invalid_argument("rcem_reweight: negative weight");
            if (g >= c) {
                out(i, j) = g;
                continue;
            }
            Rng stream(derive_seed(round, i * resp.cols() + j));
            out(i, j) = stream.uniform() < g / c ? c : 0.0;
        }
    return out;
}

// EM state: the model plus an E-step counter that advances the
// rejection-control randomness between iterations.
struct MixtureState {
    MixtureModel model;
    std::uint64_t step = 0;
};

class MixtureProblem {
  public:
    using Params = MixtureState;

    struct Stats {
        Responsibilities resp;             // weights fed to the M-step
        std::vector<double> point_loglik;  // densities under the current model
    };

    MixtureProblem(Matrix data, std::size_t components, CovarianceFamily family)
        : data_(std::move(data)), k_(components), family_(family) {
        if (data_.rows() == 0 || data_.cols() == 0)
            throw std::invalid_argument("mixture fit: empty data matrix");
        if (k_ == 0) throw std::invalid_argument("mixture fit: need at least one component");
        if (data_.rows() <= k_) {
            std::ostringstream msg;
            msg << "mixture fit: " << data_.rows() << " rows cannot support " << k_
                << " components";
            throw std::invalid_argument(msg.str());
        }
        ridge_ = 1e-6 * detail::mean_data_variance(data_);
        if (!(ridge_ > 0.0)) ridge_ = 1e-10;
    }

    const Matrix& data() const { return data_; }
    std::size_t components() const { return k_; }
    CovarianceFamily family() const { return family_; }

    // Dirichlet-random responsibilities followed by one M-step.
    Params random_init(std::uint64_t seed) const {
        Rng rng(seed);
        Responsibilities resp(data_.rows(), k_);
        for (std::size_t i = 0; i < data_.rows(); ++i) {
            const std::vector<double> row = rng.dirichlet_flat(k_);
            for (std::size_t j = 0; j < k_; ++j) resp(i, j) = row[j];
        }
        Params out;
        out.model = detail::weighted_mle(data_, resp, family_, ridge_).model;
        out.step = 0;
        return out;
    }

    EStepResult<Stats> expect(const Params& params) const {
        MixtureEStep es = e_step(data_, params.model);
        EStepResult<Stats> out;
        out.stats.resp = std::move(es.resp);
        out.stats.point_loglik = std::move(es.point_loglik);
        out.loglik = es.loglik;
        return out;
    }

    Params maximize(const Stats& stats, const Params& current) const {
        auto update = detail::weighted_mle(data_, stats.resp, family_, ridge_);
        if (!update.empty.empty()) rescue_empty(update, stats);
        Params next;
        next.model = std::move(update.model);
        next.step = current.step + 1;
        return next;
    }

    double log_likelihood(const Params& params) const {
        return e_step(data_, params.model).loglik;
    }

  protected:
    // Re-seed each starved component at the currently worst-explained data
    // point, give it covariance from the pooled data, and renormalize tau.
    void rescue_empty(detail::WeightedUpdate& update, const Stats& stats) const {
        const std::size_t n = data_.rows();
        const std::size_t p = data_.cols();
        Matrix ones(n, 1, 1.0);
        const Matrix global_cov =
            detail::weighted_mle(data_, ones, CovarianceFamily::full, ridge_).model.sigma[0];

        std::vector<bool> used(n, false);
        for (std::size_t j : update.empty) {
            std::size_t worst = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (used[i]) continue;
                if (worst == n || stats.point_loglik[i] < stats.point_loglik[worst]) worst = i;
            }
            if (worst == n) break;  // more empty components than points
            used[worst] = true;
            for (std::size_t d = 0; d < p; ++d) update.model.mean[j][d] = data_(worst, d);
            Matrix s = global_cov;
            if (family_ == CovarianceFamily::spherical) {
                double tr = 0.0;
                for (std::size_t d = 0; d < p; ++d) tr += s(d, d);
                s = Matrix(p, p);
                for (std::size_t d = 0; d < p; ++d) s(d, d) = tr / double(p);
            } else if (family_ == CovarianceFamily::diagonal) {
                Matrix diag(p, p);
                for (std::size_t d = 0; d < p; ++d) diag(d, d) = s(d, d);
                s = diag;
            }
            update.model.sigma[j] = s;
            update.model.tau[j] = 1.0 / double(n);
        }
        double total = 0.0;
        for (double t : update.model.tau) total += t;
        for (double& t : update.model.tau) t /= total;
    }

    Matrix data_;
    std::size_t k_;
    CovarianceFamily family_;
    double ridge_ = 1e-10;
};

// Same problem with the randomized E-step: responsibilities pass through
// rejection control before the M-step. Convergence is still judged on the
// exact log-likelihood, so the trace is meaningful even though individual
// iterations are stochastic.
class RcemMixtureProblem : public MixtureProblem {
  public:
    static constexpr bool stochastic_e_step = true;

    RcemMixtureProblem(Matrix data, std::size_t components, CovarianceFamily family,
                       RcemConfig rcem)
        : MixtureProblem(std::move(data), components, family), rcem_(rcem) {
        rcem_.validate();
    }

    EStepResult<Stats> expect(const Params& params) const {
        EStepResult<Stats> out = MixtureProblem::expect(params);
        out.stats.resp = rcem_reweight(out.stats.resp, rcem_, params.step);
        return out;
    }

  private:
    RcemConfig rcem_;
};

struct MixtureFitResult {
    MixtureModel model;
    Responsibilities responsibilities;  // exact posteriors at the fitted model
    double loglik = 0.0;
    EmTrace trace;
    std::size_t best_restart = 0;
};

inline MixtureFitResult fit_mixture(const Matrix& data, std::size_t components,
                                    CovarianceFamily family, const EmConfig& config = {},
                                    std::optional<RcemConfig> rcem = std::nullopt) {
    MixtureFitResult out;
    MixtureState best;
    std::size_t best_restart = 0;
    EmTrace trace;
    if (rcem) {
        RcemMixtureProblem problem(data, components, family, *rcem);
        auto ms = multi_start(problem, config);
        best = std::move(ms.best);
        best_restart = ms.best_restart;
        trace = std::move(ms.traces[ms.best_restart]);
    } else {
        MixtureProblem problem(data, components, family);
        auto ms = multi_start(problem, config);
        best = std::move(ms.best);
        best_restart = ms.best_restart;
        trace = std::move(ms.traces[ms.best_restart]);
    }
    MixtureEStep es = e_step(data, best.model);
    out.model = std::move(best.model);
    out.responsibilities = std::move(es.resp);
    out.loglik = es.loglik;
    out.trace = std::move(trace);
    out.best_restart = best_restart;
    return out;
}

// Free-parameter count: K-1 mixing weights, K*p means, and the
// family-dependent covariance parameters.
inline std::size_t free_parameters(CovarianceFamily family, std::size_t components,
                                   std::size_t dimension) {
    const std::size_t k = components, p = dimension;
    std::size_t cov = 0;
    switch (family) {
        case CovarianceFamily::spherical: cov = k; break;
        case CovarianceFamily::diagonal: cov = k * p; break;
        case CovarianceFamily::full: cov = k * p * (p + 1) / 2; break;
        case CovarianceFamily::shared_full: cov = p * (p + 1) / 2; break;
    }
    return (k - 1) + k * p + cov;
}

inline double bic(const MixtureModel& model, const Matrix& data) {
    const double ll = e_step(data, model).loglik;
    const double p_free =
        double(free_parameters(model.family, model.components(), model.dimension()));
    return -2.0 * ll + p_free * std::log(double(data.rows()));
}

struct SelectKResult {
    MixtureFitResult fit;
    std::size_t k = 0;
    double bic_value = 0.0;
    std::vector<std::pair<std::size_t, double>> bic_table;  // (K, BIC) per candidate
};

// Fit every candidate K and keep the lowest BIC; ties go to the smaller K.
inline SelectKResult select_k(const Matrix& data, const std::vector<std::size_t>& k_range,
                              CovarianceFamily family, const EmConfig& config = {}) {
    if (k_range.empty()) throw std::invalid_argument("select_k: empty candidate range");
    SelectKResult out;
    bool have = false;
    for (std::size_t k : k_range) {
        MixtureFitResult fit = fit_mixture(data, k, family, config);
        const double score = bic(fit.model, data);
        out.bic_table.emplace_back(k, score);
        if (!have || score < out.bic_value || (score == out.bic_value && k < out.k)) {
            have = true;
            out.fit = std::move(fit);
            out.k = k;
            out.bic_value = score;
        }
    }
    return out;
}

}  // namespace emtk
