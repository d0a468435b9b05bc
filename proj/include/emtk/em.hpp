// Generic EM driver shared by every solver in the toolkit: iterate
// E-step/M-step to convergence, watch monotonicity, and manage seeded
// multi-start. A solver plugs in by modeling the EmProblemType concept.
#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtk/rng.hpp"

namespace emtk {

struct EmConfig {
    double tol = 1e-6;       // relative log-likelihood change threshold
    int max_iter = 1000;
    int restarts = 1;
    std::uint64_t seed = 0;

    EmConfig() = default;
    EmConfig(double tol_, int max_iter_, int restarts_, std::uint64_t seed_)
        : tol(tol_), max_iter(max_iter_), restarts(restarts_), seed(seed_) {
        validate();
    }

    void validate() const {
        if (!(tol > 0.0)) throw std::invalid_argument("EmConfig: tol must be > 0");
        if (max_iter < 1) throw std::invalid_argument("EmConfig: max_iter must be >= 1");
        if (restarts < 1) throw std::invalid_argument("EmConfig: restarts must be >= 1");
    }
};

struct EmTrace {
    std::vector<double> loglik_per_iter;  // entry 0 is the initial point
    int iterations = 0;                   // number of M-step updates applied
    bool converged = false;
};

template <class Stats>
struct EStepResult {
    Stats stats;
    double loglik = 0.0;
};

// Capability bundle every solver supplies. maximize() receives the current
// parameters as well, so numeric M-steps can warm-start from them.
template <class P>
concept EmProblemType = requires(const P& p, const typename P::Params& theta,
                                 const typename P::Stats& stats, std::uint64_t seed) {
    { p.random_init(seed) } -> std::same_as<typename P::Params>;
    { p.expect(theta) } -> std::same_as<EStepResult<typename P::Stats>>;
    { p.maximize(stats, theta) } -> std::same_as<typename P::Params>;
    { p.log_likelihood(theta) } -> std::convertible_to<double>;
};

// Problems with an intentionally randomized E-step (RCEM) declare
//   static constexpr bool stochastic_e_step = true;
// which downgrades the monotonicity check from warning-worthy to expected.
template <class P>
constexpr bool has_stochastic_e_step() {
    if constexpr (requires { P::stochastic_e_step; })
        return P::stochastic_e_step;
    else
        return false;
}

inline constexpr double monotonicity_slack = 1e-9;

template <class Params>
struct EmResult {
    Params params;
    EmTrace trace;
};

inline bool em_converged_step(double prev, double cur, double tol) {
    return std::abs(cur - prev) / (std::abs(cur) + 1.0) < tol;
}

template <class P>
    requires EmProblemType<P>
EmResult<typename P::Params> run_em(const P& problem, typename P::Params init,
                                    const EmConfig& config) {
    config.validate();
    EmResult<typename P::Params> out{std::move(init), {}};
    auto es = problem.expect(out.params);
    if (!std::isfinite(es.loglik))
        throw std::runtime_error("EM iteration 0: log-likelihood is not finite");
    out.trace.loglik_per_iter.push_back(es.loglik);

    for (int iter = 1; iter <= config.max_iter; ++iter) {
        out.params = problem.maximize(es.stats, out.params);
        es = problem.expect(out.params);
        if (!std::isfinite(es.loglik)) {
            std::ostringstream msg;
            msg << "EM iteration " << iter << ": log-likelihood is not finite";
            throw std::runtime_error(msg.str());
        }
        const double prev = out.trace.loglik_per_iter.back();
        out.trace.loglik_per_iter.push_back(es.loglik);
        out.trace.iterations = iter;
        if (!has_stochastic_e_step<P>() && es.loglik < prev - monotonicity_slack) {
            std::cerr << "emtk: warning: EM iteration " << iter << " decreased log-likelihood by "
                      << (prev - es.loglik) << "\n";
        }
        if (em_converged_step(prev, es.loglik, config.tol)) {
            out.trace.converged = true;
            break;
        }
    }
    return out;
}

template <class Params>
struct MultiStartResult {
    Params best;
    std::size_t best_restart = 0;
    std::vector<EmTrace> traces;  // one per restart; empty trace = failed restart
};

// Run `config.restarts` independent EM runs and keep the best final
// log-likelihood. Restart r draws its parameters from the stream
// derive_seed(config.seed, r); if the problem supplies initial_guess(),
// restart 0 starts there instead. Ties go to the smaller restart index.
template <class P>
    requires EmProblemType<P>
MultiStartResult<typename P::Params> multi_start(const P& problem, const EmConfig& config) {
    config.validate();
    MultiStartResult<typename P::Params> out{typename P::Params{}, 0, {}};
    out.traces.resize(static_cast<std::size_t>(config.restarts));
    bool have_best = false;
    double best_ll = 0.0;
    std::vector<std::string> failures;

    for (int r = 0; r < config.restarts; ++r) {
        typename P::Params init;
        if constexpr (requires(const P& p) {
                          { p.initial_guess() } -> std::same_as<typename P::Params>;
                      }) {
            init = (r == 0) ? problem.initial_guess()
                            : problem.random_init(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
        } else {
            init = problem.random_init(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
        }
        try {
            auto res = run_em(problem, std::move(init), config);
            const double ll = res.trace.loglik_per_iter.back();
            out.traces[static_cast<std::size_t>(r)] = res.trace;
            if (!have_best || ll > best_ll) {
                have_best = true;
                best_ll = ll;
                out.best = std::move(res.params);
                out.best_restart = static_cast<std::size_t>(r);
            }
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "restart " << r << ": " << e.what();
            failures.push_back(msg.str());
        }
    }
    if (!have_best) {
        std::ostringstream msg;
        msg << "all " << config.restarts << " EM restarts failed:";
        for (const auto& f : failures) msg << "\n  " << f;
        throw std::runtime_error(msg.str());
    }
    return out;
}

}  // namespace emtk
