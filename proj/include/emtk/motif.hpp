// Fixed-width ungapped motif discovery by EM. Two occurrence models:
// OOPS (exactly one site per sequence, uniform over placements) and a
// ZOOPS-style mode that treats every length-w window as an independent
// draw from a two-component mixture with site prior p0.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtk/alphabet.hpp"
#include "emtk/em.hpp"
#include "emtk/numerics.hpp"
#include "emtk/rng.hpp"
#include "emtk/seqio.hpp"

namespace emtk {

// Background multinomial theta0 plus one multinomial per motif position.
struct MotifModel {
    std::vector<double> theta0;               // d entries
    std::vector<std::vector<double>> theta;   // width x d

    std::size_t width() const { return theta.size(); }
    std::size_t alphabet_size() const { return theta0.size(); }
};

// Expected residue counts from an E-step: per motif position and for the
// background.
struct MotifCounts {
    std::vector<std::vector<double>> motif;   // width x d
    std::vector<double> background;           // d
};

// posterior[k][l]: probability that a site starts at position l (0-based)
// of sequence k. Sums to 1 per sequence in OOPS mode; per-window mixture
// membership in ZOOPS mode.
using SitePosterior = std::vector<std::vector<double>>;

enum class MotifMode { oops, zoops };

struct MotifConfig {
    std::size_t width = 8;
    MotifMode mode = MotifMode::oops;
    double alpha = 0.5;   // pseudocount added in every M-step
    double p0 = 0.05;     // initial site prior (zoops only)

    void validate() const {
        if (width < 1) throw std::invalid_argument("MotifConfig: width must be >= 1");
        if (!(alpha > 0.0)) throw std::invalid_argument("MotifConfig: alpha must be > 0");
        if (mode == MotifMode::zoops && !(p0 > 0.0 && p0 < 1.0))
            throw std::invalid_argument("MotifConfig: p0 must lie in (0, 1)");
    }
};

struct MotifEStep {
    MotifCounts counts;
    SitePosterior posterior;
    double loglik = 0.0;
    double site_total = 0.0;        // expected number of sites
    double background_total = 0.0;  // expected number of background residues
};

namespace detail {

inline void check_site_range(const Sequence& seq, std::size_t start, std::size_t w) {
    if (w < 1 || start + w > seq.length()) {
        std::ostringstream os;
        os << "site start " << start << " with width " << w << " does not fit in sequence '"
           << seq.id << "' of length " << seq.length();
        throw std::out_of_range(os.str());
    }
}

// log P(Y_k | site at l): background everywhere plus site/background
// log-ratio over the window.
inline double site_log_weight(const Sequence& seq, std::size_t start, const MotifModel& model,
                              double background_log_prob) {
    double lw = background_log_prob;
    for (std::size_t i = 0; i < model.width(); ++i) {
        const std::uint8_t r = seq.residues[start + i];
        lw += std::log(model.theta[i][r]) - std::log(model.theta0[r]);
    }
    return lw;
}

inline double sequence_background_log_prob(const Sequence& seq, const MotifModel& model) {
    double s = 0.0;
    for (std::uint8_t r : seq.residues) s += std::log(model.theta0[r]);
    return s;
}

}  // namespace detail

// P(Y_k | site starts at `start`, model): the whole sequence emitted from
// the background except the window, which uses the position multinomials.
// Evaluated in log space; the returned value is the plain probability.
inline double site_weight(const Sequence& seq, std::size_t start, const MotifModel& model) {
    detail::check_site_range(seq, start, model.width());
    return std::exp(detail::site_log_weight(seq, start, model,
                                            detail::sequence_background_log_prob(seq, model)));
}

// One-site-per-sequence E-step. posterior[k][l] = w_{k,l} / W_k with
// W_k the sum over placements; expected counts are posterior-weighted
// residue counts; loglik = sum_k log(W_k / L'_k).
inline MotifEStep e_step_oops(const std::vector<Sequence>& seqs, const MotifModel& model) {
    const std::size_t w = model.width();
    const std::size_t d = model.alphabet_size();
    MotifEStep out;
    out.counts.motif.assign(w, std::vector<double>(d, 0.0));
    out.counts.background.assign(d, 0.0);
    out.posterior.resize(seqs.size());

    std::vector<double> total_counts(d, 0.0);
    std::vector<double> lw;
    for (std::size_t k = 0; k < seqs.size(); ++k) {
        const Sequence& seq = seqs[k];
        detail::check_site_range(seq, 0, w);
        const std::size_t n_start = seq.length() - w + 1;
        const double bg = detail::sequence_background_log_prob(seq, model);
        lw.resize(n_start);
        for (std::size_t l = 0; l < n_start; ++l)
            lw[l] = detail::site_log_weight(seq, l, model, bg);

        const double log_wk = log_sum_exp(lw);
        if (!std::isfinite(log_wk))
            throw std::runtime_error("e_step_oops: zero total site weight for sequence '" + seq.id + "'");
        out.loglik += log_wk - std::log(double(n_start));

        auto& post = out.posterior[k];
        post.resize(n_start);
        for (std::size_t l = 0; l < n_start; ++l) {
            post[l] = std::exp(lw[l] - log_wk);
            for (std::size_t i = 0; i < w; ++i)
                out.counts.motif[i][seq.residues[l + i]] += post[l];
        }
        for (std::uint8_t r : seq.residues) total_counts[r] += 1.0;
        out.background_total += double(seq.length() - w);
    }
    out.site_total = double(seqs.size());
    for (std::size_t r = 0; r < d; ++r) {
        double m = 0.0;
        for (std::size_t i = 0; i < w; ++i) m += out.counts.motif[i][r];
        out.counts.background[r] = std::max(0.0, total_counts[r] - m);
    }
    return out;
}

// Window-mixture E-step: every length-w window is an independent draw,
// motif with prior p0 and background with 1-p0. Counts are the
// posterior-weighted window sums on both sides of the mixture.
inline MotifEStep e_step_zoops(const std::vector<Sequence>& seqs, const MotifModel& model,
                               double p0) {
    const std::size_t w = model.width();
    const std::size_t d = model.alphabet_size();
    const double log_p0 = std::log(p0);
    const double log_q0 = std::log1p(-p0);
    MotifEStep out;
    out.counts.motif.assign(w, std::vector<double>(d, 0.0));
    out.counts.background.assign(d, 0.0);
    out.posterior.resize(seqs.size());

    for (std::size_t k = 0; k < seqs.size(); ++k) {
        const Sequence& seq = seqs[k];
        detail::check_site_range(seq, 0, w);
        const std::size_t n_start = seq.length() - w + 1;
        auto& post = out.posterior[k];
        post.resize(n_start);
        for (std::size_t l = 0; l < n_start; ++l) {
            double lm = 0.0, lb = 0.0;
            for (std::size_t i = 0; i < w; ++i) {
                const std::uint8_t r = seq.residues[l + i];
                lm += std::log(model.theta[i][r]);
                lb += std::log(model.theta0[r]);
            }
            const double log_mix = log_add(log_p0 + lm, log_q0 + lb);
            out.loglik += log_mix;
            const double p = std::exp(log_p0 + lm - log_mix);
            post[l] = p;
            out.site_total += p;
            for (std::size_t i = 0; i < w; ++i) {
                const std::uint8_t r = seq.residues[l + i];
                out.counts.motif[i][r] += p;
                out.counts.background[r] += 1.0 - p;
            }
        }
    }
    out.background_total = 0.0;
    for (double c : out.counts.background) out.background_total += c;
    return out;
}

// Counting M-step with pseudocount alpha: theta_i = (counts_i + alpha) /
// (site_total + d*alpha), theta0 analogous over background_total.
// Totals are real numbers because ZOOPS site counts are expectations.
inline MotifModel m_step(const MotifCounts& counts, double site_total, double background_total,
                         double alpha) {
    const std::size_t w = counts.motif.size();
    const std::size_t d = counts.background.size();
    MotifModel model;
    model.theta.assign(w, std::vector<double>(d, 0.0));
    model.theta0.assign(d, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
        const double denom = site_total + double(d) * alpha;
        for (std::size_t r = 0; r < d; ++r)
            model.theta[i][r] = denom > 0.0 ? (counts.motif[i][r] + alpha) / denom : 1.0 / double(d);
    }
    const double denom0 = background_total + double(d) * alpha;
    for (std::size_t r = 0; r < d; ++r)
        model.theta0[r] = denom0 > 0.0 ? (counts.background[r] + alpha) / denom0 : 1.0 / double(d);
    return model;
}

namespace detail {

inline void check_motif_inputs(const std::vector<Sequence>& seqs, std::size_t width) {
    if (seqs.empty()) throw std::invalid_argument("motif discovery needs at least one sequence");
    for (const auto& s : seqs)
        if (s.length() < width) {
            std::ostringstream os;
            os << "sequence '" << s.id << "' has length " << s.length()
               << ", shorter than motif width " << width;
            throw std::invalid_argument(os.str());
        }
}

// Shared restart seeding: position multinomials from one random window,
// background from global residue frequencies, both smoothed to stay
// strictly positive.
inline MotifModel seed_model(const std::vector<Sequence>& seqs, const Alphabet& alphabet,
                             std::size_t width, double alpha, std::uint64_t seed) {
    const std::size_t d = alphabet.size();
    const double smooth = alpha > 0.0 ? alpha : 0.5;
    Rng rng(seed);
    const Sequence& pick = seqs[rng.below(seqs.size())];
    const std::size_t start = rng.below(pick.length() - width + 1);

    MotifModel model;
    model.theta.assign(width, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < width; ++i) {
        for (std::size_t r = 0; r < d; ++r) model.theta[i][r] = smooth / (1.0 + double(d) * smooth);
        model.theta[i][pick.residues[start + i]] += 1.0 / (1.0 + double(d) * smooth);
    }
    std::vector<double> freq(d, 0.0);
    double total = 0.0;
    for (const auto& s : seqs)
        for (std::uint8_t r : s.residues) {
            freq[r] += 1.0;
            total += 1.0;
        }
    model.theta0.resize(d);
    for (std::size_t r = 0; r < d; ++r)
        model.theta0[r] = (freq[r] + smooth) / (total + double(d) * smooth);
    return model;
}

}  // namespace detail

// EM problem adapter for the one-site-per-sequence model. alpha may be 0
// here (exact MLE M-step); the packaged MotifConfig path keeps alpha > 0.
class OopsProblem {
  public:
    using Params = MotifModel;
    using Stats = MotifEStep;

    OopsProblem(const std::vector<Sequence>& seqs, const Alphabet& alphabet, std::size_t width,
                double alpha = 0.5)
        : seqs_(&seqs), alphabet_(&alphabet), width_(width), alpha_(alpha) {
        detail::check_motif_inputs(seqs, width);
        if (alpha < 0.0) throw std::invalid_argument("OopsProblem: alpha must be >= 0");
    }

    Params random_init(std::uint64_t seed) const {
        return detail::seed_model(*seqs_, *alphabet_, width_, alpha_, seed);
    }

    EStepResult<Stats> expect(const Params& model) const {
        auto es = e_step_oops(*seqs_, model);
        const double ll = es.loglik;
        return {std::move(es), ll};
    }

    Params maximize(const Stats& stats, const Params&) const {
        return m_step(stats.counts, stats.site_total, stats.background_total, alpha_);
    }

    double log_likelihood(const Params& model) const { return e_step_oops(*seqs_, model).loglik; }

  private:
    const std::vector<Sequence>* seqs_;
    const Alphabet* alphabet_;
    std::size_t width_;
    double alpha_;
};

// EM problem adapter for the window-mixture model; the site prior p0 is a
// parameter and is re-estimated each M-step as the mean window posterior.
class ZoopsProblem {
  public:
    struct Params {
        MotifModel model;
        double p0 = 0.05;
    };
    using Stats = MotifEStep;

    ZoopsProblem(const std::vector<Sequence>& seqs, const Alphabet& alphabet, std::size_t width,
                 double alpha = 0.5, double p0 = 0.05)
        : seqs_(&seqs), alphabet_(&alphabet), width_(width), alpha_(alpha), p0_(p0) {
        detail::check_motif_inputs(seqs, width);
        if (alpha < 0.0) throw std::invalid_argument("ZoopsProblem: alpha must be >= 0");
        if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("ZoopsProblem: p0 must lie in (0, 1)");
        n_windows_ = 0;
        for (const auto& s : seqs) n_windows_ += s.length() - width + 1;
    }

    Params random_init(std::uint64_t seed) const {
        return {detail::seed_model(*seqs_, *alphabet_, width_, alpha_, seed), p0_};
    }

    EStepResult<Stats> expect(const Params& p) const {
        auto es = e_step_zoops(*seqs_, p.model, p.p0);
        const double ll = es.loglik;
        return {std::move(es), ll};
    }

    Params maximize(const Stats& stats, const Params&) const {
        Params next;
        next.model = m_step(stats.counts, stats.site_total, stats.background_total, alpha_);
        next.p0 = stats.site_total / double(n_windows_);
        return next;
    }

    double log_likelihood(const Params& p) const {
        return e_step_zoops(*seqs_, p.model, p.p0).loglik;
    }

  private:
    const std::vector<Sequence>* seqs_;
    const Alphabet* alphabet_;
    std::size_t width_;
    double alpha_;
    double p0_;
    std::size_t n_windows_;
};

struct MotifResult {
    MotifModel model;
    std::optional<double> p0;              // present in zoops mode
    SitePosterior posterior;
    std::vector<std::size_t> best_site;    // argmax start per sequence, ties to the left
    EmTrace trace;
    std::size_t best_restart = 0;
};

namespace detail {

inline std::vector<std::size_t> best_sites(const SitePosterior& posterior) {
    std::vector<std::size_t> out(posterior.size(), 0);
    for (std::size_t k = 0; k < posterior.size(); ++k) {
        std::size_t arg = 0;
        for (std::size_t l = 1; l < posterior[k].size(); ++l)
            if (posterior[k][l] > posterior[k][arg]) arg = l;
        out[k] = arg;
    }
    return out;
}

}  // namespace detail

// Full discovery workflow: multi-start EM under the configured occurrence
// model, then a final E-step to report posteriors for the best model.
inline MotifResult discover(const std::vector<Sequence>& seqs, const Alphabet& alphabet,
                            const MotifConfig& config, const EmConfig& em) {
    config.validate();
    detail::check_motif_inputs(seqs, config.width);
    MotifResult out;
    if (config.mode == MotifMode::oops) {
        OopsProblem problem(seqs, alphabet, config.width, config.alpha);
        auto ms = multi_start(problem, em);
        out.model = std::move(ms.best);
        out.trace = ms.traces[ms.best_restart];
        out.best_restart = ms.best_restart;
        out.posterior = e_step_oops(seqs, out.model).posterior;
    } else {
        ZoopsProblem problem(seqs, alphabet, config.width, config.alpha, config.p0);
        auto ms = multi_start(problem, em);
        out.model = std::move(ms.best.model);
        out.p0 = ms.best.p0;
        out.trace = ms.traces[ms.best_restart];
        out.best_restart = ms.best_restart;
        out.posterior = e_step_zoops(seqs, out.model, *out.p0).posterior;
    }
    out.best_site = detail::best_sites(out.posterior);
    return out;
}

}  // namespace emtk
