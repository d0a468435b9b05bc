// Two-state phylogenetic HMM for conservation scoring. Columns of a gapless
// DNA alignment are emitted by one of two Jukes-Cantor tree models that share
// topology and branch lengths; the conserved state contracts every branch by
// a factor rho < 1. A first-order chain over column states captures the
// tendency of conserved sites to run in blocks.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emtk/em.hpp"
#include "emtk/newick.hpp"
#include "emtk/numerics.hpp"
#include "emtk/optimize.hpp"
#include "emtk/rng.hpp"
#include "emtk/seqio.hpp"

namespace emtk {

// Jukes-Cantor transition matrix for a unit-rate chain run for the given
// branch length: diagonal 1/4 + (3/4) e^{-4b/3}, off-diagonal 1/4 - (1/4) e^{-4b/3}.
inline Matrix jc_transition(double branch_length) {
    if (!(branch_length >= 0.0))
        throw std::invalid_argument("jc_transition: branch length must be non-negative");
    const double decay = std::exp(-4.0 * branch_length / 3.0);
    Matrix p(4, 4, 0.25 * (1.0 - decay));
    for (std::size_t i = 0; i < 4; ++i) p(i, i) = 0.25 + 0.75 * decay;
    return p;
}

namespace detail {

struct JcEdge {
    double same;
    double diff;
};

inline JcEdge jc_edge(double branch_length) {
    const double decay = std::exp(-4.0 * branch_length / 3.0);
    return {0.25 + 0.75 * decay, 0.25 * (1.0 - decay)};
}

}  // namespace detail

// Log-likelihood of one alignment column under the tree whose branch lengths
// are `beta` (indexed by node, root entry ignored) scaled by `scale`.
// `column` holds one residue code per leaf, in node-index order of the
// leaves. Felsenstein pruning with per-node rescaling; returns -inf when the
// column is impossible (only reachable with zero-length branches).
inline double column_log_likelihood(const PhyloTree& tree, std::span<const double> beta,
                                    double scale, std::span<const std::uint8_t> column) {
    const std::size_t n = tree.nodes.size();
    if (n == 0) throw std::invalid_argument("column_log_likelihood: empty tree");
    if (beta.size() != n)
        throw std::invalid_argument("column_log_likelihood: need one branch length per node");
    if (!(scale >= 0.0))
        throw std::invalid_argument("column_log_likelihood: scale must be non-negative");

    std::vector<std::array<double, 4>> partial(n);
    double log_scale = 0.0;
    std::size_t leaf_pos = 0;
    for (std::size_t v = 0; v < n; ++v) {
        const auto& node = tree.nodes[v];
        auto& p = partial[v];
        if (node.children.empty()) {
            if (leaf_pos >= column.size())
                throw std::invalid_argument("column_log_likelihood: column shorter than leaf count");
            const std::uint8_t r = column[leaf_pos++];
            if (r >= 4)
                throw std::invalid_argument("column_log_likelihood: residue code outside DNA range");
            p = {0.0, 0.0, 0.0, 0.0};
            p[r] = 1.0;
        } else {
            p = {1.0, 1.0, 1.0, 1.0};
            for (int c : node.children) {
                const auto edge = detail::jc_edge(scale * beta[static_cast<std::size_t>(c)]);
                const auto& cp = partial[static_cast<std::size_t>(c)];
                const double total = cp[0] + cp[1] + cp[2] + cp[3];
                for (std::size_t s = 0; s < 4; ++s)
                    p[s] *= edge.diff * total + (edge.same - edge.diff) * cp[s];
            }
            const double m = *std::max_element(p.begin(), p.end());
            if (!(m > 0.0)) return neg_inf;
            for (double& x : p) x /= m;
            log_scale += std::log(m);
        }
    }
    if (leaf_pos != column.size())
        throw std::invalid_argument("column_log_likelihood: column longer than leaf count");
    const auto& r = partial[static_cast<std::size_t>(tree.root())];
    const double total = 0.25 * (r[0] + r[1] + r[2] + r[3]);
    if (!(total > 0.0)) return neg_inf;
    return log_scale + std::log(total);
}

// Branch lengths taken from the tree itself.
inline double column_log_likelihood(const PhyloTree& tree, double scale,
                                    std::span<const std::uint8_t> column) {
    std::vector<double> beta(tree.nodes.size());
    for (std::size_t v = 0; v < beta.size(); ++v) beta[v] = tree.nodes[v].branch;
    return column_log_likelihood(tree, beta, scale, column);
}

inline double column_likelihood(const PhyloTree& tree, double scale,
                                std::span<const std::uint8_t> column) {
    return std::exp(column_log_likelihood(tree, scale, column));
}

// Posterior decode of the two-state column chain. State 0 is conserved,
// state 1 is neutral; the chain starts from its stationary distribution
// (nu/(mu+nu), mu/(mu+nu)) and moves with P(c->n) = mu, P(n->c) = nu.
struct ChainResult {
    std::vector<double> posterior_c;  // P(state_i = conserved | everything)
    double xi_cc = 0.0, xi_cn = 0.0, xi_nc = 0.0, xi_nn = 0.0;  // expected transitions
    double gamma1_c = 0.0, gamma1_n = 0.0;                      // first-column occupancy
    double loglik = 0.0;
};

inline ChainResult chain_forward_backward_log(std::span<const double> log_emit_c,
                                              std::span<const double> log_emit_n, double mu,
                                              double nu) {
    const std::size_t len = log_emit_c.size();
    if (len == 0) throw std::invalid_argument("chain_forward_backward: no columns");
    if (log_emit_n.size() != len)
        throw std::invalid_argument("chain_forward_backward: emission vectors differ in length");
    if (!(mu > 0.0 && mu < 1.0 && nu > 0.0 && nu < 1.0))
        throw std::invalid_argument("chain_forward_backward: mu and nu must lie in (0, 1)");

    std::vector<std::array<double, 2>> emit(len);
    std::vector<double> shift(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double lc = log_emit_c[i];
        const double ln = log_emit_n[i];
        if (lc == neg_inf && ln == neg_inf) {
            std::ostringstream msg;
            msg << "chain_forward_backward: column " << (i + 1)
                << " has zero emission probability in both states";
            throw std::invalid_argument(msg.str());
        }
        const double m = std::max(lc, ln);
        emit[i] = {std::exp(lc - m), std::exp(ln - m)};
        shift[i] = m;
    }

    const std::array<double, 2> start = {nu / (mu + nu), mu / (mu + nu)};
    const std::array<std::array<double, 2>, 2> trans = {{{1.0 - mu, mu}, {nu, 1.0 - nu}}};

    std::vector<std::array<double, 2>> fwd(len);
    std::vector<double> norm(len);
    for (std::size_t s = 0; s < 2; ++s) fwd[0][s] = start[s] * emit[0][s];
    norm[0] = fwd[0][0] + fwd[0][1];
    for (std::size_t s = 0; s < 2; ++s) fwd[0][s] /= norm[0];
    for (std::size_t i = 1; i < len; ++i) {
        for (std::size_t t = 0; t < 2; ++t)
            fwd[i][t] = (fwd[i - 1][0] * trans[0][t] + fwd[i - 1][1] * trans[1][t]) * emit[i][t];
        norm[i] = fwd[i][0] + fwd[i][1];
        for (std::size_t t = 0; t < 2; ++t) fwd[i][t] /= norm[i];
    }

    std::vector<std::array<double, 2>> bwd(len);
    bwd[len - 1] = {1.0, 1.0};
    for (std::size_t i = len - 1; i-- > 0;) {
        for (std::size_t s = 0; s < 2; ++s) {
            double acc = 0.0;
            for (std::size_t t = 0; t < 2; ++t)
                acc += trans[s][t] * emit[i + 1][t] * bwd[i + 1][t];
            bwd[i][s] = acc / norm[i + 1];
        }
    }

    ChainResult out;
    out.posterior_c.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double pc = fwd[i][0] * bwd[i][0];
        const double pn = fwd[i][1] * bwd[i][1];
        out.posterior_c[i] = pc / (pc + pn);
    }
    out.gamma1_c = out.posterior_c[0];
    out.gamma1_n = 1.0 - out.posterior_c[0];
    double xi[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (std::size_t i = 0; i + 1 < len; ++i)
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t t = 0; t < 2; ++t)
                xi[s][t] += fwd[i][s] * trans[s][t] * emit[i + 1][t] * bwd[i + 1][t] / norm[i + 1];
    out.xi_cc = xi[0][0];
    out.xi_cn = xi[0][1];
    out.xi_nc = xi[1][0];
    out.xi_nn = xi[1][1];

    KahanSum ll;
    for (std::size_t i = 0; i < len; ++i) {
        ll.add(std::log(norm[i]));
        ll.add(shift[i]);
    }
    out.loglik = ll.value();
    return out;
}

inline ChainResult chain_forward_backward(std::span<const double> emit_c,
                                          std::span<const double> emit_n, double mu, double nu) {
    const std::size_t len = emit_c.size();
    if (emit_n.size() != len)
        throw std::invalid_argument("chain_forward_backward: emission vectors differ in length");
    std::vector<double> lc(len), ln(len);
    for (std::size_t i = 0; i < len; ++i) {
        if (!(emit_c[i] >= 0.0) || !(emit_n[i] >= 0.0))
            throw std::invalid_argument("chain_forward_backward: emissions must be non-negative");
        lc[i] = emit_c[i] > 0.0 ? std::log(emit_c[i]) : neg_inf;
        ln[i] = emit_n[i] > 0.0 ? std::log(emit_n[i]) : neg_inf;
    }
    return chain_forward_backward_log(lc, ln, mu, nu);
}

struct PhyloHmmParams {
    static constexpr double rho_lo = 1e-4;
    static constexpr double rho_hi = 0.999;
    static constexpr double beta_lo = 1e-6;
    static constexpr double beta_hi = 10.0;

    double mu = 0.1;           // P(conserved -> neutral)
    double nu = 0.1;           // P(neutral -> conserved)
    double rho = 0.5;          // branch contraction in the conserved state
    std::vector<double> beta;  // branch length per tree node; root entry unused

    double stationary_conserved() const { return nu / (mu + nu); }

    void validate(std::size_t num_nodes) const {
        if (!(mu > 0.0 && mu < 1.0 && nu > 0.0 && nu < 1.0))
            throw std::invalid_argument("PhyloHmmParams: mu and nu must lie in (0, 1)");
        if (!(rho >= rho_lo && rho <= rho_hi))
            throw std::invalid_argument("PhyloHmmParams: rho out of range");
        if (beta.size() != num_nodes)
            throw std::invalid_argument("PhyloHmmParams: need one branch length per tree node");
        for (std::size_t v = 0; v + 1 < beta.size(); ++v)
            if (!(beta[v] >= beta_lo && beta[v] <= beta_hi))
                throw std::invalid_argument("PhyloHmmParams: branch length out of range");
    }
};

// EM problem over (mu, nu, rho, beta). The E-step combines Felsenstein
// pruning per distinct column with the two-state forward-backward pass; the
// M-step maximizes the two separable pieces of the expected complete-data
// log-likelihood numerically inside their boxes, so each update can only
// improve it.
class PhyloProblem {
  public:
    using Params = PhyloHmmParams;

    struct Stats {
        std::vector<double> col_c;  // summed conserved posterior per distinct column
        std::vector<double> col_n;
        double xi_cc = 0.0, xi_cn = 0.0, xi_nc = 0.0, xi_nn = 0.0;
        double gamma1_c = 0.0, gamma1_n = 0.0;
    };

    PhyloProblem(const Alignment& alignment, PhyloTree tree) : tree_(std::move(tree)) {
        tree_.validate_binary();
        const auto leaf_nodes = tree_.leaf_indices();
        if (alignment.depth() != leaf_nodes.size()) {
            std::ostringstream msg;
            msg << "alignment has " << alignment.depth() << " rows but the tree has "
                << leaf_nodes.size() << " leaves";
            throw std::invalid_argument(msg.str());
        }
        if (alignment.width() == 0) throw std::invalid_argument("alignment has no columns");

        std::vector<std::size_t> row_of(leaf_nodes.size());
        for (std::size_t k = 0; k < leaf_nodes.size(); ++k) {
            const std::string& name = tree_.nodes[static_cast<std::size_t>(leaf_nodes[k])].name;
            auto it = std::find(alignment.ids.begin(), alignment.ids.end(), name);
            if (it == alignment.ids.end())
                throw std::invalid_argument("tree leaf '" + name + "' not found in the alignment");
            row_of[k] = static_cast<std::size_t>(it - alignment.ids.begin());
        }

        std::map<std::vector<std::uint8_t>, std::size_t> index;
        col_of_.resize(alignment.width());
        for (std::size_t j = 0; j < alignment.width(); ++j) {
            std::vector<std::uint8_t> column(leaf_nodes.size());
            for (std::size_t k = 0; k < leaf_nodes.size(); ++k) {
                const std::uint8_t r = alignment.rows[row_of[k]][j];
                if (r == Alignment::gap) {
                    std::ostringstream msg;
                    msg << "alignment column " << (j + 1) << " contains a gap";
                    throw std::invalid_argument(msg.str());
                }
                if (r >= 4) {
                    std::ostringstream msg;
                    msg << "alignment column " << (j + 1) << ": residue outside the DNA alphabet";
                    throw std::invalid_argument(msg.str());
                }
                column[k] = r;
            }
            auto [it, fresh] = index.try_emplace(std::move(column), unique_.size());
            if (fresh) unique_.push_back(it->first);
            col_of_[j] = it->second;
        }
    }

    const PhyloTree& tree() const { return tree_; }
    std::size_t num_columns() const { return col_of_.size(); }
    std::size_t num_distinct_columns() const { return unique_.size(); }

    Params initial_guess() const {
        Params p;
        p.mu = 0.1;
        p.nu = 0.1;
        p.rho = 0.5;
        p.beta.resize(tree_.nodes.size(), 0.0);
        for (std::size_t v = 0; v + 1 < tree_.nodes.size(); ++v)
            p.beta[v] = std::clamp(tree_.nodes[v].branch, Params::beta_lo, Params::beta_hi);
        return p;
    }

    Params random_init(std::uint64_t seed) const {
        Rng rng(seed);
        Params p;
        p.mu = rng.uniform(0.02, 0.5);
        p.nu = rng.uniform(0.02, 0.5);
        p.rho = rng.uniform(0.05, 0.95);
        p.beta.resize(tree_.nodes.size(), 0.0);
        for (std::size_t v = 0; v + 1 < tree_.nodes.size(); ++v)
            p.beta[v] = rng.uniform(0.05, 1.0);
        return p;
    }

    EStepResult<Stats> expect(const Params& params) const {
        params.validate(tree_.nodes.size());
        const std::vector<double> log_c = distinct_log_emissions(params.rho, params.beta);
        const std::vector<double> log_n = distinct_log_emissions(1.0, params.beta);

        std::vector<double> lc(col_of_.size()), ln(col_of_.size());
        for (std::size_t i = 0; i < col_of_.size(); ++i) {
            lc[i] = log_c[col_of_[i]];
            ln[i] = log_n[col_of_[i]];
        }
        const ChainResult chain = chain_forward_backward_log(lc, ln, params.mu, params.nu);

        EStepResult<Stats> out;
        out.stats.col_c.assign(unique_.size(), 0.0);
        out.stats.col_n.assign(unique_.size(), 0.0);
        for (std::size_t i = 0; i < col_of_.size(); ++i) {
            out.stats.col_c[col_of_[i]] += chain.posterior_c[i];
            out.stats.col_n[col_of_[i]] += 1.0 - chain.posterior_c[i];
        }
        out.stats.xi_cc = chain.xi_cc;
        out.stats.xi_cn = chain.xi_cn;
        out.stats.xi_nc = chain.xi_nc;
        out.stats.xi_nn = chain.xi_nn;
        out.stats.gamma1_c = chain.gamma1_c;
        out.stats.gamma1_n = chain.gamma1_n;
        out.loglik = chain.loglik;
        return out;
    }

    Params maximize(const Stats& stats, const Params& current) const {
        Params next = current;

        // Chain piece: the stationary initial term couples mu and nu, so the
        // count-ratio solution is only a seed; polish both it and the current
        // point numerically and keep the better one.
        {
            const Objective q = [&](std::span<const double> v) {
                return expected_chain_loglik(stats, v[0], v[1]);
            };
            const BoxTransform box({1e-6, 1e-6}, {1.0 - 1e-6, 1.0 - 1e-6});
            OptimOptions opt;
            opt.grad_tol = 1e-9;
            std::vector<double> seed = {current.mu, current.nu};
            const double out_c = stats.xi_cc + stats.xi_cn;
            const double out_n = stats.xi_nc + stats.xi_nn;
            if (out_c > 0.0) seed[0] = std::clamp(stats.xi_cn / out_c, 1e-6, 1.0 - 1e-6);
            if (out_n > 0.0) seed[1] = std::clamp(stats.xi_nc / out_n, 1e-6, 1.0 - 1e-6);
            const std::vector<double> cur = {current.mu, current.nu};
            std::vector<double> a = maximize_in_box(q, cur, box, opt);
            std::vector<double> b = maximize_in_box(q, seed, box, opt);
            const std::vector<double>& pick = (q(b) > q(a)) ? b : a;
            next.mu = pick[0];
            next.nu = pick[1];
        }

        // Tree piece: quasi-Newton over (rho, beta) warm-started at the
        // current values.
        {
            const std::vector<int> edges = edge_nodes();
            const Objective q = [&](std::span<const double> v) {
                std::vector<double> beta(tree_.nodes.size(), 0.0);
                for (std::size_t e = 0; e < edges.size(); ++e)
                    beta[static_cast<std::size_t>(edges[e])] = v[e + 1];
                return expected_tree_loglik(stats, v[0], beta);
            };
            std::vector<double> lo(edges.size() + 1, Params::beta_lo);
            std::vector<double> hi(edges.size() + 1, Params::beta_hi);
            lo[0] = Params::rho_lo;
            hi[0] = Params::rho_hi;
            const BoxTransform box(lo, hi);
            OptimOptions opt;
            opt.grad_tol = 1e-9;
            opt.max_iter = 100;  // partial maximization still improves the bound
            std::vector<double> start(edges.size() + 1);
            start[0] = current.rho;
            for (std::size_t e = 0; e < edges.size(); ++e)
                start[e + 1] = current.beta[static_cast<std::size_t>(edges[e])];
            const std::vector<double> best = maximize_in_box(q, start, box, opt);
            next.rho = best[0];
            for (std::size_t e = 0; e < edges.size(); ++e)
                next.beta[static_cast<std::size_t>(edges[e])] = best[e + 1];
        }
        return next;
    }

    double log_likelihood(const Params& params) const { return expect(params).loglik; }

    // Expected complete-data contribution of the tree emissions as a function
    // of (rho, beta) with posteriors held fixed. Exposed so callers can probe
    // the M-step surface (gradient checks, diagnostics).
    double expected_tree_loglik(const Stats& stats, double rho,
                                std::span<const double> beta) const {
        KahanSum q;
        for (std::size_t u = 0; u < unique_.size(); ++u) {
            if (stats.col_c[u] > 0.0)
                q.add(stats.col_c[u] * column_log_likelihood(tree_, beta, rho, unique_[u]));
            if (stats.col_n[u] > 0.0)
                q.add(stats.col_n[u] * column_log_likelihood(tree_, beta, 1.0, unique_[u]));
        }
        return q.value();
    }

    // Expected complete-data contribution of the state chain, including the
    // stationary initial distribution.
    double expected_chain_loglik(const Stats& stats, double mu, double nu) const {
        const double total = mu + nu;
        return stats.gamma1_c * std::log(nu / total) + stats.gamma1_n * std::log(mu / total) +
               stats.xi_cc * std::log1p(-mu) + stats.xi_cn * std::log(mu) +
               stats.xi_nc * std::log(nu) + stats.xi_nn * std::log1p(-nu);
    }

    // Conserved-state posterior for every alignment column.
    std::vector<double> posterior_conserved(const Params& params) const {
        params.validate(tree_.nodes.size());
        const std::vector<double> log_c = distinct_log_emissions(params.rho, params.beta);
        const std::vector<double> log_n = distinct_log_emissions(1.0, params.beta);
        std::vector<double> lc(col_of_.size()), ln(col_of_.size());
        for (std::size_t i = 0; i < col_of_.size(); ++i) {
            lc[i] = log_c[col_of_[i]];
            ln[i] = log_n[col_of_[i]];
        }
        return chain_forward_backward_log(lc, ln, params.mu, params.nu).posterior_c;
    }

  private:
    std::vector<int> edge_nodes() const {
        std::vector<int> out;
        for (int v = 0; v < tree_.root(); ++v) out.push_back(v);
        return out;
    }

    std::vector<double> distinct_log_emissions(double scale, std::span<const double> beta) const {
        std::vector<double> out(unique_.size());
        for (std::size_t u = 0; u < unique_.size(); ++u)
            out[u] = column_log_likelihood(tree_, beta, scale, unique_[u]);
        return out;
    }

    PhyloTree tree_;
    std::vector<std::vector<std::uint8_t>> unique_;  // distinct columns, leaf order
    std::vector<std::size_t> col_of_;                // alignment column -> distinct index
};

struct PhyloFitResult {
    PhyloHmmParams params;
    EmTrace trace;
    std::size_t best_restart = 0;
};

// Fit the conservation model to a gapless DNA alignment. Branch lengths on
// the tree seed the optimization but are re-estimated.
inline PhyloFitResult fit_phylo_hmm(const Alignment& alignment, const PhyloTree& tree,
                                    const EmConfig& config = {}) {
    PhyloProblem problem(alignment, tree);
    auto ms = multi_start(problem, config);
    return {std::move(ms.best), std::move(ms.traces[ms.best_restart]), ms.best_restart};
}

// Per-column conserved-state posterior under fixed parameters.
inline std::vector<double> conservation_scores(const Alignment& alignment, const PhyloTree& tree,
                                               const PhyloHmmParams& params) {
    return PhyloProblem(alignment, tree).posterior_conserved(params);
}

struct PhyloSimulation {
    Alignment alignment;                  // one row per leaf, tree leaf order
    std::vector<std::uint8_t> conserved;  // 1 where the column was conserved
};

// Draw an alignment of the given length from the model: sample the state
// chain from its stationary start, then evolve each column down the tree
// under Jukes-Cantor with branch scale rho (conserved) or 1 (neutral).
inline PhyloSimulation simulate_phylo_hmm(const PhyloTree& tree, const PhyloHmmParams& params,
                                          std::size_t length, std::uint64_t seed) {
    tree.validate_binary();
    params.validate(tree.nodes.size());
    if (length == 0) throw std::invalid_argument("simulate_phylo_hmm: length must be positive");

    const auto leaf_nodes = tree.leaf_indices();
    PhyloSimulation sim;
    sim.alignment.ids.reserve(leaf_nodes.size());
    for (int v : leaf_nodes) sim.alignment.ids.push_back(tree.nodes[static_cast<std::size_t>(v)].name);
    sim.alignment.rows.assign(leaf_nodes.size(), std::vector<std::uint8_t>(length, 0));
    sim.conserved.resize(length);

    Rng rng(seed);
    const double start_c = params.stationary_conserved();
    bool conserved = rng.uniform() < start_c;
    std::vector<std::uint8_t> state(tree.nodes.size());
    for (std::size_t i = 0; i < length; ++i) {
        if (i > 0) {
            const double u = rng.uniform();
            conserved = conserved ? (u >= params.mu) : (u < params.nu);
        }
        sim.conserved[i] = conserved ? 1 : 0;
        const double scale = conserved ? params.rho : 1.0;

        const std::size_t root = static_cast<std::size_t>(tree.root());
        state[root] = static_cast<std::uint8_t>(rng.below(4));
        for (std::size_t v = tree.nodes.size() - 1; v-- > 0;) {
            const auto edge = detail::jc_edge(scale * params.beta[v]);
            const std::uint8_t parent = state[static_cast<std::size_t>(tree.nodes[v].parent)];
            double u = rng.uniform();
            std::uint8_t drawn = parent;
            for (std::uint8_t s = 0; s < 4; ++s) {
                const double p = (s == parent) ? edge.same : edge.diff;
                if (u < p) {
                    drawn = s;
                    break;
                }
                u -= p;
            }
            state[v] = drawn;
        }
        for (std::size_t k = 0; k < leaf_nodes.size(); ++k)
            sim.alignment.rows[k][i] = state[static_cast<std::size_t>(leaf_nodes[k])];
    }
    return sim;
}

}  // namespace emtk
