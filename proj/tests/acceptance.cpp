// Release gate: one self-contained check per shipped guarantee, each printed
// as a PASS/FAIL line. Exit status is the number of failures. Every check
// carries its own independent oracle (enumeration, matrix exponential, grid
// search, Monte Carlo) so a regression in the library cannot hide itself.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emtk/haplotype.hpp"
#include "emtk/json_io.hpp"
#include "emtk/mixture.hpp"
#include "emtk/motif.hpp"
#include "emtk/newick.hpp"
#include "emtk/phylo_hmm.hpp"
#include "emtk/profile_hmm.hpp"
#include "emtk/seqio.hpp"

using namespace emtk;
namespace fs = std::filesystem;

namespace {

int failures = 0;
std::vector<std::string> notes;

void note(const std::string& msg) { notes.push_back(msg); }

void report(int index, bool ok, const char* label) {
    std::printf("[%2d] %s  %s\n", index, ok ? "PASS" : "FAIL", label);
    if (!ok) {
        ++failures;
        for (const auto& n : notes) std::printf("      - %s\n", n.c_str());
    }
    notes.clear();
}

bool close_rel(double got, double want, double tol) {
    return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

std::vector<Sequence> random_dna(Rng& rng, std::size_t count, std::size_t min_len,
                                 std::size_t max_len) {
    std::vector<Sequence> seqs(count);
    for (std::size_t k = 0; k < count; ++k) {
        seqs[k].id = "s" + std::to_string(k);
        const std::size_t len = min_len + rng.below(max_len - min_len + 1);
        seqs[k].residues.resize(len);
        for (auto& r : seqs[k].residues) r = static_cast<std::uint8_t>(rng.below(4));
    }
    return seqs;
}

bool trace_monotone(const EmTrace& trace) {
    const auto& ll = trace.loglik_per_iter;
    for (std::size_t i = 1; i < ll.size(); ++i)
        if (ll[i] < ll[i - 1] - monotonicity_slack) return false;
    return true;
}

// ---------------------------------------------------------------------------
// 1. Plain EM never decreases the log-likelihood, across all five solvers.

template <class P>
bool run_monotone(const P& problem, const EmConfig& config, std::uint64_t init_seed) {
    auto res = run_em(problem, problem.random_init(init_seed), config);
    return trace_monotone(res.trace);
}

bool criterion_monotonicity() {
    int violations = 0;
    auto tally = [&](bool ok, const char* solver, int rep) {
        if (!ok) {
            ++violations;
            note(std::string(solver) + " instance " + std::to_string(rep) + " decreased");
        }
    };

    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(1000 + std::uint64_t(rep));
        const std::size_t w = 3 + rng.below(2);
        const auto seqs = random_dna(rng, 4 + rng.below(3), w + 8, w + 16);
        const EmConfig config(1e-7, 60, 1, std::uint64_t(rep));
        if (rep % 2 == 0) {
            OopsProblem problem(seqs, Alphabet::dna(), w, 0.0);
            tally(run_monotone(problem, config, std::uint64_t(rep)), "motif-oops", rep);
        } else {
            ZoopsProblem problem(seqs, Alphabet::dna(), w, 0.0, 0.3);
            tally(run_monotone(problem, config, std::uint64_t(rep)), "motif-zoops", rep);
        }
    }

    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(2000 + std::uint64_t(rep));
        const auto seqs = random_dna(rng, 4 + rng.below(3), 4, 9);
        ProfileProblem problem(seqs, Alphabet::dna(), {}, 0.0);
        tally(run_monotone(problem, EmConfig(1e-7, 40, 1, std::uint64_t(rep)),
                           std::uint64_t(rep)),
              "profile", rep);
    }

    const std::array<const char*, 2> shapes = {"((A:0.2,B:0.3):0.1,C:0.4);",
                                               "((A:0.3,B:0.3):0.15,(C:0.2,D:0.4):0.15);"};
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(3000 + std::uint64_t(rep));
        const PhyloTree tree = parse_newick(shapes[rep % 2]);
        PhyloHmmParams truth;
        truth.mu = rng.uniform(0.05, 0.3);
        truth.nu = rng.uniform(0.05, 0.3);
        truth.rho = rng.uniform(0.2, 0.8);
        truth.beta.assign(tree.nodes.size(), 0.0);
        for (std::size_t v = 0; v + 1 < tree.nodes.size(); ++v)
            truth.beta[v] = rng.uniform(0.05, 1.0);
        const auto sim = simulate_phylo_hmm(tree, truth, 30, 3000 + std::uint64_t(rep));
        PhyloProblem problem(sim.alignment, tree);
        tally(run_monotone(problem, EmConfig(1e-6, 25, 1, std::uint64_t(rep)),
                           std::uint64_t(rep)),
              "phylo", rep);
    }

    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(4000 + std::uint64_t(rep));
        GenotypeTable table;
        const std::size_t individuals = 2 + rng.below(3);
        const std::size_t loci = 2 + rng.below(3);
        for (std::size_t j = 0; j < loci; ++j) table.locus_alleles.push_back({'A', 'G'});
        for (std::size_t i = 0; i < individuals; ++i) {
            table.ids.push_back("i" + std::to_string(i + 1));
            std::vector<std::uint8_t> row(loci);
            for (auto& d : row) d = static_cast<std::uint8_t>(rng.below(3));
            table.dosages.push_back(std::move(row));
        }
        HaplotypeProblem problem(table);
        tally(run_monotone(problem, EmConfig(1e-9, 200, 1, std::uint64_t(rep)),
                           std::uint64_t(rep)),
              "haplotype", rep);
    }

    const std::array<CovarianceFamily, 4> families = {
        CovarianceFamily::spherical, CovarianceFamily::diagonal, CovarianceFamily::full,
        CovarianceFamily::shared_full};
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(500 + std::uint64_t(rep));
        const double shift = rng.uniform(-3.0, 3.0);
        const double scale = rng.uniform(0.3, 3.0);
        Matrix data(40, 2);
        for (std::size_t i = 0; i < 40; ++i) {
            data(i, 0) = shift + scale * rng.normal();
            data(i, 1) = 0.4 * data(i, 0) + rng.normal();
        }
        MixtureProblem problem(data, 2, families[std::size_t(rep) % 4]);
        tally(run_monotone(problem, EmConfig(1e-7, 80, 1, std::uint64_t(rep)),
                           std::uint64_t(rep)),
              "mixture", rep);
    }

    if (violations > 0) note(std::to_string(violations) + " violating instances in total");
    return violations == 0;
}

// ---------------------------------------------------------------------------
// 2. Motif E-step equals exhaustive joint-placement enumeration.

struct OopsOracle {
    double loglik;
    std::vector<std::vector<double>> motif_counts;
    std::vector<double> background_counts;
};

double direct_site_prob(const Sequence& s, std::size_t l, const MotifModel& m) {
    double p = 1.0;
    for (std::size_t j = 0; j < s.length(); ++j) {
        if (j >= l && j < l + m.width())
            p *= m.theta[j - l][s.residues[j]];
        else
            p *= m.theta0[s.residues[j]];
    }
    return p;
}

OopsOracle brute_force_oops(const std::vector<Sequence>& seqs, const MotifModel& m) {
    const std::size_t w = m.width(), d = m.alphabet_size(), K = seqs.size();
    std::vector<std::size_t> n_start(K);
    for (std::size_t k = 0; k < K; ++k) n_start[k] = seqs[k].length() - w + 1;

    OopsOracle o;
    o.motif_counts.assign(w, std::vector<double>(d, 0.0));
    o.background_counts.assign(d, 0.0);

    double total = 0.0;
    std::vector<std::size_t> placement(K, 0);
    while (true) {
        double joint = 1.0;
        for (std::size_t k = 0; k < K; ++k)
            joint *= direct_site_prob(seqs[k], placement[k], m) / double(n_start[k]);
        total += joint;
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t l = placement[k];
            for (std::size_t i = 0; i < w; ++i)
                o.motif_counts[i][seqs[k].residues[l + i]] += joint;
            for (std::size_t j = 0; j < seqs[k].length(); ++j)
                if (j < l || j >= l + w) o.background_counts[seqs[k].residues[j]] += joint;
        }
        std::size_t k = 0;
        while (k < K && ++placement[k] == n_start[k]) placement[k++] = 0;
        if (k == K) break;
    }
    o.loglik = std::log(total);
    for (auto& row : o.motif_counts)
        for (double& v : row) v /= total;
    for (double& v : o.background_counts) v /= total;
    return o;
}

MotifModel random_motif_model(std::size_t w, std::size_t d, Rng& rng) {
    MotifModel m;
    m.theta0 = rng.dirichlet_flat(d);
    for (std::size_t i = 0; i < w; ++i) m.theta.push_back(rng.dirichlet_flat(d));
    return m;
}

bool criterion_motif_oracle() {
    Rng rng(42);
    bool ok = true;
    for (std::size_t K = 1; K <= 3; ++K)
        for (std::size_t w = 1; w <= 2; ++w)
            for (std::size_t L = w; L <= 6; ++L)
                for (int rep = 0; rep < 3; ++rep) {
                    const auto seqs = random_dna(rng, K, L, std::min<std::size_t>(L + 1, 6));
                    const MotifModel model = random_motif_model(w, 4, rng);
                    const OopsOracle oracle = brute_force_oops(seqs, model);
                    const auto es = e_step_oops(seqs, model);
                    bool here = close_rel(es.loglik, oracle.loglik, 1e-10);
                    for (std::size_t i = 0; i < w; ++i)
                        for (std::size_t r = 0; r < 4; ++r)
                            here = here && close_rel(es.counts.motif[i][r],
                                                     oracle.motif_counts[i][r], 1e-10);
                    for (std::size_t r = 0; r < 4; ++r)
                        here = here && close_rel(es.counts.background[r],
                                                 oracle.background_counts[r], 1e-10);
                    if (!here) {
                        note("mismatch at K=" + std::to_string(K) + " w=" + std::to_string(w) +
                             " L=" + std::to_string(L));
                        ok = false;
                    }
                }
    return ok;
}

// ---------------------------------------------------------------------------
// 3. Profile forward equals the exhaustive path sum, Viterbi the max path.

void enumerate_paths(const ProfileHmm& hmm, const Sequence& seq, const State& cur,
                     std::size_t consumed, double prob, StatePath& prefix,
                     std::vector<std::pair<StatePath, double>>& out) {
    const std::size_t m = hmm.num_match();
    const std::size_t L = seq.length();

    auto descend = [&](State next, double trans) {
        if (trans <= 0.0) return;
        double p = prob * trans;
        std::size_t c = consumed;
        if (next.kind == StateKind::match) {
            if (c == L) return;
            p *= hmm.e_match[next.index - 1][seq.residues[c++]];
        } else if (next.kind == StateKind::insert) {
            if (c == L) return;
            p *= hmm.e_insert[next.index][seq.residues[c++]];
        } else if (next.kind == StateKind::end) {
            if (c != L) return;
            prefix.push_back(next);
            out.emplace_back(prefix, p);
            prefix.pop_back();
            return;
        }
        if (p <= 0.0) return;
        prefix.push_back(next);
        enumerate_paths(hmm, seq, next, c, p, prefix, out);
        prefix.pop_back();
    };

    const std::size_t j = cur.index;
    switch (cur.kind) {
        case StateKind::begin:
        case StateKind::match: {
            const auto& t = hmm.t_match[j];
            if (j < m) {
                descend({StateKind::match, j + 1}, t.to_match);
                descend({StateKind::del, j + 1}, t.to_delete);
            } else {
                descend({StateKind::end, 0}, t.to_match);
            }
            descend({StateKind::insert, j}, t.to_insert);
            break;
        }
        case StateKind::insert: {
            const auto& t = hmm.t_insert[j];
            if (j < m)
                descend({StateKind::match, j + 1}, t.to_match);
            else
                descend({StateKind::end, 0}, t.to_match);
            descend({StateKind::insert, j}, t.to_insert);
            break;
        }
        case StateKind::del: {
            const auto& t = hmm.t_delete[j - 1];
            if (j < m) {
                descend({StateKind::match, j + 1}, t.to_match);
                descend({StateKind::del, j + 1}, t.to_delete);
            } else {
                descend({StateKind::end, 0}, t.to_match);
            }
            break;
        }
        case StateKind::end:
            break;
    }
}

std::vector<std::pair<StatePath, double>> all_paths(const ProfileHmm& hmm, const Sequence& seq) {
    std::vector<std::pair<StatePath, double>> out;
    StatePath prefix{{StateKind::begin, 0}};
    enumerate_paths(hmm, seq, {StateKind::begin, 0}, 0, 1.0, prefix, out);
    return out;
}

ProfileHmm random_profile(std::size_t m, std::size_t d, Rng& rng) {
    ProfileHmm hmm;
    for (std::size_t j = 0; j < m; ++j) hmm.e_match.push_back(rng.dirichlet_flat(d));
    for (std::size_t j = 0; j <= m; ++j) hmm.e_insert.push_back(rng.dirichlet_flat(d));
    for (std::size_t j = 0; j <= m; ++j) {
        if (j < m) {
            auto v = rng.dirichlet_flat(3);
            hmm.t_match.push_back({v[0], v[1], v[2]});
        } else {
            auto v = rng.dirichlet_flat(2);
            hmm.t_match.push_back({v[0], v[1], 0.0});
        }
        auto u = rng.dirichlet_flat(2);
        hmm.t_insert.push_back({u[0], u[1]});
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (j + 1 < m) {
            auto v = rng.dirichlet_flat(2);
            hmm.t_delete.push_back({v[0], v[1]});
        } else {
            hmm.t_delete.push_back({1.0, 0.0});
        }
    }
    hmm.validate();
    return hmm;
}

bool criterion_profile_paths() {
    Rng rng(77);
    bool ok = true;
    const std::array<const char*, 3> texts = {"A", "CG", "GAT"};
    for (std::size_t m = 1; m <= 2; ++m)
        for (int rep = 0; rep < 8; ++rep) {
            const ProfileHmm hmm = random_profile(m, 4, rng);
            for (const char* text : texts) {
                Sequence seq;
                seq.id = "q";
                for (const char* c = text; *c; ++c)
                    seq.residues.push_back(
                        static_cast<std::uint8_t>(Alphabet::dna().index_of(*c)));

                const auto paths = all_paths(hmm, seq);
                if (paths.empty()) {
                    note("no nonzero path found");
                    return false;
                }
                double total = 0.0;
                std::size_t argmax = 0;
                for (std::size_t i = 0; i < paths.size(); ++i) {
                    total += paths[i].second;
                    if (paths[i].second > paths[argmax].second) argmax = i;
                }

                const DpTable table = forward(hmm, seq);
                if (!close_rel(table.loglik, std::log(total), 1e-10)) {
                    note("forward mismatch on '" + std::string(text) + "'");
                    ok = false;
                }

                const auto [vpath, vscore] = viterbi(hmm, seq);
                const StatePath& best = paths[argmax].first;
                bool same = vpath.size() == best.size();
                for (std::size_t i = 0; same && i < best.size(); ++i)
                    same = vpath[i].kind == best[i].kind && vpath[i].index == best[i].index;
                if (!same || !close_rel(vscore, std::log(paths[argmax].second), 1e-10)) {
                    note("viterbi disagrees with enumerated max path on '" +
                         std::string(text) + "'");
                    ok = false;
                }
            }
        }
    return ok;
}

// ---------------------------------------------------------------------------
// 4. The Jukes-Cantor closed form equals a matrix exponential.

using Mat4 = std::array<double, 16>;

Mat4 mat_mul(const Mat4& a, const Mat4& b) {
    Mat4 c{};
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 4; ++j) c[i * 4 + j] += a[i * 4 + k] * b[k * 4 + j];
    return c;
}

// Scaling-and-squaring exponential of the unit-rate generator, independent
// of the closed form under test.
Mat4 jc_expm(double beta) {
    Mat4 a{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a[i * 4 + j] = beta * (i == j ? -1.0 : 1.0 / 3.0);
    int squarings = 0;
    double norm = 2.0 * beta;
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (double& v : a) v *= scale;

    Mat4 result{};
    for (int i = 0; i < 4; ++i) result[i * 4 + i] = 1.0;
    Mat4 term = result;
    for (int k = 1; k <= 18; ++k) {
        term = mat_mul(term, a);
        for (double& v : term) v /= k;
        for (int idx = 0; idx < 16; ++idx) result[idx] += term[idx];
    }
    for (int s = 0; s < squarings; ++s) result = mat_mul(result, result);
    return result;
}

bool criterion_jc_kernel() {
    const std::array<double, 5> betas = {0.01, 0.1, 0.5, 1.0, 5.0};
    bool ok = true;
    for (double beta : betas) {
        const Matrix p = jc_transition(beta);
        const Mat4 e = jc_expm(beta);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                if (std::abs(p(i, j) - e[i * 4 + j]) > 1e-12) {
                    note("expm mismatch at beta=" + std::to_string(beta));
                    ok = false;
                }
    }
    for (double a : betas)
        for (double b : betas) {
            const Matrix pa = jc_transition(a);
            const Matrix pb = jc_transition(b);
            const Matrix pab = jc_transition(a + b);
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = 0; j < 4; ++j) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < 4; ++k) acc += pa(i, k) * pb(k, j);
                    if (std::abs(acc - pab(i, j)) > 1e-10) {
                        note("composition fails at " + std::to_string(a) + "+" +
                             std::to_string(b));
                        ok = false;
                    }
                }
        }
    return ok;
}

// ---------------------------------------------------------------------------
// 5. Felsenstein pruning equals exhaustive ancestral-state summation.

double enum_column_likelihood(const PhyloTree& tree, const std::vector<double>& beta,
                              double scale, const std::vector<std::uint8_t>& column) {
    const std::size_t n = tree.nodes.size();
    std::vector<std::size_t> internals;
    std::vector<std::uint8_t> state(n, 0);
    std::size_t leaf_pos = 0;
    for (std::size_t v = 0; v < n; ++v) {
        if (tree.nodes[v].children.empty())
            state[v] = column[leaf_pos++];
        else
            internals.push_back(v);
    }

    double total = 0.0;
    const std::size_t combos = std::size_t(1) << (2 * internals.size());
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        for (std::size_t v : internals) {
            state[v] = static_cast<std::uint8_t>(c & 3);
            c >>= 2;
        }
        double p = 0.25;
        for (std::size_t v = 0; v + 1 < n; ++v) {
            const Matrix m = jc_transition(scale * beta[v]);
            p *= m(state[static_cast<std::size_t>(tree.nodes[v].parent)], state[v]);
        }
        total += p;
    }
    return total;
}

bool criterion_pruning() {
    const PhyloTree tree = parse_newick("((A:0.3,B:0.3):0.3,C:0.3);");
    Rng rng(404);
    bool ok = true;
    for (int draw = 0; draw < 50; ++draw) {
        std::vector<double> beta(tree.nodes.size(), 0.0);
        for (std::size_t v = 0; v + 1 < tree.nodes.size(); ++v) beta[v] = rng.uniform(0.01, 2.0);
        std::vector<std::uint8_t> col(3);
        for (auto& r : col) r = static_cast<std::uint8_t>(rng.below(4));
        const double scale = draw % 2 == 0 ? 1.0 : rng.uniform(0.1, 1.0);
        const double expected = enum_column_likelihood(tree, beta, scale, col);
        const double got = std::exp(column_log_likelihood(tree, beta, scale, col));
        if (!close_rel(got, expected, 1e-10)) {
            note("draw " + std::to_string(draw) + ": got " + std::to_string(got) + " want " +
                 std::to_string(expected));
            ok = false;
        }
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 6. Phylo-HMM fit recovers planted parameters and ranks conserved columns.

double rank_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks handle ties, then AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos*n_neg)
    std::vector<double> rank(scores.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (truth[k]) {
            pos_rank_sum += rank[k];
            ++n_pos;
        }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return 0.5;
    return (pos_rank_sum - 0.5 * double(n_pos) * double(n_pos + 1)) /
           (double(n_pos) * double(n_neg));
}

bool criterion_phylo_recovery() {
    const PhyloTree tree = parse_newick("((A:0.3,B:0.3):0.15,(C:0.3,D:0.3):0.15);");
    PhyloHmmParams truth;
    truth.mu = 0.1;
    truth.nu = 0.05;
    truth.rho = 0.3;
    truth.beta.assign(tree.nodes.size(), 0.0);
    for (std::size_t v = 0; v + 1 < tree.nodes.size(); ++v)
        truth.beta[v] = tree.nodes[v].branch;

    const auto sim = simulate_phylo_hmm(tree, truth, 2000, 31);
    const PhyloFitResult fit = fit_phylo_hmm(sim.alignment, tree, EmConfig(1e-6, 300, 1, 5));

    bool ok = true;
    if (std::abs(fit.params.rho - truth.rho) > 0.1) {
        note("rho " + std::to_string(fit.params.rho) + " vs 0.3");
        ok = false;
    }
    if (std::abs(fit.params.mu - truth.mu) > 0.05) {
        note("mu " + std::to_string(fit.params.mu) + " vs 0.1");
        ok = false;
    }
    if (std::abs(fit.params.nu - truth.nu) > 0.05) {
        note("nu " + std::to_string(fit.params.nu) + " vs 0.05");
        ok = false;
    }
    const std::vector<double> scores = conservation_scores(sim.alignment, tree, fit.params);
    const double auc = rank_auc(scores, sim.conserved);
    if (auc < 0.8) {
        note("AUC " + std::to_string(auc));
        ok = false;
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 7. Haplotype phasing matches the published worked example, and EM matches
//    or beats a fine simplex grid search on small pools.

double haplotype_grid_max(const HaplotypeProblem& problem, int steps) {
    const std::size_t m = problem.pool().size();
    auto loglik = [&](const std::vector<double>& theta) {
        double ll = 0.0;
        for (std::size_t i = 0; i < problem.individuals(); ++i) {
            double total = 0.0;
            for (const auto& p : problem.pairs_of(i)) total += p.weight * theta[p.j] * theta[p.k];
            if (!(total > 0.0)) return -std::numeric_limits<double>::infinity();
            ll += std::log(total);
        }
        return ll;
    };

    if (m == 1) return loglik({1.0});
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i) {
        const double a = double(i) / steps;
        if (m == 2) {
            best = std::max(best, loglik({a, 1.0 - a}));
        } else {
            for (int j = 0; i + j <= steps; ++j) {
                const double b = double(j) / steps;
                best = std::max(best, loglik({a, b, 1.0 - a - b}));
            }
        }
    }
    return best;
}

bool criterion_haplotype() {
    const GenotypeTable table = parse_genotypes(
        "ind1\tA/A\tC/C\tA/G\tC/C\n"
        "ind2\tA/G\tC/T\tG/G\tC/C\n"
        "ind3\tG/G\tT/T\tG/G\tT/T\n");

    bool ok = true;
    const HaplotypePool pool = build_pool(table);
    if (pool.size() != 6) {
        note("pool size " + std::to_string(pool.size()) + " != 6");
        ok = false;
    }
    const auto pairs1 = compatible_pairs(table.dosages[0]);
    if (pairs1.size() != 1 ||
        render_haplotype(pairs1[0].first, table.locus_alleles) != "ACAC" ||
        render_haplotype(pairs1[0].second, table.locus_alleles) != "ACGC") {
        note("individual 1 phase is not the unique {ACAC, ACGC}");
        ok = false;
    }
    if (compatible_pairs(table.dosages[1]).size() != 2) {
        note("individual 2 does not have exactly two compatible pairs");
        ok = false;
    }

    // random small tables whose pools stay within grid reach
    int checked = 0;
    for (std::uint64_t seed = 1; checked < 8 && seed < 200; ++seed) {
        Rng rng(9000 + seed);
        GenotypeTable t;
        const std::size_t individuals = 2 + rng.below(3);
        const std::size_t loci = 2 + rng.below(2);
        for (std::size_t j = 0; j < loci; ++j) t.locus_alleles.push_back({'A', 'G'});
        for (std::size_t i = 0; i < individuals; ++i) {
            t.ids.push_back("i" + std::to_string(i + 1));
            std::vector<std::uint8_t> row(loci);
            for (auto& d : row) d = static_cast<std::uint8_t>(rng.below(3));
            t.dosages.push_back(std::move(row));
        }
        const HaplotypeProblem problem(t);
        if (problem.pool().size() > 3) continue;
        ++checked;
        const auto ms = multi_start(problem, EmConfig(1e-10, 500, 4, seed));
        const double em_ll = problem.log_likelihood(ms.best);
        const double grid_ll = haplotype_grid_max(problem, 1000);
        if (em_ll < grid_ll - 1e-6) {
            note("EM " + std::to_string(em_ll) + " below grid " + std::to_string(grid_ll));
            ok = false;
        }
    }
    if (checked < 8) {
        note("only " + std::to_string(checked) + " small-pool tables found");
        ok = false;
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 8. Compatible-pair count follows max(1, 2^(h-1)).

bool criterion_pair_count() {
    bool ok = true;
    for (std::size_t h = 0; h <= 6; ++h) {
        std::vector<std::uint8_t> genotype = {0, 2};
        for (std::size_t t = 0; t < h; ++t) genotype.push_back(1);
        const auto pairs = compatible_pairs(genotype);
        const std::size_t expected = h == 0 ? 1 : (std::size_t(1) << (h - 1));
        if (pairs.size() != expected) {
            note("h=" + std::to_string(h) + ": " + std::to_string(pairs.size()) + " pairs, want " +
                 std::to_string(expected));
            ok = false;
        }
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 9. Mixture recovery, model selection, and RCEM unbiasedness.

bool criterion_mixture() {
    Rng rng(101);
    Matrix data(200, 1);
    for (int i = 0; i < 100; ++i) data(i, 0) = rng.normal();
    for (int i = 100; i < 200; ++i) data(i, 0) = 10.0 + rng.normal();

    bool ok = true;
    const EmConfig config(1e-8, 400, 14, 1);
    const MixtureFitResult fit = fit_mixture(data, 2, CovarianceFamily::full, config);
    double lo = fit.model.mean[0][0], hi = fit.model.mean[1][0];
    if (lo > hi) std::swap(lo, hi);
    if (std::abs(lo - 0.0) > 0.5 || std::abs(hi - 10.0) > 0.5) {
        note("means " + std::to_string(lo) + ", " + std::to_string(hi));
        ok = false;
    }

    const SelectKResult sel = select_k(data, {1, 2, 3, 4}, CovarianceFamily::full, config);
    if (sel.k != 2) {
        note("selected K = " + std::to_string(sel.k));
        ok = false;
    }

    const RcemConfig rcem{0.05, 12345};
    for (double gamma : {0.001, 0.01, 0.049}) {
        double sum = 0.0;
        const int draws = 100000;
        for (int t = 0; t < draws; ++t) {
            Responsibilities r(1, 1);
            r(0, 0) = gamma;
            rcem_reweight(r, rcem, std::uint64_t(t));
            sum += r(0, 0);
        }
        const double mean = sum / draws;
        const double sigma = std::sqrt((gamma * rcem.threshold - gamma * gamma) / draws);
        if (std::abs(mean - gamma) > 3.0 * sigma) {
            note("gamma " + std::to_string(gamma) + ": mean " + std::to_string(mean) +
                 " outside 3 sigma " + std::to_string(3.0 * sigma));
            ok = false;
        }
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 10. The command-line tool is deterministic under a fixed seed.

struct CliOutcome {
    int code = -1;
    std::string results;
    std::vector<std::string> artifact_bytes;
};

using Json = nlohmann::ordered_json;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CliOutcome run_tool(const fs::path& dir, const std::string& args, const std::string& report_name) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + EMTK_CLI_PATH + "' " + args +
                            " > /dev/null 2> /dev/null";
    const int status = std::system(cmd.c_str());
    CliOutcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (o.code != 0) return o;
    const Json report = Json::parse(slurp(dir / report_name));
    o.results = report["results"].dump();
    for (const auto& artifact : report["artifacts"])
        o.artifact_bytes.push_back(slurp(dir / std::string(artifact)));
    return o;
}

bool criterion_cli_determinism() {
    const fs::path dir =
        fs::temp_directory_path() / ("emtk_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    bool ok = true;

    {
        std::ofstream tree(dir / "tree.nwk");
        tree << "((A:0.2,B:0.25):0.1,(C:0.3,D:0.2):0.1);\n";
        std::ofstream prot(dir / "prot.fa");
        prot << ">p1\nMKVLAT\n>p2\nMKLLAT\n>p3\nMKVAT\n>p4\nMRVLAT\n";
        std::ofstream geno(dir / "geno.tsv");
        geno << "ind1\tA/C\tC/C\tA/G\tC/C\nind2\tA/C\tC/C\tA/G\tC/C\n"
                "ind3\tA/A\tC/C\tA/A\tC/C\nind4\tC/C\tC/C\tG/G\tC/C\n";
    }

    struct Stage {
        const char* label;
        std::string args;
        std::string report;
    };
    const std::vector<Stage> stages = {
        {"simulate motif",
         "simulate motif --num-seqs 10 --length 30 --width 5 --seed 6 --out sm.json", "sm.json"},
        {"simulate phylo", "simulate phylo --tree tree.nwk --length 150 --seed 6 --out sp.json",
         "sp.json"},
        {"simulate mixture", "simulate mixture --n 30 --k 2 --dim 1 --seed 6 --out sx.json",
         "sx.json"},
        {"motif", "motif --fasta sm_sequences.fasta --width 5 --seed 3 --out m.json", "m.json"},
        {"phmm train", "phmm train --fasta prot.fa --seed 3 --out tr.json", "tr.json"},
        {"phmm align", "phmm align --model tr_model.json --fasta prot.fa --out al.json",
         "al.json"},
        {"conserve",
         "conserve --alignment sp_alignment.fasta --tree tree.nwk --seed 3 --restarts 2 "
         "--out cv.json",
         "cv.json"},
        {"haplotype", "haplotype --genotypes geno.tsv --seed 3 --out hp.json", "hp.json"},
        {"cluster", "cluster --data sx_data.csv --k 2 --seed 3 --restarts 6 --out cl.json",
         "cl.json"},
    };

    for (const auto& stage : stages) {
        const CliOutcome first = run_tool(dir, stage.args, stage.report);
        const CliOutcome second = run_tool(dir, stage.args, stage.report);
        if (first.code != 0 || second.code != 0) {
            note(std::string(stage.label) + ": exit codes " + std::to_string(first.code) + "/" +
                 std::to_string(second.code));
            ok = false;
            continue;
        }
        if (first.results != second.results) {
            note(std::string(stage.label) + ": results payloads differ");
            ok = false;
        }
        if (first.artifact_bytes != second.artifact_bytes) {
            note(std::string(stage.label) + ": artifacts differ");
            ok = false;
        }
    }

    std::error_code ec;
    fs::remove_all(dir, ec);
    return ok;
}

}  // namespace

int main() {
    try {
        report(1, criterion_monotonicity(),
               "EM log-likelihood is nondecreasing for all five solvers (500 instances)");
        report(2, criterion_motif_oracle(),
               "motif E-step matches joint-placement enumeration (1e-10 relative)");
        report(3, criterion_profile_paths(),
               "profile forward equals the exhaustive path sum; Viterbi is the max path");
        report(4, criterion_jc_kernel(),
               "Jukes-Cantor closed form matches expm (1e-12) and composes (1e-10)");
        report(5, criterion_pruning(),
               "pruning equals ancestral-state enumeration on 50 random draws (1e-10)");
        report(6, criterion_phylo_recovery(),
               "phylo-HMM fit recovers planted mu/nu/rho; conservation AUC >= 0.8");
        report(7, criterion_haplotype(),
               "haplotype worked example reproduced; EM matches 0.001-step grid search");
        report(8, criterion_pair_count(), "compatible-pair count equals max(1, 2^(h-1))");
        report(9, criterion_mixture(),
               "mixture recovers planted means; BIC picks K=2; RCEM unbiased (3 sigma)");
        report(10, criterion_cli_determinism(),
               "CLI runs are byte-identical under a fixed seed");
    } catch (const std::exception& e) {
        std::printf("aborted: %s\n", e.what());
        return 99;
    }
    std::printf("%d/10 criteria passed\n", 10 - failures);
    return failures;
}
