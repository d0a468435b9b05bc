#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "emtk/phylo_hmm.hpp"

using namespace emtk;

namespace {

using Mat4 = std::array<double, 16>;

Mat4 mat_mul(const Mat4& a, const Mat4& b) {
    Mat4 c{};
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 4; ++j) c[i * 4 + j] += a[i * 4 + k] * b[k * 4 + j];
    return c;
}

// exp(beta * Q) for the unit-rate Jukes-Cantor generator, by scaling and
// squaring of the truncated power series. Independent of the closed form.
Mat4 jc_expm(double beta) {
    Mat4 a{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a[i * 4 + j] = beta * (i == j ? -1.0 : 1.0 / 3.0);
    int squarings = 0;
    double norm = 2.0 * beta;  // max row sum of |entries|
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

// Column likelihood by summing over every assignment of internal states.
double enum_column_likelihood(const PhyloTree& tree, const std::vector<double>& beta, double scale,
                              const std::vector<std::uint8_t>& column) {
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
    REQUIRE(leaf_pos == column.size());

    double total = 0.0;
    const std::size_t combos = std::size_t(1) << (2 * internals.size());
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        for (std::size_t v : internals) {
            state[v] = static_cast<std::uint8_t>(c & 3);
            c >>= 2;
        }
        double p = 0.25;  // root prior
        for (std::size_t v = 0; v + 1 < n; ++v) {
            const Matrix m = jc_transition(scale * beta[v]);
            p *= m(state[static_cast<std::size_t>(tree.nodes[v].parent)], state[v]);
        }
        total += p;
    }
    return total;
}

struct ChainOracle {
    std::vector<double> post_c;
    double xi[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double loglik = 0.0;
};

// Exhaustive 2^L path sum for the two-state chain.
ChainOracle enum_chain(const std::vector<double>& emit_c, const std::vector<double>& emit_n,
                       double mu, double nu) {
    const std::size_t len = emit_c.size();
    const double start[2] = {nu / (mu + nu), mu / (mu + nu)};
    const double trans[2][2] = {{1.0 - mu, mu}, {nu, 1.0 - nu}};
    auto emit = [&](std::size_t i, int s) { return s == 0 ? emit_c[i] : emit_n[i]; };

    ChainOracle out;
    out.post_c.assign(len, 0.0);
    double total = 0.0;
    std::vector<double> post(len, 0.0);
    double xi[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (std::size_t code = 0; code < (std::size_t(1) << len); ++code) {
        double p = start[code & 1] * emit(0, code & 1);
        for (std::size_t i = 1; i < len; ++i) {
            const int prev = (code >> (i - 1)) & 1;
            const int cur = (code >> i) & 1;
            p *= trans[prev][cur] * emit(i, cur);
        }
        total += p;
        for (std::size_t i = 0; i < len; ++i)
            if (((code >> i) & 1) == 0) post[i] += p;
        for (std::size_t i = 0; i + 1 < len; ++i) xi[(code >> i) & 1][(code >> (i + 1)) & 1] += p;
    }
    for (std::size_t i = 0; i < len; ++i) out.post_c[i] = post[i] / total;
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) out.xi[s][t] = xi[s][t] / total;
    out.loglik = std::log(total);
    return out;
}

PhyloTree four_leaf_tree() { return parse_newick("((A:0.3,B:0.3):0.15,(C:0.3,D:0.3):0.15);"); }

PhyloHmmParams tree_params(const PhyloTree& tree, double mu, double nu, double rho) {
    PhyloHmmParams p;
    p.mu = mu;
    p.nu = nu;
    p.rho = rho;
    p.beta.resize(tree.nodes.size(), 0.0);
    for (std::size_t v = 0; v + 1 < tree.nodes.size(); ++v) p.beta[v] = tree.nodes[v].branch;
    return p;
}

}  // namespace

TEST_CASE("newick parsing recovers topology, names, and branch lengths") {
    const PhyloTree tree = four_leaf_tree();
    REQUIRE(tree.nodes.size() == 7);
    const auto leaves = tree.leaf_indices();
    REQUIRE(leaves.size() == 4);
    std::vector<std::string> names;
    for (int v : leaves) names.push_back(tree.nodes[size_t(v)].name);
    REQUIRE(names == std::vector<std::string>{"A", "B", "C", "D"});
    for (int v : leaves) REQUIRE(tree.nodes[size_t(v)].branch == 0.3);
    REQUIRE(tree.nodes[size_t(tree.root())].children.size() == 2);
    // children precede parents
    for (std::size_t v = 0; v < tree.nodes.size(); ++v)
        for (int c : tree.nodes[v].children) REQUIRE(c < int(v));
    tree.validate_binary();

    const PhyloTree spaced = parse_newick("  ( A_1 : 0.5 , ( B.x : 1 , C-2 : 2e-1 ) : 0.25 ) ;");
    REQUIRE(spaced.leaf_count() == 3);
    REQUIRE(spaced.nodes[2].name == "C-2");
    REQUIRE(spaced.nodes[2].branch == Catch::Approx(0.2));

    const PhyloTree bare = parse_newick("(A,B);");
    REQUIRE_FALSE(bare.nodes[0].has_branch);
}

TEST_CASE("newick parser rejects malformed input") {
    REQUIRE_THROWS_AS(parse_newick("(A:1,B:1)"), NewickError);        // missing ';'
    REQUIRE_THROWS_AS(parse_newick("(A:1,B:1;"), NewickError);        // unbalanced
    REQUIRE_THROWS_AS(parse_newick("(A:1,B:1); x"), NewickError);     // trailing junk
    REQUIRE_THROWS_AS(parse_newick("(A:1,A:2);"), NewickError);       // duplicate leaf
    REQUIRE_THROWS_AS(parse_newick("(A:1,:2);"), NewickError);        // unnamed leaf
    REQUIRE_THROWS_AS(parse_newick("(A:-1,B:1);"), NewickError);      // negative length
    REQUIRE_THROWS_WITH(parse_newick("(A:1,B:1"), Catch::Matchers::ContainsSubstring("position"));
}

TEST_CASE("newick writer round-trips") {
    const std::string text = "((A:0.3,B:0.3):0.15,(C:0.3,D:0.3):0.15);";
    const PhyloTree tree = parse_newick(text);
    const PhyloTree again = parse_newick(write_newick(tree));
    REQUIRE(again.nodes.size() == tree.nodes.size());
    for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
        REQUIRE(again.nodes[v].name == tree.nodes[v].name);
        REQUIRE(again.nodes[v].children == tree.nodes[v].children);
        REQUIRE(again.nodes[v].branch == Catch::Approx(tree.nodes[v].branch).margin(1e-12));
    }
}

TEST_CASE("jc_transition limits, stochasticity, and input checks") {
    const Matrix id = jc_transition(0.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            REQUIRE(id(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-15));

    const Matrix far = jc_transition(50.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) REQUIRE(far(i, j) == Catch::Approx(0.25).margin(1e-12));

    for (double beta : {0.01, 0.3, 1.0, 4.2}) {
        const Matrix p = jc_transition(beta);
        for (std::size_t i = 0; i < 4; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                row += p(i, j);
                REQUIRE(p(i, j) > 0.0);
            }
            REQUIRE(row == Catch::Approx(1.0).margin(1e-14));
        }
    }
    REQUIRE_THROWS_AS(jc_transition(-0.1), std::invalid_argument);
}

TEST_CASE("jc_transition matches a matrix exponential oracle") {
    for (double beta : {0.05, 0.5, 1.7, 3.0}) {
        const Matrix p = jc_transition(beta);
        const Mat4 e = jc_expm(beta);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                REQUIRE(p(i, j) == Catch::Approx(e[i * 4 + j]).margin(1e-12));
    }
}

TEST_CASE("jc_transition satisfies Chapman-Kolmogorov") {
    for (auto [a, b] : std::vector<std::pair<double, double>>{{0.1, 0.2}, {0.4, 1.3}, {0.05, 2.0}}) {
        const Matrix pa = jc_transition(a);
        const Matrix pb = jc_transition(b);
        const Matrix pab = jc_transition(a + b);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 4; ++k) acc += pa(i, k) * pb(k, j);
                REQUIRE(acc == Catch::Approx(pab(i, j)).margin(1e-10));
            }
    }
}

TEST_CASE("column likelihood on degenerate trees") {
    const PhyloTree single = parse_newick("A;");
    for (std::uint8_t r = 0; r < 4; ++r) {
        const std::vector<std::uint8_t> col = {r};
        REQUIRE(column_likelihood(single, 1.0, col) == Catch::Approx(0.25).margin(1e-15));
    }

    const PhyloTree pair = parse_newick("(A:0.0,B:0.0);");
    const std::vector<std::uint8_t> same = {2, 2};
    const std::vector<std::uint8_t> differ = {2, 3};
    REQUIRE(column_likelihood(pair, 1.0, same) == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(column_likelihood(pair, 1.0, differ) == 0.0);
}

TEST_CASE("three-leaf column likelihood equals the 16-term enumeration") {
    const PhyloTree tree = parse_newick("((A:0.3,B:0.3):0.3,C:0.3);");
    std::vector<double> beta(tree.nodes.size(), 0.3);
    beta.back() = 0.0;
    const std::vector<std::uint8_t> col = {0, 0, 2};  // A, A, G
    const double expected = enum_column_likelihood(tree, beta, 1.0, col);
    REQUIRE(column_likelihood(tree, 1.0, col) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pruning agrees with ancestral-state enumeration") {
    Rng rng(404);
    const std::vector<std::string> shapes = {
        "((A:0.3,B:0.3):0.15,(C:0.3,D:0.3):0.15);",
        "(((A:0.1,B:0.2):0.3,C:0.4):0.5,D:0.6);",
        "((A:1.0,(B:0.5,C:0.5):0.5):0.2,(D:0.7,E:0.7):0.2);",
    };
    for (const auto& shape : shapes) {
        const PhyloTree tree = parse_newick(shape);
        const std::size_t n = tree.nodes.size();
        for (int rep = 0; rep < 6; ++rep) {
            std::vector<double> beta(n, 0.0);
            for (std::size_t v = 0; v + 1 < n; ++v) beta[v] = rng.uniform(0.01, 2.0);
            std::vector<std::uint8_t> col(tree.leaf_count());
            for (auto& r : col) r = static_cast<std::uint8_t>(rng.below(4));
            const double scale = (rep % 2 == 0) ? 1.0 : 0.37;
            const double expected = enum_column_likelihood(tree, beta, scale, col);
            const double got = std::exp(column_log_likelihood(tree, beta, scale, col));
            REQUIRE(got == Catch::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("flat emissions leave the chain at its stationary distribution") {
    Rng rng(77);
    const std::size_t len = 50;
    std::vector<double> emit(len);
    for (auto& e : emit) e = rng.uniform(0.1, 2.0);
    const double mu = 0.23, nu = 0.11;
    const ChainResult r = chain_forward_backward(emit, emit, mu, nu);
    const double stationary = nu / (mu + nu);
    for (double p : r.posterior_c) REQUIRE(p == Catch::Approx(stationary).margin(1e-12));
    double log_sum = 0.0;
    for (double e : emit) log_sum += std::log(e);
    REQUIRE(r.loglik == Catch::Approx(log_sum).margin(1e-9));
}

TEST_CASE("single-column chain is Bayes rule with the stationary prior") {
    const std::vector<double> ec = {0.3}, en = {0.1};
    const ChainResult r = chain_forward_backward(ec, en, 0.2, 0.1);
    const double prior_c = 0.1 / 0.3;
    const double expected = prior_c * 0.3 / (prior_c * 0.3 + (1.0 - prior_c) * 0.1);
    REQUIRE(r.posterior_c[0] == Catch::Approx(expected).epsilon(1e-12));
    REQUIRE(r.loglik == Catch::Approx(std::log(prior_c * 0.3 + (1.0 - prior_c) * 0.1)).epsilon(1e-12));
    REQUIRE(r.xi_cc + r.xi_cn + r.xi_nc + r.xi_nn == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("chain forward-backward matches exhaustive path sums") {
    Rng rng(505);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t len = 3 + rep % 3;
        std::vector<double> ec(len), en(len);
        for (std::size_t i = 0; i < len; ++i) {
            ec[i] = rng.uniform(0.05, 1.5);
            en[i] = rng.uniform(0.05, 1.5);
        }
        const double mu = rng.uniform(0.05, 0.9);
        const double nu = rng.uniform(0.05, 0.9);
        const ChainResult got = chain_forward_backward(ec, en, mu, nu);
        const ChainOracle want = enum_chain(ec, en, mu, nu);
        REQUIRE(got.loglik == Catch::Approx(want.loglik).epsilon(1e-12));
        for (std::size_t i = 0; i < len; ++i)
            REQUIRE(got.posterior_c[i] == Catch::Approx(want.post_c[i]).margin(1e-12));
        REQUIRE(got.xi_cc == Catch::Approx(want.xi[0][0]).margin(1e-12));
        REQUIRE(got.xi_cn == Catch::Approx(want.xi[0][1]).margin(1e-12));
        REQUIRE(got.xi_nc == Catch::Approx(want.xi[1][0]).margin(1e-12));
        REQUIRE(got.xi_nn == Catch::Approx(want.xi[1][1]).margin(1e-12));
    }
}

TEST_CASE("chain transition counts total one per adjacent pair") {
    Rng rng(606);
    const std::size_t len = 40;
    std::vector<double> ec(len), en(len);
    for (std::size_t i = 0; i < len; ++i) {
        ec[i] = rng.uniform(0.01, 1.0);
        en[i] = rng.uniform(0.01, 1.0);
    }
    const ChainResult r = chain_forward_backward(ec, en, 0.15, 0.4);
    REQUIRE(r.xi_cc + r.xi_cn + r.xi_nc + r.xi_nn == Catch::Approx(double(len - 1)).margin(1e-10));
    double post_head = 0.0;
    for (std::size_t i = 0; i + 1 < len; ++i) post_head += r.posterior_c[i];
    REQUIRE(r.xi_cc + r.xi_cn == Catch::Approx(post_head).margin(1e-8));
    for (double p : r.posterior_c) {
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
    }
}

TEST_CASE("chain rejects columns dead in both states, naming the column") {
    std::vector<double> ec = {0.5, 0.5, 0.0, 0.5};
    std::vector<double> en = {0.5, 0.5, 0.0, 0.5};
    REQUIRE_THROWS_WITH(chain_forward_backward(ec, en, 0.2, 0.2),
                        Catch::Matchers::ContainsSubstring("column 3"));
    ec[2] = 0.1;  // one live state is fine
    REQUIRE_NOTHROW(chain_forward_backward(ec, en, 0.2, 0.2));
    REQUIRE_THROWS_AS(chain_forward_backward(ec, en, 0.0, 0.2), std::invalid_argument);
    REQUIRE_THROWS_AS(chain_forward_backward(ec, en, 0.2, 1.0), std::invalid_argument);
}

TEST_CASE("simulation is deterministic per seed and mixes states correctly") {
    const PhyloTree tree = four_leaf_tree();
    const PhyloHmmParams params = tree_params(tree, 0.5, 0.5, 0.3);
    const auto a = simulate_phylo_hmm(tree, params, 10000, 99);
    const auto b = simulate_phylo_hmm(tree, params, 10000, 99);
    REQUIRE(a.alignment == b.alignment);
    REQUIRE(a.conserved == b.conserved);
    const auto c = simulate_phylo_hmm(tree, params, 10000, 100);
    REQUIRE(a.conserved != c.conserved);

    REQUIRE(a.alignment.ids == std::vector<std::string>{"A", "B", "C", "D"});
    REQUIRE(a.alignment.width() == 10000);

    // mu = nu = 1/2 makes the state sequence iid fair coin flips
    const double freq =
        std::accumulate(a.conserved.begin(), a.conserved.end(), 0.0) / double(a.conserved.size());
    REQUIRE(std::abs(freq - 0.5) < 3.0 * std::sqrt(0.25 / 10000.0));

    // residues are marginally uniform
    std::array<double, 4> base{};
    for (const auto& row : a.alignment.rows)
        for (std::uint8_t r : row) base[r] += 1.0;
    const double cells = 4.0 * 10000.0;
    for (double count : base) REQUIRE(std::abs(count / cells - 0.25) < 0.01);
}

TEST_CASE("strong contraction makes conserved columns monomorphic") {
    const PhyloTree tree = parse_newick("((A:1.0,B:1.0):1.0,(C:1.0,D:1.0):1.0);");
    const PhyloHmmParams params = tree_params(tree, 0.1, 0.1, 0.01);
    const auto sim = simulate_phylo_hmm(tree, params, 4000, 7);

    double predicted = 1.0;  // P(every node keeps the root residue)
    for (std::size_t v = 0; v + 1 < tree.nodes.size(); ++v)
        predicted *= jc_transition(params.rho * params.beta[v])(0, 0);

    std::size_t conserved_total = 0, conserved_mono = 0, neutral_total = 0, neutral_mono = 0;
    for (std::size_t i = 0; i < sim.alignment.width(); ++i) {
        bool mono = true;
        for (std::size_t k = 1; k < sim.alignment.depth(); ++k)
            mono = mono && sim.alignment.rows[k][i] == sim.alignment.rows[0][i];
        if (sim.conserved[i]) {
            ++conserved_total;
            conserved_mono += mono;
        } else {
            ++neutral_total;
            neutral_mono += mono;
        }
    }
    REQUIRE(conserved_total > 1000);
    REQUIRE(neutral_total > 1000);
    const double conserved_frac = double(conserved_mono) / double(conserved_total);
    const double sigma = std::sqrt(predicted * (1.0 - predicted) / double(conserved_total));
    REQUIRE(conserved_frac >= predicted - 3.0 * sigma);
    REQUIRE(double(neutral_mono) / double(neutral_total) < 0.25);
}

TEST_CASE("fit recovers planted chain and contraction parameters") {
    const PhyloTree tree = four_leaf_tree();
    const PhyloHmmParams truth = tree_params(tree, 0.1, 0.05, 0.3);
    const auto sim = simulate_phylo_hmm(tree, truth, 2000, 31);

    const PhyloFitResult fit = fit_phylo_hmm(sim.alignment, tree, EmConfig(1e-6, 300, 1, 5));
    REQUIRE(std::abs(fit.params.rho - truth.rho) <= 0.1);
    REQUIRE(std::abs(fit.params.mu - truth.mu) <= 0.05);
    REQUIRE(std::abs(fit.params.nu - truth.nu) <= 0.05);

    const auto& ll = fit.trace.loglik_per_iter;
    REQUIRE(ll.size() >= 2);
    for (std::size_t i = 1; i < ll.size(); ++i) REQUIRE(ll[i] >= ll[i - 1] - 1e-9);

    // fitted likelihood dominates the generating parameters
    PhyloProblem problem(sim.alignment, tree);
    REQUIRE(ll.back() >= problem.log_likelihood(truth) - 1e-6 * std::abs(ll.back()));

    // conservation scores separate the planted states
    const std::vector<double> scores = conservation_scores(sim.alignment, tree, fit.params);
    double mean_c = 0.0, mean_n = 0.0;
    std::size_t n_c = 0, n_n = 0;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        REQUIRE(scores[i] >= 0.0);
        REQUIRE(scores[i] <= 1.0);
        if (sim.conserved[i]) {
            mean_c += scores[i];
            ++n_c;
        } else {
            mean_n += scores[i];
            ++n_n;
        }
        agree += (scores[i] > 0.5) == (sim.conserved[i] != 0);
    }
    mean_c /= double(n_c);
    mean_n /= double(n_n);
    REQUIRE(mean_c - mean_n > 0.2);
    REQUIRE(double(agree) / double(scores.size()) > 0.7);
}

TEST_CASE("maximization step lands on a box-constrained stationary point") {
    const PhyloTree tree = four_leaf_tree();
    const PhyloHmmParams truth = tree_params(tree, 0.1, 0.05, 0.3);
    const auto sim = simulate_phylo_hmm(tree, truth, 600, 13);
    PhyloProblem problem(sim.alignment, tree);

    const PhyloFitResult fit = fit_phylo_hmm(sim.alignment, tree, EmConfig(1e-6, 200, 1, 3));
    const auto es = problem.expect(fit.params);
    const PhyloHmmParams refined = problem.maximize(es.stats, fit.params);
    REQUIRE(problem.log_likelihood(refined) >= es.loglik - 1e-9);

    // projected finite-difference gradient of both objective pieces at the
    // point the maximizer returned
    // minimization convention: g is the gradient of -Q, so a positive g at a
    // lower bound (or negative at an upper bound) pushes out of the box
    auto projected = [](double x, double lo, double hi, double g) {
        if (x <= lo + 1e-9 && g > 0.0) return 0.0;
        if (x >= hi - 1e-9 && g < 0.0) return 0.0;
        return g;
    };
    double sq_norm = 0.0;
    {
        auto q = [&](double mu, double nu) { return problem.expected_chain_loglik(es.stats, mu, nu); };
        const double h = 1e-6;
        double g_mu = (q(refined.mu + h, refined.nu) - q(refined.mu - h, refined.nu)) / (2 * h);
        double g_nu = (q(refined.mu, refined.nu + h) - q(refined.mu, refined.nu - h)) / (2 * h);
        g_mu = projected(refined.mu, 1e-6, 1.0 - 1e-6, -g_mu);
        g_nu = projected(refined.nu, 1e-6, 1.0 - 1e-6, -g_nu);
        sq_norm += g_mu * g_mu + g_nu * g_nu;
    }
    {
        std::vector<double> x = {refined.rho};
        for (std::size_t v = 0; v + 1 < tree.nodes.size(); ++v) x.push_back(refined.beta[v]);
        auto q = [&](const std::vector<double>& v) {
            std::vector<double> beta(tree.nodes.size(), 0.0);
            for (std::size_t e = 1; e < v.size(); ++e) beta[e - 1] = v[e];
            return problem.expected_tree_loglik(es.stats, v[0], beta);
        };
        for (std::size_t i = 0; i < x.size(); ++i) {
            std::vector<double> hi_x = x, lo_x = x;
            const double h = 1e-6 * (1.0 + std::abs(x[i]));
            hi_x[i] += h;
            lo_x[i] -= h;
            double g = (q(hi_x) - q(lo_x)) / (2 * h);
            const double lo = i == 0 ? PhyloHmmParams::rho_lo : PhyloHmmParams::beta_lo;
            const double hi = i == 0 ? PhyloHmmParams::rho_hi : PhyloHmmParams::beta_hi;
            g = projected(x[i], lo, hi, -g);
            sq_norm += g * g;
        }
    }
    REQUIRE(std::sqrt(sq_norm) < 1e-4);
}

TEST_CASE("fit tolerates data generated at the contraction ceiling") {
    const PhyloTree tree = four_leaf_tree();
    const PhyloHmmParams truth = tree_params(tree, 0.2, 0.2, 0.999);
    const auto sim = simulate_phylo_hmm(tree, truth, 400, 17);

    PhyloProblem problem(sim.alignment, tree);
    const PhyloFitResult fit = fit_phylo_hmm(sim.alignment, tree, EmConfig(1e-6, 120, 2, 9));
    const double at_truth = problem.log_likelihood(truth);
    REQUIRE(fit.trace.loglik_per_iter.back() >= at_truth - 1e-6 * std::abs(at_truth));
    for (std::size_t i = 1; i < fit.trace.loglik_per_iter.size(); ++i)
        REQUIRE(fit.trace.loglik_per_iter[i] >= fit.trace.loglik_per_iter[i - 1] - 1e-9);
}

TEST_CASE("phylo problem rejects malformed inputs") {
    const PhyloTree tree = four_leaf_tree();
    const PhyloHmmParams params = tree_params(tree, 0.1, 0.1, 0.5);
    auto sim = simulate_phylo_hmm(tree, params, 20, 1);

    Alignment gapped = sim.alignment;
    gapped.rows[1][4] = Alignment::gap;
    REQUIRE_THROWS_WITH(PhyloProblem(gapped, tree), Catch::Matchers::ContainsSubstring("column 5"));

    Alignment renamed = sim.alignment;
    renamed.ids[2] = "Z";
    REQUIRE_THROWS_WITH(PhyloProblem(renamed, tree), Catch::Matchers::ContainsSubstring("'C'"));

    Alignment short_one = sim.alignment;
    short_one.ids.pop_back();
    short_one.rows.pop_back();
    REQUIRE_THROWS_AS(PhyloProblem(short_one, tree), std::invalid_argument);

    const PhyloTree trifurcating = parse_newick("(A:1,B:1,C:1,D:1);");
    REQUIRE_THROWS_WITH(PhyloProblem(sim.alignment, trifurcating),
                        Catch::Matchers::ContainsSubstring("not binary"));

    PhyloHmmParams bad = params;
    bad.rho = 0.99999;
    REQUIRE_THROWS_AS(conservation_scores(sim.alignment, tree, bad), std::invalid_argument);
}
