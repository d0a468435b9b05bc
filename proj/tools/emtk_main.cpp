// emtk command-line front end: one subcommand per solver, uniform seeding
// and configuration flags, JSON run reports plus tabular artifacts.
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "emtk/haplotype.hpp"
#include "emtk/json_io.hpp"
#include "emtk/newick.hpp"
#include "emtk/seqio.hpp"
#include "emtk/table_io.hpp"

namespace {

using namespace emtk;

// Flag combinations the parser cannot reject on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::uint64_t seed = 0;
    int restarts = 3;
    double tol = 1e-6;
    int max_iter = 500;
    std::string out;
    std::string format = "tsv";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "seed for all randomness (default 0)");
    cmd->add_option("--restarts", o.restarts, "independent EM restarts (default 3)")
        ->check(CLI::Range(1, 1000000));
    cmd->add_option("--tol", o.tol, "relative log-likelihood convergence threshold")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", o.max_iter, "iteration cap per restart (default 500)")
        ->check(CLI::Range(1, 100000000));
    cmd->add_option("--out", o.out, "report path (default <command>_report.json)");
    cmd->add_option("--format", o.format, "stdout summary format (default tsv)")
        ->check(CLI::IsMember({"json", "tsv"}));
}

EmConfig em_config(const CommonOpts& o) {
    return EmConfig(o.tol, o.max_iter, o.restarts, o.seed);
}

Json common_config_json(const CommonOpts& o) {
    return Json{{"seed", o.seed},
                {"restarts", o.restarts},
                {"tol", o.tol},
                {"max_iter", o.max_iter}};
}

// Collects everything one run produces, then writes it in a single pass:
// artifacts first, the JSON report last, all atomically.
struct RunContext {
    explicit RunContext(std::string solver, const CommonOpts& o)
        : name(std::move(solver)), opts(o), started(std::chrono::steady_clock::now()) {}

    std::string name;
    CommonOpts opts;
    std::chrono::steady_clock::time_point started;
    Json inputs = Json::object();
    Json config = Json::object();
    Json results = Json::object();
    Json trace;
    std::vector<std::pair<std::string, std::string>> artifacts;
    std::vector<std::pair<std::string, std::string>> summary;

    std::string load_input(const std::string& path) {
        std::string bytes = read_text_file(path);
        inputs[path] = fnv1a_digest(bytes);
        return bytes;
    }

    std::string report_path() const {
        return opts.out.empty() ? name + "_report.json" : opts.out;
    }

    // artifacts sit next to the report: <base>_suffix
    std::string artifact_path(const std::string& suffix) const {
        std::string base = report_path();
        const std::string ext = ".json";
        if (base.size() > ext.size() && base.compare(base.size() - ext.size(), ext.size(), ext) == 0)
            base.resize(base.size() - ext.size());
        return base + "_" + suffix;
    }

    void add_artifact(const std::string& suffix, std::string content) {
        artifacts.emplace_back(artifact_path(suffix), std::move(content));
    }

    int finish() {
        Json files = Json::array();
        for (const auto& [path, content] : artifacts) {
            atomic_write_text(path, content);
            files.push_back(path);
        }
        const auto elapsed = std::chrono::steady_clock::now() - started;
        Json report{{"solver", name},
                    {"inputs", inputs},
                    {"config", config},
                    {"results", results},
                    {"trace", trace},
                    {"artifacts", files},
                    {"duration_ms",
                     std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()}};
        atomic_write_text(report_path(), report.dump(2) + "\n");
        if (opts.format == "json") {
            std::cout << report.dump(2) << "\n";
        } else {
            for (const auto& [k, v] : summary) std::cout << k << "\t" << v << "\n";
            std::cout << "report\t" << report_path() << "\n";
        }
        return 0;
    }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double final_loglik(const EmTrace& trace) { return trace.loglik_per_iter.back(); }

// ---------------------------------------------------------------- motif ----

struct MotifOpts {
    std::string fasta;
    std::size_t width = 8;
    std::string mode = "oops";
    double alpha = 0.5;
    double p0 = 0.05;
    std::string alphabet = "dna";
};

int run_motif(const MotifOpts& o, const CommonOpts& common) {
    RunContext ctx("motif", common);
    const Alphabet ab = alphabet_from_name(o.alphabet);
    const auto seqs = parse_fasta(ctx.load_input(o.fasta), ab);

    MotifConfig mc;
    mc.width = o.width;
    mc.mode = o.mode == "oops" ? MotifMode::oops : MotifMode::zoops;
    mc.alpha = o.alpha;
    mc.p0 = o.p0;
    const MotifResult res = discover(seqs, ab, mc, em_config(common));

    ctx.config = common_config_json(common);
    ctx.config["width"] = o.width;
    ctx.config["mode"] = o.mode;
    ctx.config["alpha"] = o.alpha;
    if (mc.mode == MotifMode::zoops) ctx.config["p0"] = o.p0;
    ctx.trace = trace_json(res.trace);

    Json sites = Json::array();
    std::ostringstream tsv;
    tsv << "sequence\tstart\tsite\tposterior\n";
    for (std::size_t k = 0; k < seqs.size(); ++k) {
        const std::size_t start = res.best_site[k];
        std::string site;
        for (std::size_t j = 0; j < o.width; ++j)
            site.push_back(ab.letter(seqs[k].residues[start + j]));
        const double post = res.posterior[k][start];
        sites.push_back(Json{{"sequence", seqs[k].id},
                             {"start", start + 1},
                             {"site", site},
                             {"posterior", post}});
        tsv << seqs[k].id << "\t" << (start + 1) << "\t" << site << "\t" << fmt(post) << "\n";
    }
    ctx.add_artifact("sites.tsv", tsv.str());

    ctx.results = Json{{"model", motif_model_json(res.model, ab)},
                       {"loglik", final_loglik(res.trace)},
                       {"best_restart", res.best_restart},
                       {"sites", std::move(sites)}};
    if (res.p0) ctx.results["p0"] = *res.p0;

    ctx.summary = {{"sequences", std::to_string(seqs.size())},
                   {"width", std::to_string(o.width)},
                   {"mode", o.mode},
                   {"loglik", fmt(final_loglik(res.trace))},
                   {"sites", ctx.artifact_path("sites.tsv")}};
    return ctx.finish();
}

// ----------------------------------------------------------------- phmm ----

struct PhmmTrainOpts {
    std::string fasta;
    double alpha = 0.5;
    std::string alphabet = "protein";
};

int run_phmm_train(const PhmmTrainOpts& o, const CommonOpts& common) {
    RunContext ctx("phmm_train", common);
    const Alphabet ab = alphabet_from_name(o.alphabet);
    const auto seqs = parse_fasta(ctx.load_input(o.fasta), ab);
    const ProfileTrainResult res = train(seqs, ab, em_config(common), o.alpha);

    ctx.config = common_config_json(common);
    ctx.config["alpha"] = o.alpha;
    ctx.config["alphabet"] = o.alphabet;
    ctx.trace = trace_json(res.trace);

    const Json model = profile_json(res.model, ab);
    ctx.add_artifact("model.json", model.dump(2) + "\n");
    ctx.results = Json{{"model", model},
                       {"match_states", res.model.num_match()},
                       {"loglik", final_loglik(res.trace)},
                       {"best_restart", res.best_restart}};
    ctx.summary = {{"sequences", std::to_string(seqs.size())},
                   {"match_states", std::to_string(res.model.num_match())},
                   {"loglik", fmt(final_loglik(res.trace))},
                   {"model", ctx.artifact_path("model.json")}};
    return ctx.finish();
}

struct PhmmAlignOpts {
    std::string model;
    std::string fasta;
};

int run_phmm_align(const PhmmAlignOpts& o, const CommonOpts& common) {
    RunContext ctx("phmm_align", common);
    Json model_doc;
    try {
        model_doc = Json::parse(ctx.load_input(o.model));
    } catch (const Json::parse_error& e) {
        throw std::runtime_error("model file '" + o.model + "' is not valid JSON: " + e.what());
    }
    Alphabet ab = Alphabet::protein();
    const ProfileHmm hmm = profile_from_json(model_doc, ab);
    const auto seqs = parse_fasta(ctx.load_input(o.fasta), ab);
    const Alignment aln = align(hmm, seqs);

    ctx.config = common_config_json(common);
    ctx.trace = Json::object();

    Json rows = Json::array();
    std::vector<double> scores;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        std::string row;
        for (auto c : aln.rows[i]) row.push_back(c == Alignment::gap ? '-' : ab.letter(c));
        scores.push_back(viterbi(hmm, seqs[i]).second);
        rows.push_back(Json{{"id", aln.ids[i]}, {"row", row}, {"log_score", scores.back()}});
    }
    ctx.add_artifact("aligned.fasta", write_alignment(aln, ab));
    ctx.results = Json{{"columns", aln.width()},
                       {"match_states", hmm.num_match()},
                       {"alignment", std::move(rows)}};
    ctx.summary = {{"sequences", std::to_string(seqs.size())},
                   {"columns", std::to_string(aln.width())},
                   {"aligned", ctx.artifact_path("aligned.fasta")}};
    return ctx.finish();
}

// ------------------------------------------------------------- conserve ----

struct ConserveOpts {
    std::string alignment;
    std::string tree;
};

int run_conserve(const ConserveOpts& o, const CommonOpts& common) {
    RunContext ctx("conserve", common);
    const Alignment aln = parse_alignment(ctx.load_input(o.alignment), Alphabet::dna());
    const PhyloTree tree = parse_newick(ctx.load_input(o.tree));

    std::set<std::string> tree_ids, aln_ids(aln.ids.begin(), aln.ids.end());
    for (int v : tree.leaf_indices()) tree_ids.insert(tree.nodes[static_cast<std::size_t>(v)].name);
    if (tree_ids != aln_ids) {
        std::ostringstream msg;
        msg << "tree and alignment ids differ;";
        auto list_diff = [&](const std::set<std::string>& a, const std::set<std::string>& b,
                             const char* label) {
            std::vector<std::string> only;
            std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only));
            if (only.empty()) return;
            msg << " only in " << label << ":";
            for (const auto& id : only) msg << " " << id;
            msg << ";";
        };
        list_diff(tree_ids, aln_ids, "tree");
        list_diff(aln_ids, tree_ids, "alignment");
        throw std::runtime_error(msg.str());
    }

    const PhyloFitResult fit = fit_phylo_hmm(aln, tree, em_config(common));
    const std::vector<double> scores = conservation_scores(aln, tree, fit.params);

    ctx.config = common_config_json(common);
    ctx.trace = trace_json(fit.trace);

    std::ostringstream tsv;
    tsv << "column\tscore\tconserved\n";
    std::size_t called = 0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        const bool call = scores[c] >= 0.5;
        called += call;
        tsv << (c + 1) << "\t" << fmt(scores[c]) << "\t" << (call ? 1 : 0) << "\n";
    }
    ctx.add_artifact("track.tsv", tsv.str());

    ctx.results = Json{{"params", phylo_params_json(fit.params, tree)},
                       {"loglik", final_loglik(fit.trace)},
                       {"best_restart", fit.best_restart},
                       {"columns", scores.size()},
                       {"conserved_columns", called},
                       {"track", scores}};
    ctx.summary = {{"columns", std::to_string(scores.size())},
                   {"conserved_columns", std::to_string(called)},
                   {"rho", fmt(fit.params.rho)},
                   {"loglik", fmt(final_loglik(fit.trace))},
                   {"track", ctx.artifact_path("track.tsv")}};
    return ctx.finish();
}

// ------------------------------------------------------------ haplotype ----

struct HaplotypeOpts {
    std::string genotypes;
};

int run_haplotype(const HaplotypeOpts& o, const CommonOpts& common) {
    RunContext ctx("haplotype", common);
    const GenotypeTable table = parse_genotypes(ctx.load_input(o.genotypes));
    const HaplotypePhaseResult res = phase_genotypes(table, em_config(common));

    ctx.config = common_config_json(common);
    ctx.trace = trace_json(res.trace);

    Json pool = Json::array();
    for (std::size_t j = 0; j < res.pool.size(); ++j)
        pool.push_back(Json{{"haplotype", render_haplotype(res.pool.haplotypes[j],
                                                           table.locus_alleles)},
                            {"frequency", res.pool.theta[j]}});

    Json phases = Json::array();
    std::ostringstream tsv;
    tsv << "individual\thap1\thap2\tposterior\n";
    for (std::size_t i = 0; i < table.individuals(); ++i) {
        const PhaseCall& call = res.calls[i];
        const std::string h1 =
            render_haplotype(res.pool.haplotypes[call.first], table.locus_alleles);
        const std::string h2 =
            render_haplotype(res.pool.haplotypes[call.second], table.locus_alleles);
        phases.push_back(Json{{"individual", table.ids[i]},
                              {"hap1", h1},
                              {"hap2", h2},
                              {"posterior", call.posterior}});
        tsv << table.ids[i] << "\t" << h1 << "\t" << h2 << "\t" << fmt(call.posterior) << "\n";
    }
    ctx.add_artifact("phase.tsv", tsv.str());

    ctx.results = Json{{"individuals", table.individuals()},
                       {"loci", table.loci()},
                       {"pool", std::move(pool)},
                       {"loglik", final_loglik(res.trace)},
                       {"best_restart", res.best_restart},
                       {"phases", std::move(phases)}};
    ctx.summary = {{"individuals", std::to_string(table.individuals())},
                   {"loci", std::to_string(table.loci())},
                   {"pool_size", std::to_string(res.pool.size())},
                   {"loglik", fmt(final_loglik(res.trace))},
                   {"phase", ctx.artifact_path("phase.tsv")}};
    return ctx.finish();
}

// -------------------------------------------------------------- cluster ----

struct ClusterOpts {
    std::string data;
    std::size_t k = 0;
    std::string k_range;
    std::string family = "full";
    double rcem_c = -1.0;
    bool k_given = false;
    bool k_range_given = false;
    bool rcem_given = false;
};

std::pair<std::size_t, std::size_t> parse_k_range(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw UsageError("--k-range expects lo:hi, got '" + text + "'");
    std::size_t lo = 0, hi = 0;
    try {
        lo = std::stoul(text.substr(0, colon));
        hi = std::stoul(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw UsageError("--k-range expects lo:hi, got '" + text + "'");
    }
    if (lo < 1 || hi < lo)
        throw UsageError("--k-range needs 1 <= lo <= hi, got '" + text + "'");
    return {lo, hi};
}

int run_cluster(const ClusterOpts& o, const CommonOpts& common) {
    if (!o.k_given && !o.k_range_given) throw UsageError("cluster needs --k or --k-range");
    if (o.rcem_given && o.k_range_given)
        throw UsageError("--rcem-c applies to a fixed --k, not --k-range");

    RunContext ctx("cluster", common);
    const NumericTable table = parse_numeric_table(ctx.load_input(o.data));
    const CovarianceFamily family = *family_from_name(o.family);

    ctx.config = common_config_json(common);
    ctx.config["family"] = o.family;

    std::optional<RcemConfig> rcem;
    if (o.rcem_given) {
        rcem = RcemConfig{o.rcem_c, common.seed};
        rcem->validate();
        ctx.config["rcem_c"] = o.rcem_c;
    }

    MixtureFitResult fit;
    Json bic_table;
    if (o.k_given) {
        ctx.config["k"] = o.k;
        fit = fit_mixture(table.values, o.k, family, em_config(common), rcem);
    } else {
        ctx.config["k_range"] = o.k_range;
        const auto [lo, hi] = parse_k_range(o.k_range);
        std::vector<std::size_t> ks;
        for (std::size_t k = lo; k <= hi; ++k) ks.push_back(k);
        SelectKResult sel = select_k(table.values, ks, family, em_config(common));
        bic_table = Json::array();
        for (const auto& [k, score] : sel.bic_table)
            bic_table.push_back(Json{{"k", k}, {"bic", score}});
        fit = std::move(sel.fit);
    }
    const double score = bic(fit.model, table.values);

    ctx.trace = trace_json(fit.trace);

    Json assignments = Json::array();
    std::ostringstream tsv;
    tsv << "row\tcomponent\tposterior\n";
    for (std::size_t i = 0; i < table.values.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < fit.model.components(); ++k)
            if (fit.responsibilities(i, k) > fit.responsibilities(i, best)) best = k;
        const std::string row_id =
            table.row_ids.empty() ? std::to_string(i + 1) : table.row_ids[i];
        assignments.push_back(Json{{"row", row_id},
                                   {"component", best + 1},
                                   {"posterior", fit.responsibilities(i, best)}});
        tsv << row_id << "\t" << (best + 1) << "\t" << fmt(fit.responsibilities(i, best))
            << "\n";
    }
    ctx.add_artifact("assignments.tsv", tsv.str());

    ctx.results = Json{{"k", fit.model.components()},
                       {"model", mixture_json(fit.model)},
                       {"loglik", fit.loglik},
                       {"bic", score},
                       {"best_restart", fit.best_restart},
                       {"assignments", std::move(assignments)}};
    if (!bic_table.is_null()) ctx.results["bic_table"] = std::move(bic_table);

    ctx.summary = {{"rows", std::to_string(table.values.rows())},
                   {"dimensions", std::to_string(table.values.cols())},
                   {"k", std::to_string(fit.model.components())},
                   {"bic", fmt(score)},
                   {"assignments", ctx.artifact_path("assignments.tsv")}};
    return ctx.finish();
}

// ------------------------------------------------------------- simulate ----

struct SimPhyloOpts {
    std::string tree;
    std::size_t length = 1000;
    double mu = 0.1;
    double nu = 0.1;
    double rho = 0.5;
};

int run_simulate_phylo(const SimPhyloOpts& o, const CommonOpts& common) {
    RunContext ctx("simulate_phylo", common);
    const PhyloTree tree = parse_newick(ctx.load_input(o.tree));
    tree.validate_binary();

    PhyloHmmParams params;
    params.mu = o.mu;
    params.nu = o.nu;
    params.rho = o.rho;
    params.beta.resize(tree.nodes.size(), 0.1);
    for (std::size_t v = 0; v + 1 < tree.nodes.size(); ++v)
        params.beta[v] = std::clamp(tree.nodes[v].branch, PhyloHmmParams::beta_lo,
                                    PhyloHmmParams::beta_hi);
    const PhyloSimulation sim = simulate_phylo_hmm(tree, params, o.length, common.seed);

    ctx.config = common_config_json(common);
    ctx.config["length"] = o.length;
    ctx.config["mu"] = o.mu;
    ctx.config["nu"] = o.nu;
    ctx.config["rho"] = o.rho;
    ctx.trace = Json::object();

    ctx.add_artifact("alignment.fasta", write_alignment(sim.alignment, Alphabet::dna()));
    Json truth{{"solver", "phylo"},
               {"seed", common.seed},
               {"length", o.length},
               {"mu", o.mu},
               {"nu", o.nu},
               {"rho", o.rho},
               {"tree", write_newick(tree)},
               {"conserved", sim.conserved}};
    ctx.add_artifact("truth.json", truth.dump(2) + "\n");

    std::size_t conserved_cols = 0;
    for (auto z : sim.conserved) conserved_cols += z;
    ctx.results = Json{{"leaves", sim.alignment.depth()},
                       {"columns", o.length},
                       {"conserved_columns", conserved_cols},
                       {"alignment", ctx.artifact_path("alignment.fasta")},
                       {"truth", ctx.artifact_path("truth.json")}};
    ctx.summary = {{"leaves", std::to_string(sim.alignment.depth())},
                   {"columns", std::to_string(o.length)},
                   {"conserved_columns", std::to_string(conserved_cols)},
                   {"alignment", ctx.artifact_path("alignment.fasta")}};
    return ctx.finish();
}

struct SimMotifOpts {
    std::size_t num_seqs = 20;
    std::size_t length = 50;
    std::size_t width = 8;
    std::string alphabet = "dna";
};

int run_simulate_motif(const SimMotifOpts& o, const CommonOpts& common) {
    if (o.width > o.length)
        throw UsageError("--width must not exceed --length");
    RunContext ctx("simulate_motif", common);
    const Alphabet ab = alphabet_from_name(o.alphabet);

    Rng rng(common.seed);
    std::string consensus;
    for (std::size_t j = 0; j < o.width; ++j)
        consensus.push_back(ab.letter(rng.below(ab.size())));

    std::vector<Sequence> seqs(o.num_seqs);
    std::vector<std::size_t> positions(o.num_seqs);
    for (std::size_t i = 0; i < o.num_seqs; ++i) {
        seqs[i].id = "seq" + std::to_string(i + 1);
        seqs[i].residues.resize(o.length);
        for (auto& r : seqs[i].residues) r = static_cast<std::uint8_t>(rng.below(ab.size()));
        const std::size_t pos = rng.below(o.length - o.width + 1);
        positions[i] = pos + 1;
        for (std::size_t j = 0; j < o.width; ++j)
            seqs[i].residues[pos + j] =
                static_cast<std::uint8_t>(ab.index_of(consensus[j]));
    }

    ctx.config = common_config_json(common);
    ctx.config["num_seqs"] = o.num_seqs;
    ctx.config["length"] = o.length;
    ctx.config["width"] = o.width;
    ctx.trace = Json::object();

    std::ostringstream fasta;
    write_fasta(seqs, ab, fasta);
    ctx.add_artifact("sequences.fasta", fasta.str());
    Json truth{{"solver", "motif"},
               {"seed", common.seed},
               {"consensus", consensus},
               {"width", o.width},
               {"positions", positions}};
    ctx.add_artifact("truth.json", truth.dump(2) + "\n");

    ctx.results = Json{{"sequences", o.num_seqs},
                       {"length", o.length},
                       {"consensus", consensus},
                       {"fasta", ctx.artifact_path("sequences.fasta")},
                       {"truth", ctx.artifact_path("truth.json")}};
    ctx.summary = {{"sequences", std::to_string(o.num_seqs)},
                   {"consensus", consensus},
                   {"fasta", ctx.artifact_path("sequences.fasta")}};
    return ctx.finish();
}

struct SimMixtureOpts {
    std::size_t n = 100;
    std::size_t k = 2;
    std::size_t dim = 1;
    double separation = 10.0;
    double noise = 1.0;
};

int run_simulate_mixture(const SimMixtureOpts& o, const CommonOpts& common) {
    RunContext ctx("simulate_mixture", common);
    Rng rng(common.seed);
    NumericTable table;
    table.values = Matrix(o.n * o.k, o.dim);
    std::vector<std::size_t> labels(o.n * o.k);
    Json centers = Json::array();
    for (std::size_t c = 0; c < o.k; ++c) {
        Json center = Json::array();
        for (std::size_t d = 0; d < o.dim; ++d)
            center.push_back(double(c) * o.separation);
        centers.push_back(std::move(center));
    }
    std::size_t row = 0;
    for (std::size_t c = 0; c < o.k; ++c)
        for (std::size_t i = 0; i < o.n; ++i, ++row) {
            labels[row] = c + 1;
            for (std::size_t d = 0; d < o.dim; ++d)
                table.values(row, d) = double(c) * o.separation + o.noise * rng.normal();
        }

    ctx.config = common_config_json(common);
    ctx.config["n"] = o.n;
    ctx.config["k"] = o.k;
    ctx.config["dim"] = o.dim;
    ctx.config["separation"] = o.separation;
    ctx.config["noise"] = o.noise;
    ctx.trace = Json::object();

    std::ostringstream csv;
    write_numeric_table(table, csv);
    ctx.add_artifact("data.csv", csv.str());
    Json truth{{"solver", "mixture"},
               {"seed", common.seed},
               {"n_per_component", o.n},
               {"k", o.k},
               {"dim", o.dim},
               {"separation", o.separation},
               {"noise", o.noise},
               {"centers", std::move(centers)},
               {"labels", labels}};
    ctx.add_artifact("truth.json", truth.dump(2) + "\n");

    ctx.results = Json{{"rows", o.n * o.k},
                       {"dim", o.dim},
                       {"data", ctx.artifact_path("data.csv")},
                       {"truth", ctx.artifact_path("truth.json")}};
    ctx.summary = {{"rows", std::to_string(o.n * o.k)},
                   {"k", std::to_string(o.k)},
                   {"data", ctx.artifact_path("data.csv")}};
    return ctx.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emtk: EM solvers for sequence and expression analysis"};
    app.require_subcommand(1);

    MotifOpts motif_opts;
    CommonOpts motif_common;
    CLI::App* motif_cmd = app.add_subcommand("motif", "discover a shared sequence motif");
    motif_cmd->add_option("--fasta", motif_opts.fasta, "input sequences")->required();
    motif_cmd->add_option("--width", motif_opts.width, "motif width")
        ->required()
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
    motif_cmd->add_option("--mode", motif_opts.mode, "occurrence model (default oops)")
        ->check(CLI::IsMember({"oops", "zoops"}));
    motif_cmd->add_option("--alpha", motif_opts.alpha, "pseudocount (default 0.5)")
        ->check(CLI::PositiveNumber);
    motif_cmd->add_option("--p0", motif_opts.p0, "initial site prior for zoops");
    motif_cmd->add_option("--alphabet", motif_opts.alphabet, "dna or protein (default dna)")
        ->check(CLI::IsMember({"dna", "protein"}));
    add_common(motif_cmd, motif_common);

    CLI::App* phmm_cmd = app.add_subcommand("phmm", "profile hidden Markov model");
    phmm_cmd->require_subcommand(1);
    PhmmTrainOpts train_opts;
    CommonOpts train_common;
    CLI::App* train_cmd = phmm_cmd->add_subcommand("train", "estimate a profile from sequences");
    train_cmd->add_option("--fasta", train_opts.fasta, "input sequences")->required();
    train_cmd->add_option("--alpha", train_opts.alpha, "pseudocount (default 0.5)")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--alphabet", train_opts.alphabet, "dna or protein (default protein)")
        ->check(CLI::IsMember({"dna", "protein"}));
    add_common(train_cmd, train_common);

    PhmmAlignOpts align_opts;
    CommonOpts align_common;
    CLI::App* align_cmd = phmm_cmd->add_subcommand("align", "align sequences to a profile");
    align_cmd->add_option("--model", align_opts.model, "model JSON from phmm train")->required();
    align_cmd->add_option("--fasta", align_opts.fasta, "sequences to align")->required();
    add_common(align_cmd, align_common);

    ConserveOpts conserve_opts;
    CommonOpts conserve_common;
    CLI::App* conserve_cmd =
        app.add_subcommand("conserve", "score conserved columns of a DNA alignment");
    conserve_cmd->add_option("--alignment", conserve_opts.alignment, "aligned FASTA")->required();
    conserve_cmd->add_option("--tree", conserve_opts.tree, "Newick tree file")->required();
    add_common(conserve_cmd, conserve_common);

    HaplotypeOpts hap_opts;
    CommonOpts hap_common;
    CLI::App* hap_cmd =
        app.add_subcommand("haplotype", "estimate haplotype frequencies and phase");
    hap_cmd->add_option("--genotypes", hap_opts.genotypes, "genotype TSV")->required();
    add_common(hap_cmd, hap_common);

    ClusterOpts cluster_opts;
    CommonOpts cluster_common;
    CLI::App* cluster_cmd = app.add_subcommand("cluster", "Gaussian mixture clustering");
    cluster_cmd->add_option("--data", cluster_opts.data, "numeric CSV/TSV matrix")->required();
    CLI::Option* k_opt =
        cluster_cmd->add_option("--k", cluster_opts.k, "number of components")
            ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    CLI::Option* krange_opt =
        cluster_cmd->add_option("--k-range", cluster_opts.k_range, "candidate range lo:hi");
    k_opt->excludes(krange_opt);
    cluster_cmd->add_option("--family", cluster_opts.family,
                            "covariance family (default full)")
        ->check(CLI::IsMember({"spherical", "diagonal", "full", "shared-full"}));
    CLI::Option* rcem_opt = cluster_cmd->add_option(
        "--rcem-c", cluster_opts.rcem_c, "rejection-control threshold; enables RCEM");
    add_common(cluster_cmd, cluster_common);

    CLI::App* sim_cmd = app.add_subcommand("simulate", "generate synthetic datasets");
    sim_cmd->require_subcommand(1);
    SimPhyloOpts sim_phylo_opts;
    CommonOpts sim_phylo_common;
    CLI::App* sim_phylo_cmd = sim_cmd->add_subcommand("phylo", "alignment with conserved blocks");
    sim_phylo_cmd->add_option("--tree", sim_phylo_opts.tree, "Newick tree file")->required();
    sim_phylo_cmd->add_option("--length", sim_phylo_opts.length, "columns (default 1000)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    sim_phylo_cmd->add_option("--mu", sim_phylo_opts.mu, "conserved->neutral rate");
    sim_phylo_cmd->add_option("--nu", sim_phylo_opts.nu, "neutral->conserved rate");
    sim_phylo_cmd->add_option("--rho", sim_phylo_opts.rho, "conserved branch scale");
    add_common(sim_phylo_cmd, sim_phylo_common);

    SimMotifOpts sim_motif_opts;
    CommonOpts sim_motif_common;
    CLI::App* sim_motif_cmd = sim_cmd->add_subcommand("motif", "sequences with a planted site");
    sim_motif_cmd->add_option("--num-seqs", sim_motif_opts.num_seqs, "sequences (default 20)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    sim_motif_cmd->add_option("--length", sim_motif_opts.length, "sequence length (default 50)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    sim_motif_cmd->add_option("--width", sim_motif_opts.width, "site width (default 8)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
    sim_motif_cmd
        ->add_option("--alphabet", sim_motif_opts.alphabet, "dna or protein (default dna)")
        ->check(CLI::IsMember({"dna", "protein"}));
    add_common(sim_motif_cmd, sim_motif_common);

    SimMixtureOpts sim_mix_opts;
    CommonOpts sim_mix_common;
    CLI::App* sim_mix_cmd = sim_cmd->add_subcommand("mixture", "planted Gaussian clusters");
    sim_mix_cmd->add_option("--n", sim_mix_opts.n, "points per component (default 100)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    sim_mix_cmd->add_option("--k", sim_mix_opts.k, "components (default 2)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
    sim_mix_cmd->add_option("--dim", sim_mix_opts.dim, "dimensions (default 1)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
    sim_mix_cmd->add_option("--separation", sim_mix_opts.separation,
                            "distance between adjacent centers (default 10)");
    sim_mix_cmd->add_option("--noise", sim_mix_opts.noise, "standard deviation (default 1)")
        ->check(CLI::PositiveNumber);
    add_common(sim_mix_cmd, sim_mix_common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    cluster_opts.k_given = k_opt->count() > 0;
    cluster_opts.k_range_given = krange_opt->count() > 0;
    cluster_opts.rcem_given = rcem_opt->count() > 0;

    try {
        if (motif_cmd->parsed()) return run_motif(motif_opts, motif_common);
        if (phmm_cmd->parsed()) {
            if (train_cmd->parsed()) return run_phmm_train(train_opts, train_common);
            if (align_cmd->parsed()) return run_phmm_align(align_opts, align_common);
        }
        if (conserve_cmd->parsed()) return run_conserve(conserve_opts, conserve_common);
        if (hap_cmd->parsed()) return run_haplotype(hap_opts, hap_common);
        if (cluster_cmd->parsed()) return run_cluster(cluster_opts, cluster_common);
        if (sim_cmd->parsed()) {
            if (sim_phylo_cmd->parsed()) return run_simulate_phylo(sim_phylo_opts, sim_phylo_common);
            if (sim_motif_cmd->parsed()) return run_simulate_motif(sim_motif_opts, sim_motif_common);
            if (sim_mix_cmd->parsed()) return run_simulate_mixture(sim_mix_opts, sim_mix_common);
        }
    } catch (const UsageError& e) {
        std::cerr << "emtk: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "emtk: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
