// JSON serialization for solver models plus the small file utilities the
// command-line tool needs: whole-file reads, atomic writes, content digests.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emtk/alphabet.hpp"
#include "emtk/em.hpp"
#include "emtk/mixture.hpp"
#include "emtk/motif.hpp"
#include "emtk/numerics.hpp"
#include "emtk/phylo_hmm.hpp"
#include "emtk/profile_hmm.hpp"

namespace emtk {

using Json = nlohmann::ordered_json;

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Write via a sibling temp file and rename so readers never see a torn file.
inline void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
        if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move '" + tmp + "' to '" + path + "'");
}

// FNV-1a over the raw bytes, rendered as 16 hex digits.
inline std::string fnv1a_digest(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return std::string(out);
}

inline Json trace_json(const EmTrace& trace) {
    return Json{{"loglik", trace.loglik_per_iter},
                {"iterations", trace.iterations},
                {"converged", trace.converged}};
}

inline Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json motif_model_json(const MotifModel& model, const Alphabet& alphabet) {
    return Json{{"alphabet", to_string(alphabet.kind())},
                {"width", model.width()},
                {"background", model.theta0},
                {"pwm", model.theta}};
}

inline Json profile_json(const ProfileHmm& hmm, const Alphabet& alphabet) {
    Json t_match = Json::array(), t_insert = Json::array(), t_delete = Json::array();
    for (const auto& t : hmm.t_match) t_match.push_back({t.to_match, t.to_insert, t.to_delete});
    for (const auto& t : hmm.t_insert) t_insert.push_back({t.to_match, t.to_insert});
    for (const auto& t : hmm.t_delete) t_delete.push_back({t.to_match, t.to_delete});
    return Json{{"alphabet", to_string(alphabet.kind())},
                {"match_states", hmm.num_match()},
                {"match_emissions", hmm.e_match},
                {"insert_emissions", hmm.e_insert},
                {"match_transitions", std::move(t_match)},
                {"insert_transitions", std::move(t_insert)},
                {"delete_transitions", std::move(t_delete)}};
}

// Accepts either a bare model object or a full run report that embeds one
// under results.model.
inline ProfileHmm profile_from_json(const Json& root, Alphabet& alphabet_out) {
    const Json* j = &root;
    if (root.contains("results") && root["results"].contains("model")) j = &root["results"]["model"];
    if (!j->contains("match_emissions"))
        throw std::runtime_error("model JSON lacks a profile (no match_emissions field)");
    alphabet_out = alphabet_from_name(j->at("alphabet").get<std::string>());
    ProfileHmm hmm;
    hmm.e_match = j->at("match_emissions").get<std::vector<std::vector<double>>>();
    hmm.e_insert = j->at("insert_emissions").get<std::vector<std::vector<double>>>();
    for (const auto& row : j->at("match_transitions"))
        hmm.t_match.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                               row.at(2).get<double>()});
    for (const auto& row : j->at("insert_transitions"))
        hmm.t_insert.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
    for (const auto& row : j->at("delete_transitions"))
        hmm.t_delete.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
    hmm.validate(1e-6);
    return hmm;
}

// The fitted branch scales are reported as a Newick tree whose lengths are
// the per-edge rates, so standard tree tools can consume them.
inline Json phylo_params_json(const PhyloHmmParams& params, const PhyloTree& tree) {
    PhyloTree fitted = tree;
    for (std::size_t v = 0; v + 1 < fitted.nodes.size(); ++v) {
        fitted.nodes[v].branch = params.beta[v];
        fitted.nodes[v].has_branch = true;
    }
    return Json{{"mu", params.mu},
                {"nu", params.nu},
                {"rho", params.rho},
                {"stationary_conserved", params.stationary_conserved()},
                {"tree", write_newick(fitted)}};
}

inline Json mixture_json(const MixtureModel& model) {
    Json covs = Json::array();
    for (const auto& s : model.sigma) covs.push_back(matrix_json(s));
    return Json{{"family", family_name(model.family)},
                {"components", model.components()},
                {"weights", model.tau},
                {"means", model.mean},
                {"covariances", std::move(covs)}};
}

}  // namespace emtk
