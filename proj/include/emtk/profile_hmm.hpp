// Profile hidden Markov model for multiple sequence alignment: scaled
// forward-backward, Baum-Welch training, Viterbi decoding, and assembly
// of the decoded paths into an aligned FASTA block.
//
// Topology: begin, match M_1..M_M, insert I_0..I_M, delete D_1..D_M, end.
// Insert and delete states never follow each other. Begin behaves like a
// silent M_0 with transitions to M_1, I_0 and D_1; M_M, I_M and D_M feed
// the end state through their to_match slot.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
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

struct ProfileHmm {
    // row [j-1] is state M_j; insert rows indexed directly by j
    std::vector<std::vector<double>> e_match;   // M x d
    std::vector<std::vector<double>> e_insert;  // (M+1) x d

    struct MatchTrans {
        double to_match = 0.0, to_insert = 0.0, to_delete = 0.0;
    };
    struct InsertTrans {
        double to_match = 0.0, to_insert = 0.0;  // to_insert is the self loop
    };
    struct DeleteTrans {
        double to_match = 0.0, to_delete = 0.0;
    };
    std::vector<MatchTrans> t_match;    // M+1 rows, [0] is begin; [M].to_delete unused (0)
    std::vector<InsertTrans> t_insert;  // M+1 rows
    std::vector<DeleteTrans> t_delete;  // M rows, [j-1] is D_j; [M-1].to_delete unused (0)

    std::size_t num_match() const { return e_match.size(); }
    std::size_t alphabet_size() const { return e_insert.empty() ? 0 : e_insert[0].size(); }

    void validate(double tol = 1e-12) const {
        const std::size_t m = num_match();
        if (m == 0) throw std::invalid_argument("ProfileHmm: needs at least one match state");
        if (e_insert.size() != m + 1 || t_match.size() != m + 1 || t_insert.size() != m + 1 ||
            t_delete.size() != m)
            throw std::invalid_argument("ProfileHmm: inconsistent state table sizes");
        auto check_row = [&](const std::vector<double>& row, const char* what) {
            double s = 0.0;
            for (double v : row) {
                if (v < 0.0) throw std::invalid_argument(std::string("ProfileHmm: negative ") + what);
                s += v;
            }
            if (std::abs(s - 1.0) > tol)
                throw std::invalid_argument(std::string("ProfileHmm: ") + what +
                                            " row does not sum to 1");
        };
        for (const auto& row : e_match) check_row(row, "match emission");
        for (const auto& row : e_insert) check_row(row, "insert emission");
        for (std::size_t j = 0; j <= m; ++j) {
            const auto& t = t_match[j];
            check_row({t.to_match, t.to_insert, t.to_delete}, "match transition");
            if (j == m && t.to_delete != 0.0)
                throw std::invalid_argument("ProfileHmm: M_M cannot delete past the end");
        }
        for (const auto& t : t_insert) check_row({t.to_match, t.to_insert}, "insert transition");
        for (std::size_t j = 0; j < m; ++j) {
            const auto& t = t_delete[j];
            check_row({t.to_match, t.to_delete}, "delete transition");
            if (j == m - 1 && t.to_delete != 0.0)
                throw std::invalid_argument("ProfileHmm: D_M cannot delete past the end");
        }
    }
};

enum class StateKind : std::uint8_t { begin, match, insert, del, end };

struct State {
    StateKind kind = StateKind::begin;
    std::size_t index = 0;  // M_j, I_j, D_j; 0 for begin/end

    bool operator==(const State&) const = default;
};

// begin ... end inclusive
using StatePath = std::vector<State>;

inline std::size_t path_emission_count(const StatePath& path) {
    std::size_t n = 0;
    for (const auto& s : path)
        if (s.kind == StateKind::match || s.kind == StateKind::insert) ++n;
    return n;
}

// Log probability of one fully specified path emitting the sequence.
// Throws if the path is illegal or does not consume the whole sequence.
inline double path_log_prob(const ProfileHmm& hmm, const StatePath& path, const Sequence& seq) {
    const std::size_t m = hmm.num_match();
    if (path.size() < 2 || path.front().kind != StateKind::begin ||
        path.back().kind != StateKind::end)
        throw std::invalid_argument("path must run from begin to end");
    if (path_emission_count(path) != seq.length())
        throw std::invalid_argument("path emission count does not match sequence length");

    auto trans_log = [&](const State& a, const State& b) -> double {
        // begin acts as M_0; end is the to_match slot of the last column
        const std::size_t aj = a.index;
        switch (a.kind) {
            case StateKind::begin:
            case StateKind::match: {
                const auto& t = hmm.t_match[aj];
                if (b.kind == StateKind::match && b.index == aj + 1) return std::log(t.to_match);
                if (b.kind == StateKind::end && aj == m) return std::log(t.to_match);
                if (b.kind == StateKind::insert && b.index == aj) return std::log(t.to_insert);
                if (b.kind == StateKind::del && b.index == aj + 1) return std::log(t.to_delete);
                break;
            }
            case StateKind::insert: {
                const auto& t = hmm.t_insert[aj];
                if (b.kind == StateKind::match && b.index == aj + 1) return std::log(t.to_match);
                if (b.kind == StateKind::end && aj == m) return std::log(t.to_match);
                if (b.kind == StateKind::insert && b.index == aj) return std::log(t.to_insert);
                break;
            }
            case StateKind::del: {
                const auto& t = hmm.t_delete[aj - 1];
                if (b.kind == StateKind::match && b.index == aj + 1) return std::log(t.to_match);
                if (b.kind == StateKind::end && aj == m) return std::log(t.to_match);
                if (b.kind == StateKind::del && b.index == aj + 1) return std::log(t.to_delete);
                break;
            }
            case StateKind::end:
                break;
        }
        throw std::invalid_argument("illegal transition in state path");
    };

    double lp = 0.0;
    std::size_t pos = 0;
    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
        lp += trans_log(path[s], path[s + 1]);
        const State& next = path[s + 1];
        if (next.kind == StateKind::match)
            lp += std::log(hmm.e_match[next.index - 1][seq.residues[pos++]]);
        else if (next.kind == StateKind::insert)
            lp += std::log(hmm.e_insert[next.index][seq.residues[pos++]]);
    }
    return lp;
}

// Scaled forward/backward lattice. Grids are (L+1) x (M+1); row i covers
// the state of affairs after consuming i residues. Column 0 of fm/bm is
// the begin state; column 0 of fd/bd is unused.
struct DpTable {
    std::vector<std::vector<double>> fm, fi, fd;
    std::vector<std::vector<double>> bm, bi, bd;
    std::vector<double> scale;  // scale[0] = 1, scale[i] for residue i
    double fwd_total = 0.0;     // scaled mass reaching end
    double bwd_total = 0.0;
    double loglik = 0.0;
};

inline DpTable forward(const ProfileHmm& hmm, const Sequence& seq) {
    const std::size_t m = hmm.num_match();
    const std::size_t L = seq.length();
    DpTable t;
    t.fm.assign(L + 1, std::vector<double>(m + 1, 0.0));
    t.fi.assign(L + 1, std::vector<double>(m + 1, 0.0));
    t.fd.assign(L + 1, std::vector<double>(m + 1, 0.0));
    t.scale.assign(L + 1, 1.0);

    t.fm[0][0] = 1.0;  // begin
    t.fd[0][1] = hmm.t_match[0].to_delete;
    for (std::size_t j = 2; j <= m; ++j) t.fd[0][j] = t.fd[0][j - 1] * hmm.t_delete[j - 2].to_delete;

    for (std::size_t i = 1; i <= L; ++i) {
        const std::uint8_t r = seq.residues[i - 1];
        double colsum = 0.0;
        for (std::size_t j = 1; j <= m; ++j) {
            double v = t.fm[i - 1][j - 1] * hmm.t_match[j - 1].to_match +
                       t.fi[i - 1][j - 1] * hmm.t_insert[j - 1].to_match;
            if (j >= 2) v += t.fd[i - 1][j - 1] * hmm.t_delete[j - 2].to_match;
            t.fm[i][j] = v * hmm.e_match[j - 1][r];
            colsum += t.fm[i][j];
        }
        for (std::size_t j = 0; j <= m; ++j) {
            const double v = t.fm[i - 1][j] * hmm.t_match[j].to_insert +
                             t.fi[i - 1][j] * hmm.t_insert[j].to_insert;
            t.fi[i][j] = v * hmm.e_insert[j][r];
            colsum += t.fi[i][j];
        }
        if (!(colsum > 0.0)) {
            std::ostringstream os;
            os << "forward: zero probability mass at residue " << i << " of sequence '" << seq.id
               << "'";
            throw std::runtime_error(os.str());
        }
        t.scale[i] = colsum;
        for (std::size_t j = 1; j <= m; ++j) t.fm[i][j] /= colsum;
        for (std::size_t j = 0; j <= m; ++j) t.fi[i][j] /= colsum;
        t.fm[i][0] = 0.0;
        for (std::size_t j = 1; j <= m; ++j) {
            t.fd[i][j] = t.fm[i][j - 1] * hmm.t_match[j - 1].to_delete;
            if (j >= 2) t.fd[i][j] += t.fd[i][j - 1] * hmm.t_delete[j - 2].to_delete;
        }
    }

    t.fwd_total = t.fm[L][m] * hmm.t_match[m].to_match + t.fi[L][m] * hmm.t_insert[m].to_match +
                  (m >= 1 ? t.fd[L][m] * hmm.t_delete[m - 1].to_match : 0.0);
    if (!(t.fwd_total > 0.0))
        throw std::runtime_error("forward: sequence '" + seq.id + "' has zero likelihood");
    t.loglik = std::log(t.fwd_total);
    for (std::size_t i = 1; i <= L; ++i) t.loglik += std::log(t.scale[i]);
    return t;
}

// Fills the backward grids of a table produced by forward(), reusing its
// scaling factors. bwd_total must agree with fwd_total.
inline void backward(const ProfileHmm& hmm, const Sequence& seq, DpTable& t) {
    const std::size_t m = hmm.num_match();
    const std::size_t L = seq.length();
    t.bm.assign(L + 1, std::vector<double>(m + 1, 0.0));
    t.bi.assign(L + 1, std::vector<double>(m + 1, 0.0));
    t.bd.assign(L + 1, std::vector<double>(m + 1, 0.0));

    // base row i = L: only delete chains and the end state remain
    t.bd[L][m] = hmm.t_delete[m - 1].to_match;
    for (std::size_t j = m; j-- >= 2;) t.bd[L][j] = hmm.t_delete[j - 1].to_delete * t.bd[L][j + 1];
    for (std::size_t j = 0; j <= m; ++j) {
        t.bm[L][j] = (j == m) ? hmm.t_match[m].to_match : hmm.t_match[j].to_delete * t.bd[L][j + 1];
        t.bi[L][j] = (j == m) ? hmm.t_insert[m].to_match : 0.0;
    }

    for (std::size_t i = L; i-- > 0;) {
        const std::uint8_t r = seq.residues[i];  // residue i+1
        const double c = t.scale[i + 1];
        for (std::size_t j = m; j >= 1; --j) {
            double v = 0.0;
            if (j < m)
                v += hmm.t_delete[j - 1].to_match * hmm.e_match[j][r] * t.bm[i + 1][j + 1] / c;
            if (j < m) v += hmm.t_delete[j - 1].to_delete * t.bd[i][j + 1];
            t.bd[i][j] = v;
        }
        for (std::size_t j = 0; j <= m; ++j) {
            double v = hmm.t_match[j].to_insert * hmm.e_insert[j][r] * t.bi[i + 1][j] / c;
            if (j < m) {
                v += hmm.t_match[j].to_match * hmm.e_match[j][r] * t.bm[i + 1][j + 1] / c;
                v += hmm.t_match[j].to_delete * t.bd[i][j + 1];
            }
            t.bm[i][j] = v;
            double w = hmm.t_insert[j].to_insert * hmm.e_insert[j][r] * t.bi[i + 1][j] / c;
            if (j < m) w += hmm.t_insert[j].to_match * hmm.e_match[j][r] * t.bm[i + 1][j + 1] / c;
            t.bi[i][j] = w;
        }
    }
    t.bwd_total = t.bm[0][0];
}

// Expected emission and transition counts, same shapes as the model rows.
struct ProfileStats {
    std::vector<std::vector<double>> e_match;
    std::vector<std::vector<double>> e_insert;
    std::vector<ProfileHmm::MatchTrans> t_match;
    std::vector<ProfileHmm::InsertTrans> t_insert;
    std::vector<ProfileHmm::DeleteTrans> t_delete;

    static ProfileStats zeros(std::size_t m, std::size_t d) {
        ProfileStats s;
        s.e_match.assign(m, std::vector<double>(d, 0.0));
        s.e_insert.assign(m + 1, std::vector<double>(d, 0.0));
        s.t_match.assign(m + 1, {});
        s.t_insert.assign(m + 1, {});
        s.t_delete.assign(m, {});
        return s;
    }

    ProfileStats& operator+=(const ProfileStats& o) {
        for (std::size_t j = 0; j < e_match.size(); ++j)
            for (std::size_t r = 0; r < e_match[j].size(); ++r) e_match[j][r] += o.e_match[j][r];
        for (std::size_t j = 0; j < e_insert.size(); ++j)
            for (std::size_t r = 0; r < e_insert[j].size(); ++r) e_insert[j][r] += o.e_insert[j][r];
        for (std::size_t j = 0; j < t_match.size(); ++j) {
            t_match[j].to_match += o.t_match[j].to_match;
            t_match[j].to_insert += o.t_match[j].to_insert;
            t_match[j].to_delete += o.t_match[j].to_delete;
        }
        for (std::size_t j = 0; j < t_insert.size(); ++j) {
            t_insert[j].to_match += o.t_insert[j].to_match;
            t_insert[j].to_insert += o.t_insert[j].to_insert;
        }
        for (std::size_t j = 0; j < t_delete.size(); ++j) {
            t_delete[j].to_match += o.t_delete[j].to_match;
            t_delete[j].to_delete += o.t_delete[j].to_delete;
        }
        return *this;
    }
};

// Posterior event counts for one sequence, scaled by `weight`. Uses a
// completed forward/backward table.
inline ProfileStats expected_stats(const ProfileHmm& hmm, const Sequence& seq, const DpTable& t,
                                   double weight = 1.0) {
    const std::size_t m = hmm.num_match();
    const std::size_t L = seq.length();
    const double total = t.fwd_total;
    ProfileStats s = ProfileStats::zeros(m, hmm.alphabet_size());

    for (std::size_t i = 1; i <= L; ++i) {
        const std::uint8_t r = seq.residues[i - 1];
        for (std::size_t j = 1; j <= m; ++j)
            s.e_match[j - 1][r] += weight * t.fm[i][j] * t.bm[i][j] / total;
        for (std::size_t j = 0; j <= m; ++j)
            s.e_insert[j][r] += weight * t.fi[i][j] * t.bi[i][j] / total;
    }

    for (std::size_t i = 0; i <= L; ++i) {
        const bool last = (i == L);
        const std::uint8_t r = last ? 0 : seq.residues[i];
        const double c = last ? 1.0 : t.scale[i + 1];
        for (std::size_t j = 0; j <= m; ++j) {
            // match row j: to M_{j+1} / end, to I_j, to D_{j+1}
            const double fmv = t.fm[i][j];
            if (fmv > 0.0) {
                if (j < m && !last)
                    s.t_match[j].to_match += weight * fmv * hmm.t_match[j].to_match *
                                             hmm.e_match[j][r] * t.bm[i + 1][j + 1] / (c * total);
                if (j == m && last)
                    s.t_match[j].to_match += weight * fmv * hmm.t_match[j].to_match / total;
                if (!last)
                    s.t_match[j].to_insert += weight * fmv * hmm.t_match[j].to_insert *
                                              hmm.e_insert[j][r] * t.bi[i + 1][j] / (c * total);
                if (j < m)
                    s.t_match[j].to_delete +=
                        weight * fmv * hmm.t_match[j].to_delete * t.bd[i][j + 1] / total;
            }
            const double fiv = t.fi[i][j];
            if (fiv > 0.0) {
                if (j < m && !last)
                    s.t_insert[j].to_match += weight * fiv * hmm.t_insert[j].to_match *
                                              hmm.e_match[j][r] * t.bm[i + 1][j + 1] / (c * total);
                if (j == m && last)
                    s.t_insert[j].to_match += weight * fiv * hmm.t_insert[j].to_match / total;
                if (!last)
                    s.t_insert[j].to_insert += weight * fiv * hmm.t_insert[j].to_insert *
                                               hmm.e_insert[j][r] * t.bi[i + 1][j] / (c * total);
            }
            if (j >= 1) {
                const double fdv = t.fd[i][j];
                if (fdv > 0.0) {
                    if (j < m && !last)
                        s.t_delete[j - 1].to_match += weight * fdv * hmm.t_delete[j - 1].to_match *
                                                      hmm.e_match[j][r] * t.bm[i + 1][j + 1] /
                                                      (c * total);
                    if (j == m && last)
                        s.t_delete[j - 1].to_match +=
                            weight * fdv * hmm.t_delete[j - 1].to_match / total;
                    if (j < m)
                        s.t_delete[j - 1].to_delete +=
                            weight * fdv * hmm.t_delete[j - 1].to_delete * t.bd[i][j + 1] / total;
                }
            }
        }
    }
    return s;
}

inline ProfileStats expected_stats(const ProfileHmm& hmm, const Sequence& seq,
                                   double weight = 1.0) {
    DpTable t = forward(hmm, seq);
    backward(hmm, seq, t);
    return expected_stats(hmm, seq, t, weight);
}

// Ratio M-step with pseudocount alpha; rows with no mass fall back to
// uniform over their allowed targets.
inline ProfileHmm baum_welch_update(const ProfileStats& stats, double alpha) {
    const std::size_t m = stats.e_match.size();
    const std::size_t d = stats.e_match.empty() ? 0 : stats.e_match[0].size();
    ProfileHmm hmm;
    hmm.e_match.assign(m, std::vector<double>(d, 0.0));
    hmm.e_insert.assign(m + 1, std::vector<double>(d, 0.0));
    hmm.t_match.assign(m + 1, {});
    hmm.t_insert.assign(m + 1, {});
    hmm.t_delete.assign(m, {});

    auto fill_emis = [&](std::vector<double>& out, const std::vector<double>& counts) {
        double total = 0.0;
        for (double v : counts) total += v;
        const double denom = total + double(d) * alpha;
        for (std::size_t r = 0; r < d; ++r)
            out[r] = denom > 0.0 ? (counts[r] + alpha) / denom : 1.0 / double(d);
    };
    for (std::size_t j = 0; j < m; ++j) fill_emis(hmm.e_match[j], stats.e_match[j]);
    for (std::size_t j = 0; j <= m; ++j) fill_emis(hmm.e_insert[j], stats.e_insert[j]);

    auto fill_row = [&](std::vector<double*> out, std::vector<double> counts) {
        double total = 0.0;
        for (double v : counts) total += v;
        const double denom = total + alpha * double(counts.size());
        for (std::size_t k = 0; k < counts.size(); ++k)
            *out[k] = denom > 0.0 ? (counts[k] + alpha) / denom : 1.0 / double(counts.size());
    };
    for (std::size_t j = 0; j <= m; ++j) {
        auto& t = hmm.t_match[j];
        const auto& n = stats.t_match[j];
        if (j < m)
            fill_row({&t.to_match, &t.to_insert, &t.to_delete},
                     {n.to_match, n.to_insert, n.to_delete});
        else
            fill_row({&t.to_match, &t.to_insert}, {n.to_match, n.to_insert});
    }
    for (std::size_t j = 0; j <= m; ++j) {
        auto& t = hmm.t_insert[j];
        const auto& n = stats.t_insert[j];
        fill_row({&t.to_match, &t.to_insert}, {n.to_match, n.to_insert});
    }
    for (std::size_t j = 0; j < m; ++j) {
        auto& t = hmm.t_delete[j];
        const auto& n = stats.t_delete[j];
        if (j + 1 < m)
            fill_row({&t.to_match, &t.to_delete}, {n.to_match, n.to_delete});
        else
            t.to_match = 1.0;  // D_M can only leave through the end state
    }
    return hmm;
}

// Starting model: M = round(mean sequence length), all emission rows set
// to smoothed global residue frequencies, transitions favoring the next
// match state.
inline ProfileHmm init_model(const std::vector<Sequence>& seqs, const Alphabet& alphabet) {
    if (seqs.empty()) throw std::invalid_argument("init_model: needs at least one sequence");
    double mean = 0.0;
    for (const auto& s : seqs) mean += double(s.length());
    mean /= double(seqs.size());
    const std::size_t m = std::max<std::size_t>(1, std::size_t(std::llround(mean)));
    const std::size_t d = alphabet.size();

    std::vector<double> freq(d, 0.0);
    double total = 0.0;
    for (const auto& s : seqs)
        for (std::uint8_t r : s.residues) {
            freq[r] += 1.0;
            total += 1.0;
        }
    std::vector<double> emis(d);
    for (std::size_t r = 0; r < d; ++r) emis[r] = (freq[r] + 0.5) / (total + 0.5 * double(d));

    ProfileHmm hmm;
    hmm.e_match.assign(m, emis);
    hmm.e_insert.assign(m + 1, emis);
    hmm.t_match.assign(m + 1, {});
    hmm.t_insert.assign(m + 1, {});
    hmm.t_delete.assign(m, {});
    for (std::size_t j = 0; j <= m; ++j) {
        if (j < m)
            hmm.t_match[j] = {0.8, 0.1, 0.1};
        else
            hmm.t_match[j] = {0.8, 0.2, 0.0};
        hmm.t_insert[j] = {0.8, 0.2};
    }
    for (std::size_t j = 0; j < m; ++j)
        hmm.t_delete[j] = (j + 1 < m) ? ProfileHmm::DeleteTrans{0.8, 0.2}
                                      : ProfileHmm::DeleteTrans{1.0, 0.0};
    return hmm;
}

// EM problem adapter over a weighted sequence set.
class ProfileProblem {
  public:
    using Params = ProfileHmm;
    using Stats = ProfileStats;

    ProfileProblem(const std::vector<Sequence>& seqs, const Alphabet& alphabet,
                   std::vector<double> weights = {}, double alpha = 0.5)
        : seqs_(&seqs), alphabet_(&alphabet), weights_(std::move(weights)), alpha_(alpha) {
        if (seqs.empty()) throw std::invalid_argument("profile training needs sequences");
        if (weights_.empty()) weights_.assign(seqs.size(), 1.0);
        if (weights_.size() != seqs.size())
            throw std::invalid_argument("profile training: one weight per sequence required");
        for (double w : weights_)
            if (!(w >= 0.0)) throw std::invalid_argument("profile training: weights must be >= 0");
        if (alpha < 0.0) throw std::invalid_argument("profile training: alpha must be >= 0");
    }

    Params initial_guess() const { return init_model(*seqs_, *alphabet_); }

    Params random_init(std::uint64_t seed) const {
        ProfileHmm hmm = init_model(*seqs_, *alphabet_);
        Rng rng(seed);
        auto jitter_row = [&](std::vector<double>& row) {
            double total = 0.0;
            for (double& v : row) {
                v *= rng.uniform(0.5, 1.5);
                total += v;
            }
            for (double& v : row) v /= total;
        };
        for (auto& row : hmm.e_match) jitter_row(row);
        for (auto& row : hmm.e_insert) jitter_row(row);
        const std::size_t m = hmm.num_match();
        for (std::size_t j = 0; j <= m; ++j) {
            std::vector<double> row = {hmm.t_match[j].to_match, hmm.t_match[j].to_insert,
                                       hmm.t_match[j].to_delete};
            if (j == m) row.pop_back();
            jitter_row(row);
            hmm.t_match[j] = {row[0], row[1], j == m ? 0.0 : row[2]};
            std::vector<double> irow = {hmm.t_insert[j].to_match, hmm.t_insert[j].to_insert};
            jitter_row(irow);
            hmm.t_insert[j] = {irow[0], irow[1]};
        }
        for (std::size_t j = 0; j + 1 < m; ++j) {
            std::vector<double> row = {hmm.t_delete[j].to_match, hmm.t_delete[j].to_delete};
            jitter_row(row);
            hmm.t_delete[j] = {row[0], row[1]};
        }
        return hmm;
    }

    EStepResult<Stats> expect(const Params& hmm) const {
        Stats total = Stats::zeros(hmm.num_match(), hmm.alphabet_size());
        double ll = 0.0;
        for (std::size_t i = 0; i < seqs_->size(); ++i) {
            DpTable t = forward(hmm, (*seqs_)[i]);
            backward(hmm, (*seqs_)[i], t);
            total += expected_stats(hmm, (*seqs_)[i], t, weights_[i]);
            ll += weights_[i] * t.loglik;
        }
        return {std::move(total), ll};
    }

    Params maximize(const Stats& stats, const Params&) const {
        return baum_welch_update(stats, alpha_);
    }

    double log_likelihood(const Params& hmm) const {
        double ll = 0.0;
        for (std::size_t i = 0; i < seqs_->size(); ++i)
            ll += weights_[i] * forward(hmm, (*seqs_)[i]).loglik;
        return ll;
    }

  private:
    const std::vector<Sequence>* seqs_;
    const Alphabet* alphabet_;
    std::vector<double> weights_;
    double alpha_;
};

struct ProfileTrainResult {
    ProfileHmm model;
    EmTrace trace;
    std::size_t best_restart = 0;
};

inline ProfileTrainResult train(const std::vector<Sequence>& seqs, const Alphabet& alphabet,
                                const EmConfig& em, double alpha = 0.5,
                                std::vector<double> weights = {}) {
    ProfileProblem problem(seqs, alphabet, std::move(weights), alpha);
    auto ms = multi_start(problem, em);
    return {std::move(ms.best), ms.traces[ms.best_restart], ms.best_restart};
}

// Max-probability path in log space. Ties prefer match over delete over
// insert, both among predecessors and at the final column.
inline std::pair<StatePath, double> viterbi(const ProfileHmm& hmm, const Sequence& seq) {
    const std::size_t m = hmm.num_match();
    const std::size_t L = seq.length();
    const auto grid = [&](double v) { return std::vector<std::vector<double>>(L + 1, std::vector<double>(m + 1, v)); };
    auto vm = grid(neg_inf), vi = grid(neg_inf), vd = grid(neg_inf);
    // backpointers: 0 = from match, 1 = from delete, 2 = from insert
    auto pm = std::vector<std::vector<std::uint8_t>>(L + 1, std::vector<std::uint8_t>(m + 1, 0));
    auto pi = pm, pd = pm;

    auto lg = [](double v) { return v > 0.0 ? std::log(v) : neg_inf; };

    vm[0][0] = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
        const double from_m = vm[0][j - 1] + lg(hmm.t_match[j - 1].to_delete);
        const double from_d = j >= 2 ? vd[0][j - 1] + lg(hmm.t_delete[j - 2].to_delete) : neg_inf;
        if (from_m >= from_d) {
            vd[0][j] = from_m;
            pd[0][j] = 0;
        } else {
            vd[0][j] = from_d;
            pd[0][j] = 1;
        }
    }

    for (std::size_t i = 1; i <= L; ++i) {
        const std::uint8_t r = seq.residues[i - 1];
        for (std::size_t j = 1; j <= m; ++j) {
            const double cand_m = vm[i - 1][j - 1] + lg(hmm.t_match[j - 1].to_match);
            const double cand_d =
                j >= 2 ? vd[i - 1][j - 1] + lg(hmm.t_delete[j - 2].to_match) : neg_inf;
            const double cand_i = vi[i - 1][j - 1] + lg(hmm.t_insert[j - 1].to_match);
            double best = cand_m;
            std::uint8_t who = 0;
            if (cand_d > best) {
                best = cand_d;
                who = 1;
            }
            if (cand_i > best) {
                best = cand_i;
                who = 2;
            }
            vm[i][j] = best + lg(hmm.e_match[j - 1][r]);
            pm[i][j] = who;
        }
        for (std::size_t j = 0; j <= m; ++j) {
            const double cand_m = vm[i - 1][j] + lg(hmm.t_match[j].to_insert);
            const double cand_i = vi[i - 1][j] + lg(hmm.t_insert[j].to_insert);
            if (cand_m >= cand_i) {
                vi[i][j] = cand_m + lg(hmm.e_insert[j][r]);
                pi[i][j] = 0;
            } else {
                vi[i][j] = cand_i + lg(hmm.e_insert[j][r]);
                pi[i][j] = 2;
            }
        }
        for (std::size_t j = 1; j <= m; ++j) {
            const double from_m = vm[i][j - 1] + lg(hmm.t_match[j - 1].to_delete);
            const double from_d = j >= 2 ? vd[i][j - 1] + lg(hmm.t_delete[j - 2].to_delete) : neg_inf;
            if (from_m >= from_d) {
                vd[i][j] = from_m;
                pd[i][j] = 0;
            } else {
                vd[i][j] = from_d;
                pd[i][j] = 1;
            }
        }
    }

    const double end_m = vm[L][m] + lg(hmm.t_match[m].to_match);
    const double end_d = m >= 1 ? vd[L][m] + lg(hmm.t_delete[m - 1].to_match) : neg_inf;
    const double end_i = vi[L][m] + lg(hmm.t_insert[m].to_match);
    double best = end_m;
    StateKind kind = StateKind::match;
    if (end_d > best) {
        best = end_d;
        kind = StateKind::del;
    }
    if (end_i > best) {
        best = end_i;
        kind = StateKind::insert;
    }
    if (!(best > neg_inf))
        throw std::runtime_error("viterbi: sequence '" + seq.id + "' has no legal path");

    StatePath rev;
    rev.push_back({StateKind::end, 0});
    std::size_t i = L, j = m;
    while (!(kind == StateKind::match && j == 0)) {
        rev.push_back({kind, j});
        std::uint8_t who = 0;
        switch (kind) {
            case StateKind::match:
                who = pm[i][j];
                --i;
                --j;
                break;
            case StateKind::insert:
                who = pi[i][j];
                --i;
                break;
            case StateKind::del:
                who = pd[i][j];
                --j;
                break;
            default:
                throw std::logic_error("viterbi backtrace");
        }
        kind = who == 0 ? StateKind::match : (who == 1 ? StateKind::del : StateKind::insert);
    }
    rev.push_back({StateKind::begin, 0});
    std::reverse(rev.begin(), rev.end());
    return {std::move(rev), best};
}

// Stack decoded paths into an alignment: one column per match state, and
// between match columns as many insert columns as the longest insert run
// there, residues left-justified within each run.
inline Alignment build_alignment(const std::vector<StatePath>& paths,
                                 const std::vector<Sequence>& seqs, std::size_t num_match) {
    if (paths.size() != seqs.size())
        throw std::invalid_argument("build_alignment: one path per sequence required");
    const std::size_t m = num_match;

    for (std::size_t k = 0; k < paths.size(); ++k)
        if (path_emission_count(paths[k]) != seqs[k].length())
            throw std::invalid_argument("build_alignment: path for sequence '" + seqs[k].id +
                                        "' does not emit its length");

    std::vector<std::size_t> insert_width(m + 1, 0);
    for (const auto& path : paths) {
        std::vector<std::size_t> run(m + 1, 0);
        for (const auto& s : path)
            if (s.kind == StateKind::insert) ++run[s.index];
        for (std::size_t j = 0; j <= m; ++j) insert_width[j] = std::max(insert_width[j], run[j]);
    }

    // column offsets: [I_0 run][M_1][I_1 run][M_2]...[M_M][I_M run]
    std::vector<std::size_t> match_col(m + 1, 0);
    std::vector<std::size_t> insert_col(m + 1, 0);
    std::size_t width = 0;
    insert_col[0] = 0;
    width += insert_width[0];
    for (std::size_t j = 1; j <= m; ++j) {
        match_col[j] = width;
        width += 1;
        insert_col[j] = width;
        width += insert_width[j];
    }

    Alignment aln;
    for (std::size_t k = 0; k < paths.size(); ++k) {
        std::vector<std::uint8_t> row(width, Alignment::gap);
        std::size_t pos = 0;
        std::vector<std::size_t> used(m + 1, 0);
        for (const auto& s : paths[k]) {
            if (s.kind == StateKind::match) {
                row[match_col[s.index]] = seqs[k].residues[pos++];
            } else if (s.kind == StateKind::insert) {
                row[insert_col[s.index] + used[s.index]] = seqs[k].residues[pos++];
                ++used[s.index];
            }
        }
        aln.ids.push_back(seqs[k].id);
        aln.rows.push_back(std::move(row));
    }
    return aln;
}

// Decode every sequence under the model and assemble the alignment.
inline Alignment align(const ProfileHmm& hmm, const std::vector<Sequence>& seqs) {
    std::vector<StatePath> paths;
    paths.reserve(seqs.size());
    for (const auto& s : seqs) paths.push_back(viterbi(hmm, s).first);
    return build_alignment(paths, seqs, hmm.num_match());
}

}  // namespace emtk
