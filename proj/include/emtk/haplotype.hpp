// Haplotype frequency inference from unphased biallelic genotypes. Each
// individual's two haplotypes are modeled as independent draws from a pooled
// frequency vector; EM alternates expected haplotype counts with the
// normalized count update. Phase calls pick the posterior-best compatible
// pair per individual.
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
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
#include "emtk/seqio.hpp"

namespace emtk {

struct Haplotype {
    std::vector<std::uint8_t> alleles;  // 0 or 1 per locus

    friend auto operator<=>(const Haplotype&, const Haplotype&) = default;
};

// Render with the per-locus allele letters recorded in a genotype table.
inline std::string render_haplotype(const Haplotype& h,
                                    const std::vector<std::pair<char, char>>& locus_alleles) {
    if (h.alleles.size() != locus_alleles.size())
        throw std::invalid_argument("render_haplotype: locus count mismatch");
    std::string out;
    out.reserve(h.alleles.size());
    for (std::size_t j = 0; j < h.alleles.size(); ++j)
        out.push_back(h.alleles[j] ? locus_alleles[j].second : locus_alleles[j].first);
    return out;
}

// Enumerating 2^(h-1) phases per individual is viable only for modest
// heterozygosity; beyond this limit we fail loudly rather than thrash.
inline constexpr std::size_t max_het_loci = 20;

using HaplotypePairList = std::vector<std::pair<Haplotype, Haplotype>>;

// All unordered haplotype pairs whose locus-wise union reproduces the
// genotype: homozygous loci force both alleles, each heterozygous locus
// contributes one of each. Exactly max(1, 2^(h-1)) pairs for h heterozygous
// loci, in lexicographic order.
inline HaplotypePairList compatible_pairs(std::span<const std::uint8_t> genotype,
                                          const std::string& individual = {}) {
    std::vector<std::size_t> hets;
    Haplotype base;
    base.alleles.resize(genotype.size(), 0);
    for (std::size_t j = 0; j < genotype.size(); ++j) {
        if (genotype[j] > 2)
            throw std::invalid_argument("compatible_pairs: dosage must be 0, 1 or 2");
        if (genotype[j] == 1)
            hets.push_back(j);
        else
            base.alleles[j] = genotype[j] == 2 ? 1 : 0;
    }
    if (hets.size() > max_het_loci) {
        std::ostringstream msg;
        msg << "individual " << (individual.empty() ? "" : "'" + individual + "' ")
            << "has " << hets.size() << " heterozygous loci, more than the supported "
            << max_het_loci;
        throw std::invalid_argument(msg.str());
    }

    HaplotypePairList pairs;
    if (hets.empty()) {
        pairs.emplace_back(base, base);
        return pairs;
    }
    // fix the first heterozygous locus to allele 0 in the first haplotype so
    // each unordered pair appears once
    const std::size_t combos = std::size_t(1) << (hets.size() - 1);
    pairs.reserve(combos);
    for (std::size_t code = 0; code < combos; ++code) {
        Haplotype a = base, b = base;
        a.alleles[hets[0]] = 0;
        b.alleles[hets[0]] = 1;
        for (std::size_t t = 1; t < hets.size(); ++t) {
            const std::uint8_t bit = (code >> (t - 1)) & 1;
            a.alleles[hets[t]] = bit;
            b.alleles[hets[t]] = static_cast<std::uint8_t>(1 - bit);
        }
        pairs.emplace_back(std::move(a), std::move(b));
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

struct HaplotypePool {
    std::vector<Haplotype> haplotypes;  // ascending, unique
    std::vector<double> theta;

    std::size_t size() const { return haplotypes.size(); }

    std::optional<std::size_t> find(const Haplotype& h) const {
        const auto it = std::lower_bound(haplotypes.begin(), haplotypes.end(), h);
        if (it == haplotypes.end() || *it != h) return std::nullopt;
        return static_cast<std::size_t>(it - haplotypes.begin());
    }

    void validate() const {
        if (haplotypes.size() != theta.size())
            throw std::invalid_argument("HaplotypePool: frequency count mismatch");
        if (haplotypes.empty()) throw std::invalid_argument("HaplotypePool: empty pool");
        double total = 0.0;
        for (double t : theta) {
            if (!(t >= 0.0)) throw std::invalid_argument("HaplotypePool: negative frequency");
            total += t;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("HaplotypePool: frequencies do not sum to 1");
        for (std::size_t j = 1; j < haplotypes.size(); ++j)
            if (!(haplotypes[j - 1] < haplotypes[j]))
                throw std::invalid_argument("HaplotypePool: haplotypes not strictly ordered");
    }
};

// Union of every haplotype reachable from any individual's compatible
// phases, uniformly weighted.
inline HaplotypePool build_pool(const GenotypeTable& table) {
    if (table.individuals() == 0) throw std::invalid_argument("build_pool: no individuals");
    HaplotypePool pool;
    for (std::size_t i = 0; i < table.individuals(); ++i)
        for (auto& [a, b] : compatible_pairs(table.dosages[i], table.ids[i])) {
            pool.haplotypes.push_back(a);
            pool.haplotypes.push_back(b);
        }
    std::sort(pool.haplotypes.begin(), pool.haplotypes.end());
    pool.haplotypes.erase(std::unique(pool.haplotypes.begin(), pool.haplotypes.end()),
                          pool.haplotypes.end());
    pool.theta.assign(pool.haplotypes.size(), 1.0 / double(pool.haplotypes.size()));
    return pool;
}

namespace detail {

struct IndexedPair {
    std::size_t j, k;  // pool indices, j <= k
    double weight;     // 1 for a homozygous pair, 2 for a heterozygous one
};

// Pool-index form of each individual's compatible pairs; phases whose
// haplotypes are missing from the pool are dropped.
inline std::vector<std::vector<IndexedPair>> index_pairs(const GenotypeTable& table,
                                                         const HaplotypePool& pool) {
    std::vector<std::vector<IndexedPair>> out(table.individuals());
    for (std::size_t i = 0; i < table.individuals(); ++i) {
        for (auto& [a, b] : compatible_pairs(table.dosages[i], table.ids[i])) {
            const auto ja = pool.find(a);
            const auto jb = pool.find(b);
            if (!ja || !jb) continue;
            const auto lo = std::min(*ja, *jb);
            const auto hi = std::max(*ja, *jb);
            out[i].push_back(IndexedPair{lo, hi, lo == hi ? 1.0 : 2.0});
        }
        if (out[i].empty()) {
            std::ostringstream msg;
            msg << "individual '" << table.ids[i] << "' has no compatible phase in the pool";
            throw std::invalid_argument(msg.str());
        }
    }
    return out;
}

}  // namespace detail

struct HaplotypeCounts {
    std::vector<double> counts;  // expected occurrences per pool haplotype
    double loglik = 0.0;
};

// Expected haplotype counts under the current frequencies. Each individual
// spreads posterior mass over its compatible pairs in proportion to
// theta_j * theta_k (doubled for unordered heterozygous pairs).
inline HaplotypeCounts e_step(const GenotypeTable& table, const HaplotypePool& pool) {
    for (double t : pool.theta)
        if (!(t > 0.0))
            throw std::invalid_argument("e_step: pool frequencies must be strictly positive");
    const auto pairs = detail::index_pairs(table, pool);

    HaplotypeCounts out;
    out.counts.assign(pool.size(), 0.0);
    KahanSum ll;
    for (std::size_t i = 0; i < table.individuals(); ++i) {
        double total = 0.0;
        for (const auto& p : pairs[i]) total += p.weight * pool.theta[p.j] * pool.theta[p.k];
        if (!(total > 0.0)) {
            std::ostringstream msg;
            msg << "individual '" << table.ids[i] << "' has zero compatibility mass";
            throw std::invalid_argument(msg.str());
        }
        for (const auto& p : pairs[i]) {
            const double post = p.weight * pool.theta[p.j] * pool.theta[p.k] / total;
            out.counts[p.j] += post;
            out.counts[p.k] += post;
        }
        ll.add(std::log(total));
    }
    out.loglik = ll.value();
    return out;
}

// Normalized count update theta_j = E[n_j] / 2n, floored and renormalized so
// the next E-step's posteriors stay defined.
inline std::vector<double> m_step(std::span<const double> counts, std::size_t individuals) {
    if (individuals == 0) throw std::invalid_argument("m_step: no individuals");
    const double expected = 2.0 * double(individuals);
    double total = 0.0;
    for (double c : counts) total += c;
    if (std::abs(total - expected) > 1e-9)
        throw std::invalid_argument("m_step: expected counts do not sum to twice the population");
    std::vector<double> theta(counts.size());
    double norm = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        theta[j] = std::max(counts[j] / expected, 1e-12);
        norm += theta[j];
    }
    for (double& t : theta) t /= norm;
    return theta;
}

class HaplotypeProblem {
  public:
    using Params = std::vector<double>;

    struct Stats {
        std::vector<double> counts;
    };

    explicit HaplotypeProblem(const GenotypeTable& table)
        : individuals_(table.individuals()),
          pool_(build_pool(table)),
          pairs_(detail::index_pairs(table, pool_)) {}

    const HaplotypePool& pool() const { return pool_; }
    std::size_t individuals() const { return individuals_; }

    Params initial_guess() const { return pool_.theta; }

    Params random_init(std::uint64_t seed) const {
        Rng rng(seed);
        Params theta = rng.dirichlet_flat(pool_.size());
        double norm = 0.0;
        for (double& t : theta) {
            t = std::max(t, 1e-12);
            norm += t;
        }
        for (double& t : theta) t /= norm;
        return theta;
    }

    EStepResult<Stats> expect(const Params& theta) const {
        EStepResult<Stats> out;
        out.stats.counts.assign(pool_.size(), 0.0);
        KahanSum ll;
        for (std::size_t i = 0; i < individuals_; ++i) {
            double total = 0.0;
            for (const auto& p : pairs_[i]) total += p.weight * theta[p.j] * theta[p.k];
            for (const auto& p : pairs_[i]) {
                const double post = p.weight * theta[p.j] * theta[p.k] / total;
                out.stats.counts[p.j] += post;
                out.stats.counts[p.k] += post;
            }
            ll.add(std::log(total));
        }
        out.loglik = ll.value();
        return out;
    }

    Params maximize(const Stats& stats, const Params&) const {
        return m_step(stats.counts, individuals_);
    }

    double log_likelihood(const Params& theta) const { return expect(theta).loglik; }

    const std::vector<detail::IndexedPair>& pairs_of(std::size_t i) const { return pairs_[i]; }

  private:
    std::size_t individuals_;
    HaplotypePool pool_;
    std::vector<std::vector<detail::IndexedPair>> pairs_;
};

struct PhaseCall {
    std::size_t first = 0, second = 0;  // pool indices, first <= second
    double posterior = 0.0;
};

struct HaplotypePhaseResult {
    HaplotypePool pool;            // fitted frequencies; entries < 1e-8 reported as 0
    std::vector<PhaseCall> calls;  // posterior-best pair per individual
    EmTrace trace;
    std::size_t best_restart = 0;
};

inline HaplotypePhaseResult phase_genotypes(const GenotypeTable& table,
                                            const EmConfig& config = {}) {
    HaplotypeProblem problem(table);
    auto ms = multi_start(problem, config);
    const std::vector<double>& theta = ms.best;

    HaplotypePhaseResult out;
    out.trace = std::move(ms.traces[ms.best_restart]);
    out.best_restart = ms.best_restart;
    out.calls.resize(table.individuals());
    for (std::size_t i = 0; i < table.individuals(); ++i) {
        const auto& pairs = problem.pairs_of(i);
        double total = 0.0;
        for (const auto& p : pairs) total += p.weight * theta[p.j] * theta[p.k];
        std::size_t argmax = 0;
        double best = -1.0;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const double post = pairs[p].weight * theta[pairs[p].j] * theta[pairs[p].k] / total;
            if (post > best) {  // ties keep the earlier, canonically ordered pair
                best = post;
                argmax = p;
            }
        }
        out.calls[i] = {pairs[argmax].j, pairs[argmax].k, best};
    }

    out.pool = problem.pool();
    out.pool.theta = theta;
    double kept = 0.0;
    for (double& t : out.pool.theta) {
        if (t < 1e-8) t = 0.0;
        kept += t;
    }
    for (double& t : out.pool.theta) t /= kept;
    return out;
}

}  // namespace emtk
