// Deterministic random number generation. All randomness in the toolkit
// flows from a 64-bit seed through counter-based derivation, so restarts
// and parallel streams are reproducible and order-insensitive.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace emtk {

// splitmix64 step (Vigna). Good 64-bit mixing, tiny state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from (master, index). Used for
// restart seeds and per-entry randomization streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    return splitmix64(s);
}

// xoshiro-free minimal generator: splitmix64 iterated. Sequential draws
// from one seed are statistically fine for simulation/initialization use.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    // standard normal via Marsaglia polar method
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    // Dirichlet(1,...,1): normalized exponentials
    std::vector<double> dirichlet_flat(std::size_t k) {
        std::vector<double> x(k);
        double total = 0.0;
        for (auto& v : x) {
            double u = uniform();
            if (u <= 0.0) u = 0x1.0p-53;
            v = -std::log(u);
            total += v;
        }
        for (auto& v : x) v /= total;
        return x;
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace emtk
