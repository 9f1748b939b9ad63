#pragma once

#include <cstdint>
#include <random>

namespace mmr {

// Deterministic random source.  mt19937_64 is fully specified by the
// standard, but the std:: distributions are not; the transforms below are
// hand-rolled so that a given seed produces identical streams on every
// platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Derives an independent, reproducible stream, e.g. one per replication.
    static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        Rng r(0);
        r.gen_.seed(seq);
        return r;
    }

    std::uint64_t bits() { return gen_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling keeps the draw exactly uniform.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    // Standard normal via Box-Muller; one value per call, no cached spare,
    // so the stream position is independent of call parity.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Index drawn from unnormalized nonnegative weights.
    std::size_t categorical(const std::vector<double>& w) {
        double total = 0.0;
        for (double v : w) total += v;
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            u -= w[i];
            if (u < 0.0) return i;
        }
        return w.empty() ? 0 : w.size() - 1;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace mmr
