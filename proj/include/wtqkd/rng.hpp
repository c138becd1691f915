// rng.hpp
//
// Counter-based random numbers. A generator is a (key, counter) pair; output
// k of a stream is a pure function of the key and k, so runs are reproducible
// bit-for-bit and independent streams can be carved out with split().
//
// Stream-splitting contract: split(i) for distinct i yields statistically
// independent generators, and split() never advances the parent. Callers that
// shard work derive one child per shard from a common parent, e.g.
// parent.split(shard_index).

#ifndef WTQKD_RNG_HPP
#define WTQKD_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>

#include "wtqkd/types.hpp"

namespace wtqkd {

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed = 0)
        : key_(detail::mix64(seed + 0x9e3779b97f4a7c15ULL)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return at(counter_++); }

    /// Output at an absolute counter position; does not touch the state.
    result_type at(std::uint64_t counter) const {
        return detail::mix64(key_ ^ detail::mix64(counter * 0x9e3779b97f4a7c15ULL + 1));
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * constants::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Poisson variate. Inversion for small means, normal approximation is
    /// never used so that small-probability tails stay exact.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 30.0) {
            // split into chunks to keep exp(-mean) representable
            std::uint64_t total = 0;
            double remaining = mean;
            while (remaining > 30.0) {
                total += poisson(30.0);
                remaining -= 30.0;
            }
            return total + poisson(remaining);
        }
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    CounterRng split(std::uint64_t stream) const {
        CounterRng child;
        child.key_ = detail::mix64(key_ ^ detail::mix64(stream + 0x632be59bd9b4e019ULL));
        return child;
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace wtqkd

#endif  // WTQKD_RNG_HPP
