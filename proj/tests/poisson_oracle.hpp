// Exact photon-number sums for synthetic channels, used as an independent
// reference for the decoy-state estimators.

#ifndef WTQKD_TEST_POISSON_ORACLE_HPP
#define WTQKD_TEST_POISSON_ORACLE_HPP

#include <cmath>
#include <utility>

namespace test {

struct SyntheticChannel {
    double eta;
    double y0;
    double e_opt;

    double yield(int n) const { return 1.0 - (1.0 - y0) * std::pow(1.0 - eta, n); }
    double error(int n) const {
        const double y = yield(n);
        return y > 0 ? (0.5 * y0 + e_opt * (y - y0)) / y : 0.0;
    }
};

/// (gain, qber) of a phase-randomized coherent state, summed over n = 0..50.
inline std::pair<double, double> poisson_gain_qber(double mean, const SyntheticChannel& ch) {
    double q = 0.0, eq = 0.0;
    double pn = std::exp(-mean);
    for (int n = 0; n <= 50; ++n) {
        if (n > 0) pn *= mean / n;
        q += pn * ch.yield(n);
        eq += pn * ch.yield(n) * ch.error(n);
    }
    return {q, q > 0 ? eq / q : 0.0};
}

}  // namespace test

#endif
