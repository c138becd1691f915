// keyrate.hpp
//
// Sifting, vacuum + weak decoy bounds and the asymptotic secure key rate.

#ifndef WTQKD_KEYRATE_HPP
#define WTQKD_KEYRATE_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "wtqkd/protocol.hpp"
#include "wtqkd/receiver.hpp"

namespace wtqkd {

/// Gains and error rates indexed [intensity class][basis].
using RateTable = std::array<std::array<GainQber, 2>, 3>;

struct TallyCell {
    std::uint64_t sent = 0;
    std::uint64_t detected = 0;
    std::uint64_t errors = 0;

    bool operator==(const TallyCell&) const = default;
};

struct DetectionTally {
    std::array<std::array<TallyCell, 2>, 3> cells{};
    std::uint64_t sifted_out = 0;

    TallyCell& at(IntensityClass c, Basis b) {
        return cells[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
    }
    const TallyCell& at(IntensityClass c, Basis b) const {
        return cells[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
    }

    /// Associative and commutative, so shards merge in any order.
    DetectionTally& operator+=(const DetectionTally& other);
    bool operator==(const DetectionTally&) const = default;

    void validate() const;
    /// detected / sent and errors / detected per cell; empty cells give zeros.
    RateTable rates() const;
};

/// Throws MalformedRecord on indices outside `sent` or detector/bin mismatch.
DetectionTally sift(std::span<const Symbol> sent, std::span<const DetectionRecord> records);

double binary_entropy(double p);

/// Poissonian source through a channel of total transmittance eta.
GainQber analytic_gain_qber(double intensity, double eta_total, double y0, double e_opt);

struct DecoyBounds {
    double y1_lower = 0.0;
    double e1_upper = 0.0;
};

/// Vacuum + weak decoy bounds from one basis. Throws EstimationAborted when
/// the single-photon yield bound is not positive.
DecoyBounds decoy_bounds(const GainQber& signal, const GainQber& decoy, double y0, double mu, double nu);

struct SkrResult {
    double skr = 0.0;  // bit/s
    double q_sift = 0.0;
    double Q_mu = 0.0;
    double E_mu = 0.0;
    double Y1_lower = 0.0;
    double e1_upper = 0.0;
    double Q1_lower = 0.0;
    bool estimation_aborted = false;
};

inline constexpr double default_ec_efficiency = 1.16;

SkrResult secure_key_rate(double Q_mu, double E_mu, double y1_lower, double e1_upper, const ProtocolConfig& config,
                          double clock_GHz, double ec_efficiency = default_ec_efficiency);

/// Full estimate from observed rates. The yield bound and the signal gain
/// come from the Z basis; the phase-error bound comes from the X basis with
/// its own yield bound, since the two receiver paths have different
/// transmittance. An aborted estimate yields skr = 0.
SkrResult estimate_key_rate(const RateTable& rates, const ProtocolConfig& config,
                            double ec_efficiency = default_ec_efficiency);

/// CSV `class,basis,sent,detected,errors`.
void write_tally_csv(const DetectionTally& tally, const std::string& path);
DetectionTally read_tally_csv(const std::string& path);

/// One `key=value` line per field.
void write_skr_result(const SkrResult& result, std::ostream& os);

}  // namespace wtqkd

#endif  // WTQKD_KEYRATE_HPP
