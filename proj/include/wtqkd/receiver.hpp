// receiver.hpp
//
// Attenuating channel and passive-basis receiver: a beamsplitter sends light
// either to a time-of-arrival detector (D1) or through an asymmetric
// Mach-Zehnder interferometer onto D2/D3. Detectors are threshold SNSPDs with
// dark counts and a non-paralyzable dead time.
//
// Gate timing per symbol of period T: D1 is gated at 0 (early) and T/2 (late);
// D2 and D3 are gated at T/2, where the long-arm copy of the early pulse
// overlaps the short-arm copy of the late pulse. The two side slots of the
// interferometer are not scored.

#ifndef WTQKD_RECEIVER_HPP
#define WTQKD_RECEIVER_HPP

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wtqkd/protocol.hpp"

namespace wtqkd {

struct ChannelParams {
    double attenuation_dB = 0.0;
    void validate() const;
};

struct ReceiverParams {
    double bs_z_fraction = 0.5;
    double amzi_visibility = 0.99;
    double amzi_insertion_loss_dB = 2.0;
    double receiver_insertion_loss_dB = 1.0;
    double detector_efficiency = 0.33;
    double dark_count_rate_Hz = 1.0;
    double gate_window_ps = 500.0;
    double dead_time_ns = 20.0;
    // Gaussian width of the detector efficiency versus wavelength, centred on
    // 1550 nm. The default gives 90 % of peak at +-35 nm.
    double efficiency_envelope_width_nm = 35.0 / std::sqrt(2.0 * std::log(1.0 / 0.9));

    void validate() const;
    double dark_probability_per_gate() const { return dark_count_rate_Hz * gate_window_ps * 1e-12; }
};

enum class Detector { D1 = 0, D2 = 1, D3 = 2 };
enum class TimeBin { early, late, interference };

std::string_view to_string(Detector d);
std::string_view to_string(TimeBin b);
Detector parse_detector(std::string_view s);
TimeBin parse_time_bin(std::string_view s);

struct DetectionRecord {
    std::uint64_t symbol_index = 0;
    Detector detector = Detector::D1;
    TimeBin bin = TimeBin::early;
    bool is_dark = false;

    bool operator==(const DetectionRecord&) const = default;
};

/// Transmitter imperfections carried into the link model.
struct LinkExtras {
    double extinction_ratio_dB = std::numeric_limits<double>::infinity();
    double visibility = 1.0;

    void validate() const;
    /// Fraction of a Z pulse's energy found in the unoccupied bin.
    double leakage_fraction() const;
};

double channel_transmittance(double attenuation_dB);

struct AmziProbs {
    double d2;
    double d3;
};
AmziProbs amzi_output_probs(double relative_phase, double visibility);

double click_probability(double mean_photons, double efficiency, double dark_probability);

/// Per-path mean photon survival, detector efficiency included.
struct PathTransmittance {
    double direct;          // to D1
    double interferometer;  // into the scored interference slot, both outputs together
};
PathTransmittance path_transmittance(const ChannelParams& channel, const ReceiverParams& receiver);

struct GainQber {
    double gain = 0.0;   // basis-matched records per sent symbol
    double qber = 0.0;
};

struct AnalyticDetection {
    // indexed [intensity class][basis]
    std::array<std::array<GainQber, 2>, 3> rates{};
    std::array<double, 3> records_per_symbol{};  // per detector, all symbols mixed
    std::array<double, 3> count_rate_Hz{};
    std::array<double, 3> dead_time_survival{};
    bool saturated = false;

    const GainQber& at(IntensityClass c, Basis b) const {
        return rates[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
    }
};

/// Count rate above which a detector is flagged as saturating.
inline constexpr double saturation_count_rate_Hz = 10e6;

/// Expected gains and error rates from Poisson statistics. Dead time enters as
/// a stationary renewal correction: a detector with mean raw click
/// probability p per gate and n gates inside one dead time is live a fraction
/// 1 / (1 + n p) of the time.
AnalyticDetection detect_analytic(const ProtocolConfig& config, const ChannelParams& channel,
                                  const ReceiverParams& receiver, const LinkExtras& extras = {});

/// Photon-level sampling of the same model. Symbol k draws from the child
/// stream split(k) of the seeded generator, so results do not depend on how
/// a run is sharded apart from dead time across shard boundaries.
std::vector<DetectionRecord> detect_monte_carlo(std::span<const Symbol> symbols, const ProtocolConfig& config,
                                                const ChannelParams& channel, const ReceiverParams& receiver,
                                                std::uint64_t seed, const LinkExtras& extras = {});

/// Detector efficiency scaled by the Gaussian wavelength envelope.
ReceiverParams wavelength_adjusted_receiver(const ReceiverParams& receiver, double wavelength_nm);

/// CSV `symbol_index,detector,bin,is_dark`.
void write_records_csv(std::span<const DetectionRecord> records, const std::string& path);
std::vector<DetectionRecord> read_records_csv(const std::string& path);

}  // namespace wtqkd

#endif  // WTQKD_RECEIVER_HPP
