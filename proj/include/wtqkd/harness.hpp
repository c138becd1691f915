// harness.hpp
//
// Experiment configuration, the laser-to-link bridge, injection optimization
// and the injection / attenuation / wavelength sweeps.
//
// The bridge runs a short gain-switched simulation at an operating point and
// reduces it to (extinction ratio, visibility), which then drive the fast
// analytic or Monte Carlo link model. Every grid point of a sweep reuses the
// laser noise seed (common random numbers), so differences between points
// reflect the operating point rather than noise realizations.

#ifndef WTQKD_HARNESS_HPP
#define WTQKD_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "wtqkd/keyrate.hpp"
#include "wtqkd/laser.hpp"
#include "wtqkd/protocol.hpp"
#include "wtqkd/receiver.hpp"

namespace wtqkd {

enum class Fidelity { analytic, monte_carlo };
enum class OptimizationMetric { total_qber, skr };

std::string_view to_string(Fidelity f);
std::string_view to_string(OptimizationMetric m);

/// Settings of the calibration simulation behind each operating point.
struct BridgeOptions {
    int pulses = 120;
    double warmup_ps = 3000.0;
    double step_ps = 0.2;
    int output_stride = 5;
    bool noise = true;
    // An operating point counts as locked when the pulse-to-pulse visibility
    // reaches this level.
    double lock_visibility = 0.5;
};

struct ExperimentConfig {
    LaserParams laser;
    InjectionParams injection;
    GainSwitchSpec drive;
    BridgeOptions bridge;
    ProtocolConfig protocol;
    ReceiverParams receiver;
    std::vector<double> injection_grid_uW{0, 10, 20, 40, 80, 160, 320};
    std::vector<double> attenuation_grid_dB{0,  2,  5,  8,  11.5, 15, 18, 21, 24, 26.5,
                                            30, 33, 36, 40, 44,   48, 52, 56, 60, 66};
    std::vector<double> wavelength_grid_nm;  // default: 50 GHz ITU channels, see default_wavelength_grid()
    double operating_wavelength_nm = 1550.12;
    double injection_sweep_attenuation_dB = 11.5;
    double wavelength_sweep_attenuation_dB = 26.5;
    OptimizationMetric optimization_metric = OptimizationMetric::total_qber;
    double ec_efficiency = default_ec_efficiency;
    std::uint64_t seed = 1;
    Fidelity fidelity = Fidelity::analytic;
    std::uint64_t monte_carlo_symbols = 1000000;

    ExperimentConfig();
    /// Throws SchemaError with the offending key path.
    void validate() const;
};

/// Frequency of 50 GHz ITU channel n, f = 193.1 THz + n * 50 GHz, as a
/// vacuum wavelength in nm.
double itu_channel_wavelength_nm(int n);
double nearest_itu_channel_nm(double wavelength_nm);
/// Nearest channel to each of 1515, 1520, ..., 1590 nm.
std::vector<double> default_wavelength_grid();

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);
void save_config(const ExperimentConfig& config, const std::string& path);

/// Laser observables at one operating point.
struct OperatingPoint {
    double wavelength_nm = 0.0;
    double injection_uW = 0.0;
    double er_db = 0.0;
    bool er_censored = false;
    double visibility = 0.0;
    bool locked = false;

    LinkExtras extras() const { return {er_db, visibility}; }
};

OperatingPoint characterize_operating_point(const ExperimentConfig& config, double wavelength_nm,
                                            double injection_uW);

/// Error rate of basis-matched detections, weighting each basis by the
/// probability that sender and passive receiver both choose it.
double sifted_weighted_qber(const ProtocolConfig& protocol, const ReceiverParams& receiver, double e_z, double e_x);

struct InjectionOptimum {
    double injection_uW = 0.0;
    std::vector<OperatingPoint> scanned;
};

/// Grid search over the injection grid. Ties go to the lower power. Throws
/// NoLockError when no grid point locks.
InjectionOptimum optimize_injection_scan(const ExperimentConfig& config, double wavelength_nm);
double optimize_injection(const ExperimentConfig& config, double wavelength_nm);

struct SweepRow {
    double x = 0.0;
    double er_db = 0.0;
    double visibility = 0.0;
    double e_z = 0.0;
    double e_x = 0.0;
    double total_qber = 0.0;
    double Q_mu = 0.0;
    double skr_bits_per_s = 0.0;
    double injection_uW = 0.0;
    bool locked = true;
    bool saturated = false;

    bool operator==(const SweepRow&) const = default;
};

struct SweepTable {
    std::string variable;  // injection_uW, attenuation_dB or wavelength_nm
    std::vector<SweepRow> rows;

    bool operator==(const SweepTable&) const = default;
};

/// Column order: <variable>,er_db,visibility,e_z,e_x,total_qber,Q_mu,
/// skr_bits_per_s,injection_uW,locked,saturated.
std::string sweep_to_csv(const SweepTable& table);
SweepTable sweep_from_csv(const std::string& text);
void emit_csv(const SweepTable& table, const std::string& path);
SweepTable load_csv(const std::string& path);

/// Link-level evaluation of one operating point at one attenuation.
SweepRow evaluate_link(const ExperimentConfig& config, const ReceiverParams& receiver, const OperatingPoint& op,
                       double attenuation_dB, std::uint64_t point_seed);

SweepTable run_injection_sweep(const ExperimentConfig& config);
SweepTable run_attenuation_sweep(const ExperimentConfig& config);
SweepTable run_wavelength_sweep(const ExperimentConfig& config);

/// Seed for sweep point `index`, derived from the experiment seed.
std::uint64_t point_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace wtqkd

#endif  // WTQKD_HARNESS_HPP
