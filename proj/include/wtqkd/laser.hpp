// laser.hpp
//
// Multimode rate-equation model of a Fabry-Perot laser under external optical
// injection, plus the pulse metrics used to characterize it.
//
// The mode that sits under the injected light is carried as a complex field E
// (normalized so |E|^2 is a photon number) in the frame rotating at the
// injection frequency. All other longitudinal modes are carried as photon
// numbers S_m. With N the carrier density:
//
//   dE/dt   = 1/2 (1 + i alpha) (G_inj - 1/tau_p) E - i dw E + kappa E_inj e^{i phi} + F_E
//   dS_m/dt = (G_m - 1/tau_p) S_m + beta R_sp + F_m
//   dN/dt   = I / (q V) - N / tau_n - (G_inj |E|^2 + sum_m G_m S_m) / V
//
//   G_m   = Gamma v_g sigma_g (N - N_tr) L(lambda_m) / (1 + eps S_tot)
//   L     = exp(-(lambda - lambda_c)^2 / (2 w_g^2))
//   R_sp  = N V / tau_n
//   E_inj = sqrt(P_inj tau_rt / (h nu)),  tau_rt the cavity round trip time
//
// Deterministic terms are advanced with classical RK4; Langevin terms are
// added once per step (Euler-Maruyama).

#ifndef WTQKD_LASER_HPP
#define WTQKD_LASER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wtqkd/types.hpp"

namespace wtqkd {

/// Physical constants of the Fabry-Perot laser. Units follow the field names.
struct LaserParams {
    double elementary_charge_C = constants::elementary_charge;
    double confinement = 0.3;
    double group_velocity_m_per_s = 8.3e7;
    double differential_gain_m2 = 2.5e-20;
    double active_volume_m3 = 4.0e-17;
    double threshold_current_mA = 10.87;
    double carrier_lifetime_ns = 1.0;
    double photon_lifetime_ps = 2.31;
    double linewidth_enhancement = 7.5;
    double spont_emission_fraction = 5e-6;
    double gain_compression = 7.36e-7;  // per photon in the cavity
    double transparency_density_m3 = 1.0e24;
    int mode_count = 81;
    double mode_spacing_nm = 1.25;
    double center_wavelength_nm = 1550.12;
    double gain_envelope_width_nm = 216.0;
    double temperature_tuning_nm_per_K = 0.1;

    /// Throws InvalidArgument naming the first violated constraint.
    void validate() const;

    /// Gamma v_g sigma_g in m^3/s.
    double gain_coefficient() const {
        return confinement * group_velocity_m_per_s * differential_gain_m2;
    }
    /// Carrier density at which the gain peak reaches the cavity loss.
    double threshold_density() const;
    /// Threshold current implied by the rate equations (ignores spontaneous
    /// emission), in mA.
    double model_threshold_current_mA() const;
    /// Cavity round trip time from the mode spacing, in seconds.
    double round_trip_time_s() const;
    double gain_envelope(double wavelength_nm) const;
};

struct InjectionParams {
    double power_uW = 80.0;
    double wavelength_nm = 1550.12;
    double coupling_rate_per_ns = 131.5;
    double phase_rad = 0.0;

    void validate() const;
};

/// Sampled drive current. samples_mA holds the total current (DC included).
struct DriveSignal {
    double dc_bias_mA = 0.0;
    ArrayXd samples_mA;
    double sample_interval_ps = 0.5;
    std::string pattern_description;

    void validate() const;
    double duration_ps() const {
        return static_cast<double>(samples_mA.size()) * sample_interval_ps;
    }
    /// Linear interpolation, held constant past either end.
    double current_mA(double t_ps) const;
};

DriveSignal constant_drive(double bias_mA, double duration_ps, double sample_interval_ps = 0.5);

/// AC-coupled RF pulse train on top of a DC bias. pattern selects which
/// clock slots carry a pulse and repeats; empty means every slot.
struct GainSwitchSpec {
    double dc_bias_mA = 14.8;
    double rf_amplitude_mA = 42.0;
    double rf_fwhm_ps = 95.0;
    double clock_GHz = 2.0;
    int pulses = 200;
    double sample_interval_ps = 0.5;
    std::vector<bool> pattern;
};

DriveSignal gain_switch_drive(const GainSwitchSpec& spec);

/// Mode grid after temperature tuning toward the injection wavelength.
struct ModeGrid {
    ArrayXd wavelength_nm;   // all M modes
    ArrayXd gain;            // envelope L at each mode
    int injected_index = 0;
    double tec_delta_K = 0.0;
    double detuning_rad_per_s = 0.0;  // injection minus injected-mode frequency
};

/// Picks the temperature offset that puts the nearest mode on the injection
/// wavelength. The offset is limited to half a mode spacing either way.
double tec_tuning(const LaserParams& params, double injection_wavelength_nm);

ModeGrid make_mode_grid(const LaserParams& params, double injection_wavelength_nm,
                        std::optional<double> tec_delta_K = std::nullopt);

struct SimulationOptions {
    double step_ps = 0.2;
    int output_stride = 5;          // record every n-th step
    double record_from_ps = 0.0;    // discard the start-up transient
    bool noise = true;
    std::optional<double> tec_delta_K;  // nullopt: tune onto the injection
};

/// Output of one simulation run. Immutable once returned.
struct FieldTrace {
    ArrayXd time_ps;
    ArrayXcd injected_field;      // sqrt(photons), injection frame
    ArrayXXd side_mode_photons;   // samples x (M - 1)
    ArrayXd carrier_density;      // m^-3
    std::vector<int> side_mode_index;
    ArrayXd side_mode_wavelength_nm;
    int injected_mode_index = 0;
    double injected_wavelength_nm = 0.0;
    double injection_phase_rad = 0.0;
    double sample_interval_ps = 0.0;
    std::uint64_t rng_seed = 0;

    Eigen::Index samples() const { return time_ps.size(); }
    ArrayXd injected_photons() const { return injected_field.abs2(); }
    ArrayXd total_photons() const {
        return injected_photons() + side_mode_photons.rowwise().sum();
    }
    /// Restrict to samples with time >= t0_ps.
    FieldTrace after(double t0_ps) const;
};

FieldTrace simulate(const LaserParams& params, const DriveSignal& drive,
                    const InjectionParams& injection, std::uint64_t seed,
                    const SimulationOptions& options = {});

/// CSV with header `time_ps,re_E,im_E,S_m<k>...,N`; k is the grid index of
/// each side mode.
void write_trace_csv(const FieldTrace& trace, const std::string& path);

// ---------------------------------------------------------------------------
// Metrics

/// The small-signal bandwidth approximation
///   3 / (4 pi^2 q) * Gamma v_g sigma_g / V * (I_b - I_th)
/// evaluated in SI units. The expression is dimensionally a squared
/// frequency; the result is reported in GHz^2.
double modulation_bandwidth_squared(const LaserParams& params, double bias_mA);

/// Square root of modulation_bandwidth_squared, in GHz.
double modulation_bandwidth(const LaserParams& params, double bias_mA);

/// A dB ratio whose denominator may have been empty. When censored, db is a
/// lower bound computed with the denominator replaced by one count (or the
/// smallest positive value for continuous quantities).
struct DbRatio {
    double db = 0.0;
    bool censored = false;
};

struct PulseHistogram {
    ArrayXd bin_edges_ps;
    Eigen::Array<long long, Eigen::Dynamic, 1> counts;

    void validate() const;
};

/// Folds the total output photon number modulo the clock period and converts
/// it to expected detection counts scaled so the busiest bin holds
/// peak_counts.
PulseHistogram pulse_histogram(const FieldTrace& trace, double clock_GHz,
                               double bin_width_ps = 10.0, double peak_counts = 1e6);

DbRatio extinction_ratio(const PulseHistogram& hist);

struct GaussianFit {
    double amplitude = 0.0;
    double center = 0.0;
    double sigma = 0.0;
    double offset = 0.0;
    double fwhm = 0.0;
    double residual = 0.0;   // root-mean-square
    int iterations = 0;
};

/// Levenberg-Marquardt fit of A exp(-(t - t0)^2 / (2 s^2)) + c.
GaussianFit fit_gaussian(std::span<const double> intensity, std::span<const double> time_ps,
                         int max_iterations = 200);

double fit_gaussian_fwhm(std::span<const double> intensity, std::span<const double> time_ps);

/// Total output photons folded modulo the clock period (mean pulse shape).
struct PulseShape {
    ArrayXd time_ps;
    ArrayXd photons;
};
PulseShape average_pulse(const FieldTrace& trace, double clock_GHz);

DbRatio mode_suppression_ratio(const FieldTrace& trace);

/// Energy-weighted mean phase of the injected-mode field in each clock
/// window. Windows whose energy is below threshold_fraction of the median
/// window energy yield nullopt.
std::vector<std::optional<double>> pulse_phases(const FieldTrace& trace, double clock_GHz,
                                                double threshold_fraction = 0.05);

/// |mean_k exp(i (phi_k - phi_{k+1}))|.
double interference_visibility(std::span<const double> phases);

/// Adjacent-pulse visibility as seen by a delay interferometer: the phase
/// visibility of the injected mode scaled by the fraction of pulse energy it
/// carries (side-mode light interferes with random phase).
double pulse_visibility(const FieldTrace& trace, double clock_GHz);

/// Fraction of the output photons carried by the injected mode.
double coherent_fraction(const FieldTrace& trace);

double circular_mean(std::span<const double> phases);
double circular_std(std::span<const double> phases);

/// Drops missing entries.
std::vector<double> present(const std::vector<std::optional<double>>& phases);

struct SpectralLine {
    double wavelength_nm;
    double power;
};

struct OpticalSpectrum {
    ArrayXd frequency_offset_GHz;  // relative to the injection
    ArrayXd wavelength_nm;
    ArrayXd power;                 // photons, injected mode
    std::vector<SpectralLine> side_modes;  // mean photons at each grid line
};

/// Averaged periodogram (Hann windows, 50% overlap) of the injected-mode
/// field. resolution_GHz sets the segment length; zero uses the whole trace.
OpticalSpectrum optical_spectrum(const FieldTrace& trace, double resolution_GHz = 0.0);

/// Width conventions. rms reports 2 sqrt(2 ln 2) times the power-weighted
/// standard deviation, which equals the FWHM for a Gaussian line; rms and
/// gaussian_fit use the bins within spectral_width_span_GHz of the peak.
enum class SpectralWidth { rms, gaussian_fit, half_maximum };

inline constexpr double spectral_width_span_GHz = 200.0;

/// Width of the injected-mode line in GHz. A chirped gain-switched pulse has
/// a multi-lobed spectrum on top of a narrow line from the injection itself;
/// a half-maximum reading then sees only the strongest feature.
double spectral_fwhm_GHz(const OpticalSpectrum& spectrum, SpectralWidth method = SpectralWidth::rms);

}  // namespace wtqkd

#endif  // WTQKD_LASER_HPP
