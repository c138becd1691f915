#include "wtqkd/laser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wtqkd/errors.hpp"
#include "wtqkd/format.hpp"
#include "wtqkd/rng.hpp"

namespace wtqkd {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

}  // namespace

void LaserParams::validate() const {
    require(elementary_charge_C > 0, "elementary_charge must be positive");
    require(confinement > 0, "confinement must be positive");
    require(group_velocity_m_per_s > 0, "group_velocity must be positive");
    require(differential_gain_m2 > 0, "differential_gain must be positive");
    require(active_volume_m3 > 0, "active_volume must be positive");
    require(threshold_current_mA > 0, "threshold_current must be positive");
    require(carrier_lifetime_ns > 0, "carrier_lifetime must be positive");
    require(photon_lifetime_ps > 0, "photon_lifetime must be positive");
    require(spont_emission_fraction >= 0 && spont_emission_fraction < 1,
            "spont_emission_fraction must be in [0, 1)");
    require(gain_compression >= 0, "gain_compression must be nonnegative");
    require(transparency_density_m3 > 0, "transparency_density must be positive");
    require(mode_count >= 3 && mode_count % 2 == 1, "mode_count must be odd and at least 3");
    require(mode_spacing_nm > 0, "mode_spacing must be positive");
    require(center_wavelength_nm > 0, "center_wavelength must be positive");
    require(gain_envelope_width_nm > 0, "gain_envelope_width must be positive");
    require(temperature_tuning_nm_per_K > 0, "temperature_tuning_coeff must be positive");
}

double LaserParams::threshold_density() const {
    return transparency_density_m3 + 1.0 / (gain_coefficient() * photon_lifetime_ps * ps);
}

double LaserParams::model_threshold_current_mA() const {
    return elementary_charge_C * active_volume_m3 * threshold_density() /
           (carrier_lifetime_ns * ns) / mA;
}

double LaserParams::round_trip_time_s() const {
    const double lambda = center_wavelength_nm * nm;
    return lambda * lambda / (constants::speed_of_light * mode_spacing_nm * nm);
}

double LaserParams::gain_envelope(double wavelength_nm) const {
    const double d = (wavelength_nm - center_wavelength_nm) / gain_envelope_width_nm;
    return std::exp(-0.5 * d * d);
}

void InjectionParams::validate() const {
    require(power_uW >= 0, "injection power must be nonnegative");
    require(wavelength_nm >= 1500.0 && wavelength_nm <= 1600.0,
            "injection wavelength must lie within [1500, 1600] nm");
    require(coupling_rate_per_ns >= 0, "coupling rate must be nonnegative");
    require(std::isfinite(phase_rad), "injection phase must be finite");
}

void DriveSignal::validate() const {
    require(sample_interval_ps > 0, "drive sample_interval must be positive");
    require(samples_mA.size() > 0, "drive has no samples");
    require((samples_mA >= 0).all(), "drive currents must be nonnegative");
}

double DriveSignal::current_mA(double t_ps) const {
    const double x = t_ps / sample_interval_ps;
    const auto n = samples_mA.size();
    if (x <= 0) return samples_mA(0);
    const auto i = static_cast<Eigen::Index>(x);
    if (i >= n - 1) return samples_mA(n - 1);
    const double f = x - static_cast<double>(i);
    return samples_mA(i) + f * (samples_mA(i + 1) - samples_mA(i));
}

DriveSignal constant_drive(double bias_mA, double duration_ps, double sample_interval_ps) {
    DriveSignal d;
    d.dc_bias_mA = bias_mA;
    d.sample_interval_ps = sample_interval_ps;
    const auto n = static_cast<Eigen::Index>(std::ceil(duration_ps / sample_interval_ps));
    d.samples_mA = ArrayXd::Constant(std::max<Eigen::Index>(n, 1), bias_mA);
    std::ostringstream os;
    os << "cw " << bias_mA << " mA";
    d.pattern_description = os.str();
    return d;
}

DriveSignal gain_switch_drive(const GainSwitchSpec& spec) {
    require(spec.clock_GHz > 0, "clock must be positive");
    require(spec.pulses > 0, "pulse count must be positive");
    require(spec.rf_fwhm_ps > 0, "rf pulse width must be positive");
    const double period = 1e3 / spec.clock_GHz;
    const double s = spec.rf_fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const auto n = static_cast<Eigen::Index>(std::ceil(spec.pulses * period / spec.sample_interval_ps));

    auto slot_on = [&](long k) {
        if (spec.pattern.empty()) return true;
        return static_cast<bool>(spec.pattern[static_cast<std::size_t>(k) % spec.pattern.size()]);
    };

    ArrayXd shape(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * spec.sample_interval_ps;
        const long k = static_cast<long>(std::floor(t / period));
        double v = 0.0;
        // neighbouring slots overlap only through the Gaussian tails
        for (long j = k - 1; j <= k + 1; ++j) {
            if (j < 0 || j >= spec.pulses || !slot_on(j)) continue;
            const double dt = t - (static_cast<double>(j) + 0.5) * period;
            v += std::exp(-0.5 * dt * dt / (s * s));
        }
        shape(i) = v;
    }
    // AC coupling: the RF component has zero mean over the pattern.
    const double mean = shape.mean();

    DriveSignal d;
    d.dc_bias_mA = spec.dc_bias_mA;
    d.sample_interval_ps = spec.sample_interval_ps;
    d.samples_mA = (spec.dc_bias_mA + spec.rf_amplitude_mA * (shape - mean)).max(0.0);
    std::ostringstream os;
    os << "gain-switched " << spec.clock_GHz << " GHz, " << spec.pulses << " slots, rf "
       << spec.rf_amplitude_mA << " mA / " << spec.rf_fwhm_ps << " ps";
    d.pattern_description = os.str();
    return d;
}

double tec_tuning(const LaserParams& params, double injection_wavelength_nm) {
    const double half = (params.mode_count - 1) / 2.0;
    const double x = (injection_wavelength_nm - params.center_wavelength_nm) / params.mode_spacing_nm;
    const double k = std::clamp(std::round(x), -half, half);
    const double shift_nm = injection_wavelength_nm -
                            (params.center_wavelength_nm + k * params.mode_spacing_nm);
    return shift_nm / params.temperature_tuning_nm_per_K;
}

ModeGrid make_mode_grid(const LaserParams& params, double injection_wavelength_nm,
                        std::optional<double> tec_delta_K) {
    const double dT = tec_delta_K ? *tec_delta_K : tec_tuning(params, injection_wavelength_nm);
    const double shift = dT * params.temperature_tuning_nm_per_K;
    const int M = params.mode_count;
    const double half = (M - 1) / 2.0;

    ModeGrid grid;
    grid.tec_delta_K = dT;
    grid.wavelength_nm.resize(M);
    grid.gain.resize(M);
    for (int m = 0; m < M; ++m) {
        grid.wavelength_nm(m) = params.center_wavelength_nm + (m - half) * params.mode_spacing_nm + shift;
        grid.gain(m) = params.gain_envelope(grid.wavelength_nm(m));
    }
    Eigen::Index best = 0;
    (grid.wavelength_nm - injection_wavelength_nm).abs().minCoeff(&best);
    grid.injected_index = static_cast<int>(best);

    const double c = constants::speed_of_light;
    grid.detuning_rad_per_s = 2.0 * constants::pi * c *
                              (1.0 / (injection_wavelength_nm * nm) -
                               1.0 / (grid.wavelength_nm(best) * nm));
    return grid;
}

FieldTrace FieldTrace::after(double t0_ps) const {
    Eigen::Index first = 0;
    while (first < samples() && time_ps(first) < t0_ps) ++first;
    const Eigen::Index n = samples() - first;
    FieldTrace out = *this;
    out.time_ps = time_ps.segment(first, n);
    out.injected_field = injected_field.segment(first, n);
    out.side_mode_photons = side_mode_photons.bottomRows(n);
    out.carrier_density = carrier_density.segment(first, n);
    return out;
}

namespace {

/// Right-hand side of the rate equations with all constants resolved.
struct RateEquations {
    double gain_coeff;     // Gamma v_g sigma_g
    double n_tr;
    double inv_tau_p;
    double inv_tau_n;
    double volume;
    double inv_qV;
    double eps;
    double beta;
    double alpha;
    double detuning;
    double gain_inj;       // L at the injected mode
    ArrayXd gain_side;     // L at the side modes
    cdouble injection;     // kappa E_inj e^{i phi}

    // Output scratch: derivative of side modes.
    void operator()(double current_A, cdouble E, const ArrayXd& S, double N,
                    cdouble& dE, ArrayXd& dS, double& dN) const {
        const double s_inj = std::norm(E);
        const double s_tot = s_inj + S.sum();
        const double g0 = gain_coeff * (N - n_tr) / (1.0 + eps * s_tot);
        const double spont = beta * N * volume * inv_tau_n;
        dS = (g0 * gain_side - inv_tau_p) * S + spont;
        const double g_inj = g0 * gain_inj;
        dE = 0.5 * cdouble(1.0, alpha) * (g_inj - inv_tau_p) * E - cdouble(0.0, detuning) * E + injection;
        const double stimulated = g_inj * s_inj + g0 * (gain_side * S).sum();
        dN = current_A * inv_qV - N * inv_tau_n - stimulated / volume;
    }
};

}  // namespace

FieldTrace simulate(const LaserParams& params, const DriveSignal& drive,
                    const InjectionParams& injection, std::uint64_t seed,
                    const SimulationOptions& options) {
    params.validate();
    injection.validate();
    drive.validate();
    require(drive.sample_interval_ps <= 1.0, "drive sample_interval must be at most 1 ps");
    require(drive.duration_ps() >= 1000.0 - 1e-9, "drive must cover at least 1 ns");
    require(options.step_ps > 0 && options.step_ps <= 1.0, "integration step must be in (0, 1] ps");
    require(options.output_stride >= 1, "output_stride must be at least 1");

    const ModeGrid grid = make_mode_grid(params, injection.wavelength_nm, options.tec_delta_K);
    const int M = params.mode_count;
    const int inj = grid.injected_index;

    RateEquations rhs;
    rhs.gain_coeff = params.gain_coefficient();
    rhs.n_tr = params.transparency_density_m3;
    rhs.inv_tau_p = 1.0 / (params.photon_lifetime_ps * ps);
    rhs.inv_tau_n = 1.0 / (params.carrier_lifetime_ns * ns);
    rhs.volume = params.active_volume_m3;
    rhs.inv_qV = 1.0 / (params.elementary_charge_C * params.active_volume_m3);
    rhs.eps = params.gain_compression;
    rhs.beta = params.spont_emission_fraction;
    rhs.alpha = params.linewidth_enhancement;
    rhs.detuning = -grid.detuning_rad_per_s;  // mode frequency relative to the frame
    rhs.gain_inj = grid.gain(inj);
    rhs.gain_side.resize(M - 1);

    FieldTrace trace;
    trace.side_mode_index.reserve(M - 1);
    trace.side_mode_wavelength_nm.resize(M - 1);
    for (int m = 0, j = 0; m < M; ++m) {
        if (m == inj) continue;
        rhs.gain_side(j) = grid.gain(m);
        trace.side_mode_wavelength_nm(j) = grid.wavelength_nm(m);
        trace.side_mode_index.push_back(m);
        ++j;
    }
    const double e_inj = std::sqrt(injection.power_uW * uW * params.round_trip_time_s() /
                                   photon_energy(injection.wavelength_nm * nm));
    rhs.injection = injection.coupling_rate_per_ns / ns * e_inj * std::polar(1.0, injection.phase_rad);

    const double h = options.step_ps * ps;
    const auto steps = static_cast<long>(std::floor(drive.duration_ps() / options.step_ps + 1e-9));
    const long first_recorded = static_cast<long>(std::ceil(options.record_from_ps / options.step_ps - 1e-9));
    const long stride = options.output_stride;
    const long recorded = steps >= first_recorded ? (steps - first_recorded) / stride + 1 : 0;

    trace.injected_mode_index = inj;
    trace.injected_wavelength_nm = grid.wavelength_nm(inj);
    trace.injection_phase_rad = injection.phase_rad;
    trace.sample_interval_ps = options.step_ps * static_cast<double>(stride);
    trace.rng_seed = seed;
    trace.time_ps.resize(recorded);
    trace.injected_field.resize(recorded);
    trace.side_mode_photons.resize(recorded, M - 1);
    trace.carrier_density.resize(recorded);

    // Start from the unlit carrier density for the initial current, capped at
    // threshold, with side modes at their spontaneous level.
    double N = std::min(drive.current_mA(0.0) * mA * rhs.inv_qV / rhs.inv_tau_n,
                        params.threshold_density());
    const double spont0 = rhs.beta * N * rhs.volume * rhs.inv_tau_n;
    ArrayXd S = ArrayXd::Constant(M - 1, spont0 / rhs.inv_tau_p);
    cdouble E = 0.0;

    ArrayXd k1(M - 1), k2(M - 1), k3(M - 1), k4(M - 1), Stmp(M - 1);
    cdouble e1, e2, e3, e4;
    double n1, n2, n3, n4;

    CounterRng rng(seed);
    long out = 0;
    auto record = [&](long step) {
        trace.time_ps(out) = static_cast<double>(step) * options.step_ps;
        trace.injected_field(out) = E;
        trace.side_mode_photons.row(out) = S.transpose();
        trace.carrier_density(out) = N;
        ++out;
    };
    if (first_recorded == 0) record(0);

    for (long step = 0; step < steps; ++step) {
        const double t_ps = static_cast<double>(step) * options.step_ps;
        const double i0 = drive.current_mA(t_ps) * mA;
        const double ih = drive.current_mA(t_ps + 0.5 * options.step_ps) * mA;
        const double i1 = drive.current_mA(t_ps + options.step_ps) * mA;

        rhs(i0, E, S, N, e1, k1, n1);
        Stmp = S + 0.5 * h * k1;
        rhs(ih, E + 0.5 * h * e1, Stmp, N + 0.5 * h * n1, e2, k2, n2);
        Stmp = S + 0.5 * h * k2;
        rhs(ih, E + 0.5 * h * e2, Stmp, N + 0.5 * h * n2, e3, k3, n3);
        Stmp = S + h * k3;
        rhs(i1, E + h * e3, Stmp, N + h * n3, e4, k4, n4);

        E += h / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
        S += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        N += h / 6.0 * (n1 + 2.0 * n2 + 2.0 * n3 + n4);

        if (options.noise) {
            const double spont = rhs.beta * std::max(N, 0.0) * rhs.volume * rhs.inv_tau_n;
            const double field_sigma = std::sqrt(0.5 * spont * h);
            E += cdouble(field_sigma * rng.normal(), field_sigma * rng.normal());
            for (Eigen::Index j = 0; j < S.size(); ++j) {
                const double var = spont * h * (2.0 * S(j) + 1.0);
                S(j) += std::sqrt(var) * rng.normal();
            }
        }
        S = S.max(0.0);

        if (!std::isfinite(N) || !std::isfinite(E.real()) || !std::isfinite(E.imag()) ||
            !std::isfinite(S.sum())) {
            std::ostringstream os;
            os << "non-finite state at step " << step + 1 << " (t = " << t_ps + options.step_ps
               << " ps)";
            throw NumericalInstabilityError(os.str(), step + 1);
        }

        const long next = step + 1;
        if (next >= first_recorded && (next - first_recorded) % stride == 0) record(next);
    }
    return trace;
}

void write_trace_csv(const FieldTrace& trace, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << "time_ps,re_E,im_E";
    for (int m : trace.side_mode_index) os << ",S_m" << m;
    os << ",N\n";
    for (Eigen::Index i = 0; i < trace.samples(); ++i) {
        os << format_double(trace.time_ps(i)) << ',' << format_double(trace.injected_field(i).real())
           << ',' << format_double(trace.injected_field(i).imag());
        for (Eigen::Index j = 0; j < trace.side_mode_photons.cols(); ++j)
            os << ',' << format_double(trace.side_mode_photons(i, j));
        os << ',' << format_double(trace.carrier_density(i)) << '\n';
    }
}

}  // namespace wtqkd
