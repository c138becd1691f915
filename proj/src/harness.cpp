#include "wtqkd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wtqkd/errors.hpp"
#include "wtqkd/format.hpp"

namespace wtqkd {

using nlohmann::json;

std::string_view to_string(Fidelity f) { return f == Fidelity::analytic ? "analytic" : "monte_carlo"; }
std::string_view to_string(OptimizationMetric m) { return m == OptimizationMetric::total_qber ? "total_qber" : "skr"; }

double itu_channel_wavelength_nm(int n) {
    return constants::speed_of_light / (193.1e12 + 50e9 * n) / nm;
}

double nearest_itu_channel_nm(double wavelength_nm) {
    const double f = constants::speed_of_light / (wavelength_nm * nm);
    return itu_channel_wavelength_nm(static_cast<int>(std::lround((f - 193.1e12) / 50e9)));
}

std::vector<double> default_wavelength_grid() {
    std::vector<double> out;
    for (int w = 1515; w <= 1590; w += 5) out.push_back(nearest_itu_channel_nm(w));
    return out;
}

ExperimentConfig::ExperimentConfig() : wavelength_grid_nm(default_wavelength_grid()) {}

std::uint64_t point_seed(std::uint64_t seed, std::uint64_t index) {
    return CounterRng(seed).split(index).at(0);
}

namespace {

// Laser noise stream shared by every operating point.
constexpr std::uint64_t laser_stream = 0x6c61736572ULL;

void check_grid(const std::vector<double>& grid, const std::string& key) {
    if (grid.empty()) throw SchemaError(key, "grid must not be empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw SchemaError(key, "grid must be sorted in strictly ascending order");
}

template <typename F>
void rethrow_as_schema(const std::string& key, F&& f) {
    try {
        f();
    } catch (const InvalidArgument& e) {
        throw SchemaError(key, e.what());
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    rethrow_as_schema("laser", [&] { laser.validate(); });
    rethrow_as_schema("injection", [&] { injection.validate(); });
    if (!(drive.clock_GHz > 0)) throw SchemaError("drive.clock_GHz", "must be positive");
    if (drive.pulses < 1) throw SchemaError("drive.pulses", "must be at least 1");
    if (!(drive.sample_interval_ps > 0)) throw SchemaError("drive.sample_interval_ps", "must be positive");
    if (!(drive.rf_fwhm_ps > 0)) throw SchemaError("drive.rf_fwhm_ps", "must be positive");
    if (bridge.pulses < 4) throw SchemaError("bridge.pulses", "must be at least 4");
    if (!(bridge.warmup_ps >= 0)) throw SchemaError("bridge.warmup_ps", "must be >= 0");
    if (!(bridge.step_ps > 0)) throw SchemaError("bridge.step_ps", "must be positive");
    if (bridge.output_stride < 1) throw SchemaError("bridge.output_stride", "must be at least 1");
    if (!(bridge.lock_visibility >= 0 && bridge.lock_visibility <= 1))
        throw SchemaError("bridge.lock_visibility", "must lie in [0, 1]");
    rethrow_as_schema("protocol", [&] { protocol.validate(); });
    rethrow_as_schema("receiver", [&] { receiver.validate(); });
    check_grid(injection_grid_uW, "sweeps.injection_grid_uW");
    if (injection_grid_uW.front() < 0) throw SchemaError("sweeps.injection_grid_uW", "powers must be >= 0");
    check_grid(attenuation_grid_dB, "sweeps.attenuation_grid_dB");
    if (attenuation_grid_dB.front() < 0) throw SchemaError("sweeps.attenuation_grid_dB", "attenuation must be >= 0");
    check_grid(wavelength_grid_nm, "sweeps.wavelength_grid_nm");
    if (wavelength_grid_nm.front() < 1500 || wavelength_grid_nm.back() > 1600)
        throw SchemaError("sweeps.wavelength_grid_nm", "wavelengths must lie in [1500, 1600] nm");
    if (!(operating_wavelength_nm >= 1500 && operating_wavelength_nm <= 1600))
        throw SchemaError("sweeps.operating_wavelength_nm", "must lie in [1500, 1600] nm");
    if (!(injection_sweep_attenuation_dB >= 0))
        throw SchemaError("sweeps.injection_sweep_attenuation_dB", "must be >= 0");
    if (!(wavelength_sweep_attenuation_dB >= 0))
        throw SchemaError("sweeps.wavelength_sweep_attenuation_dB", "must be >= 0");
    if (!(ec_efficiency >= 1)) throw SchemaError("keyrate.ec_efficiency", "must be >= 1");
    if (fidelity == Fidelity::monte_carlo && monte_carlo_symbols < 10000)
        throw SchemaError("monte_carlo_symbols", "must be at least 10000 for Monte Carlo fidelity");
}

// ---------------------------------------------------------------------------
// JSON schema

namespace {

class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <typename T>
    void get(const std::string& key, T& out) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        used_.insert(key);
        read(*it, key_path(key), out);
    }

    Section child(const std::string& key) {
        used_.insert(key);
        static const json empty = json::object();
        auto it = j_.find(key);
        return Section(it == j_.end() ? empty : *it, key_path(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw SchemaError(key_path(it.key()), "unknown key");
    }

private:
    static void read(const json& v, const std::string& where, double& out) {
        if (!v.is_number()) throw SchemaError(where, "expected a number");
        out = v.get<double>();
    }
    static void read(const json& v, const std::string& where, int& out) {
        if (!v.is_number_integer()) throw SchemaError(where, "expected an integer");
        out = v.get<int>();
    }
    static void read(const json& v, const std::string& where, std::uint64_t& out) {
        if (!v.is_number_unsigned()) throw SchemaError(where, "expected a nonnegative integer");
        out = v.get<std::uint64_t>();
    }
    static void read(const json& v, const std::string& where, bool& out) {
        if (!v.is_boolean()) throw SchemaError(where, "expected true or false");
        out = v.get<bool>();
    }
    static void read(const json& v, const std::string& where, std::vector<double>& out) {
        if (!v.is_array()) throw SchemaError(where, "expected an array of numbers");
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            double x = 0;
            read(v[i], where + "[" + std::to_string(i) + "]", x);
            out.push_back(x);
        }
    }
    static void read(const json& v, const std::string& where, std::vector<bool>& out) {
        if (!v.is_array()) throw SchemaError(where, "expected an array of booleans");
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            bool x = false;
            read(v[i], where + "[" + std::to_string(i) + "]", x);
            out.push_back(x);
        }
    }
    static void read(const json& v, const std::string& where, std::string& out) {
        if (!v.is_string()) throw SchemaError(where, "expected a string");
        out = v.get<std::string>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <typename T, typename Parse>
void get_enum(Section& s, const std::string& key, T& out, Parse parse) {
    std::string text;
    s.get(key, text);
    if (text.empty()) return;
    try {
        out = parse(text);
    } catch (const InvalidArgument& e) {
        throw SchemaError(s.key_path(key), e.what());
    }
}

Fidelity parse_fidelity(const std::string& s) {
    if (s == "analytic") return Fidelity::analytic;
    if (s == "monte_carlo" || s == "mc") return Fidelity::monte_carlo;
    throw InvalidArgument("expected analytic or monte_carlo");
}

OptimizationMetric parse_metric(const std::string& s) {
    if (s == "total_qber") return OptimizationMetric::total_qber;
    if (s == "skr") return OptimizationMetric::skr;
    throw InvalidArgument("expected total_qber or skr");
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("<root>", std::string("not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    Section top(root, "");

    Section l = top.child("laser");
    LaserParams& lp = c.laser;
    l.get("confinement", lp.confinement);
    l.get("group_velocity_m_per_s", lp.group_velocity_m_per_s);
    l.get("differential_gain_m2", lp.differential_gain_m2);
    l.get("active_volume_m3", lp.active_volume_m3);
    l.get("threshold_current_mA", lp.threshold_current_mA);
    l.get("carrier_lifetime_ns", lp.carrier_lifetime_ns);
    l.get("photon_lifetime_ps", lp.photon_lifetime_ps);
    l.get("linewidth_enhancement", lp.linewidth_enhancement);
    l.get("spont_emission_fraction", lp.spont_emission_fraction);
    l.get("gain_compression", lp.gain_compression);
    l.get("transparency_density_m3", lp.transparency_density_m3);
    l.get("mode_count", lp.mode_count);
    l.get("mode_spacing_nm", lp.mode_spacing_nm);
    l.get("center_wavelength_nm", lp.center_wavelength_nm);
    l.get("gain_envelope_width_nm", lp.gain_envelope_width_nm);
    l.get("temperature_tuning_nm_per_K", lp.temperature_tuning_nm_per_K);
    l.finish();

    Section inj = top.child("injection");
    inj.get("power_uW", c.injection.power_uW);
    inj.get("wavelength_nm", c.injection.wavelength_nm);
    inj.get("coupling_rate_per_ns", c.injection.coupling_rate_per_ns);
    inj.get("phase_rad", c.injection.phase_rad);
    inj.finish();

    Section d = top.child("drive");
    d.get("dc_bias_mA", c.drive.dc_bias_mA);
    d.get("rf_amplitude_mA", c.drive.rf_amplitude_mA);
    d.get("rf_fwhm_ps", c.drive.rf_fwhm_ps);
    d.get("clock_GHz", c.drive.clock_GHz);
    d.get("pulses", c.drive.pulses);
    d.get("sample_interval_ps", c.drive.sample_interval_ps);
    d.get("pattern", c.drive.pattern);
    d.finish();

    Section b = top.child("bridge");
    b.get("pulses", c.bridge.pulses);
    b.get("warmup_ps", c.bridge.warmup_ps);
    b.get("step_ps", c.bridge.step_ps);
    b.get("output_stride", c.bridge.output_stride);
    b.get("noise", c.bridge.noise);
    b.get("lock_visibility", c.bridge.lock_visibility);
    b.finish();

    Section p = top.child("protocol");
    p.get("symbol_rate_GHz", c.protocol.symbol_rate_GHz);
    p.get("z_basis_probability", c.protocol.z_basis_probability);
    p.get("signal_intensity", c.protocol.signal_intensity);
    p.get("decoy_intensity", c.protocol.decoy_intensity);
    p.get("vacuum_intensity", c.protocol.vacuum_intensity);
    std::vector<double> probs;
    p.get("intensity_probabilities", probs);
    if (!probs.empty()) {
        if (probs.size() != 3)
            throw SchemaError("protocol.intensity_probabilities", "expected [signal, decoy, vacuum]");
        std::copy(probs.begin(), probs.end(), c.protocol.intensity_probabilities.begin());
    }
    p.get("phase_randomization_levels", c.protocol.phase_randomization_levels);
    get_enum(p, "intensity_semantics", c.protocol.intensity_semantics,
             [](const std::string& s) { return parse_intensity_semantics(s); });
    p.finish();

    Section r = top.child("receiver");
    r.get("bs_z_fraction", c.receiver.bs_z_fraction);
    r.get("amzi_visibility", c.receiver.amzi_visibility);
    r.get("amzi_insertion_loss_dB", c.receiver.amzi_insertion_loss_dB);
    r.get("receiver_insertion_loss_dB", c.receiver.receiver_insertion_loss_dB);
    r.get("detector_efficiency", c.receiver.detector_efficiency);
    r.get("dark_count_rate_Hz", c.receiver.dark_count_rate_Hz);
    r.get("gate_window_ps", c.receiver.gate_window_ps);
    r.get("dead_time_ns", c.receiver.dead_time_ns);
    r.get("efficiency_envelope_width_nm", c.receiver.efficiency_envelope_width_nm);
    r.finish();

    Section sw = top.child("sweeps");
    sw.get("injection_grid_uW", c.injection_grid_uW);
    sw.get("attenuation_grid_dB", c.attenuation_grid_dB);
    sw.get("wavelength_grid_nm", c.wavelength_grid_nm);
    sw.get("operating_wavelength_nm", c.operating_wavelength_nm);
    sw.get("injection_sweep_attenuation_dB", c.injection_sweep_attenuation_dB);
    sw.get("wavelength_sweep_attenuation_dB", c.wavelength_sweep_attenuation_dB);
    get_enum(sw, "optimization_metric", c.optimization_metric, parse_metric);
    sw.finish();

    Section k = top.child("keyrate");
    k.get("ec_efficiency", c.ec_efficiency);
    k.finish();

    top.get("seed", c.seed);
    get_enum(top, "fidelity", c.fidelity, parse_fidelity);
    top.get("monte_carlo_symbols", c.monte_carlo_symbols);
    top.finish();

    c.validate();
    return c;
}

std::string config_to_json_text(const ExperimentConfig& c) {
    const LaserParams& lp = c.laser;
    json j;
    j["laser"] = {{"confinement", lp.confinement},
                  {"group_velocity_m_per_s", lp.group_velocity_m_per_s},
                  {"differential_gain_m2", lp.differential_gain_m2},
                  {"active_volume_m3", lp.active_volume_m3},
                  {"threshold_current_mA", lp.threshold_current_mA},
                  {"carrier_lifetime_ns", lp.carrier_lifetime_ns},
                  {"photon_lifetime_ps", lp.photon_lifetime_ps},
                  {"linewidth_enhancement", lp.linewidth_enhancement},
                  {"spont_emission_fraction", lp.spont_emission_fraction},
                  {"gain_compression", lp.gain_compression},
                  {"transparency_density_m3", lp.transparency_density_m3},
                  {"mode_count", lp.mode_count},
                  {"mode_spacing_nm", lp.mode_spacing_nm},
                  {"center_wavelength_nm", lp.center_wavelength_nm},
                  {"gain_envelope_width_nm", lp.gain_envelope_width_nm},
                  {"temperature_tuning_nm_per_K", lp.temperature_tuning_nm_per_K}};
    j["injection"] = {{"power_uW", c.injection.power_uW},
                      {"wavelength_nm", c.injection.wavelength_nm},
                      {"coupling_rate_per_ns", c.injection.coupling_rate_per_ns},
                      {"phase_rad", c.injection.phase_rad}};
    j["drive"] = {{"dc_bias_mA", c.drive.dc_bias_mA},   {"rf_amplitude_mA", c.drive.rf_amplitude_mA},
                  {"rf_fwhm_ps", c.drive.rf_fwhm_ps},   {"clock_GHz", c.drive.clock_GHz},
                  {"pulses", c.drive.pulses},           {"sample_interval_ps", c.drive.sample_interval_ps},
                  {"pattern", c.drive.pattern}};
    j["bridge"] = {{"pulses", c.bridge.pulses},           {"warmup_ps", c.bridge.warmup_ps},
                   {"step_ps", c.bridge.step_ps},         {"output_stride", c.bridge.output_stride},
                   {"noise", c.bridge.noise},             {"lock_visibility", c.bridge.lock_visibility}};
    j["protocol"] = {{"symbol_rate_GHz", c.protocol.symbol_rate_GHz},
                     {"z_basis_probability", c.protocol.z_basis_probability},
                     {"signal_intensity", c.protocol.signal_intensity},
                     {"decoy_intensity", c.protocol.decoy_intensity},
                     {"vacuum_intensity", c.protocol.vacuum_intensity},
                     {"intensity_probabilities", c.protocol.intensity_probabilities},
                     {"phase_randomization_levels", c.protocol.phase_randomization_levels},
                     {"intensity_semantics", std::string(to_string(c.protocol.intensity_semantics))}};
    j["receiver"] = {{"bs_z_fraction", c.receiver.bs_z_fraction},
                     {"amzi_visibility", c.receiver.amzi_visibility},
                     {"amzi_insertion_loss_dB", c.receiver.amzi_insertion_loss_dB},
                     {"receiver_insertion_loss_dB", c.receiver.receiver_insertion_loss_dB},
                     {"detector_efficiency", c.receiver.detector_efficiency},
                     {"dark_count_rate_Hz", c.receiver.dark_count_rate_Hz},
                     {"gate_window_ps", c.receiver.gate_window_ps},
                     {"dead_time_ns", c.receiver.dead_time_ns},
                     {"efficiency_envelope_width_nm", c.receiver.efficiency_envelope_width_nm}};
    j["sweeps"] = {{"injection_grid_uW", c.injection_grid_uW},
                   {"attenuation_grid_dB", c.attenuation_grid_dB},
                   {"wavelength_grid_nm", c.wavelength_grid_nm},
                   {"operating_wavelength_nm", c.operating_wavelength_nm},
                   {"injection_sweep_attenuation_dB", c.injection_sweep_attenuation_dB},
                   {"wavelength_sweep_attenuation_dB", c.wavelength_sweep_attenuation_dB},
                   {"optimization_metric", std::string(to_string(c.optimization_metric))}};
    j["keyrate"] = {{"ec_efficiency", c.ec_efficiency}};
    j["seed"] = c.seed;
    j["fidelity"] = std::string(to_string(c.fidelity));
    j["monte_carlo_symbols"] = c.monte_carlo_symbols;
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json_text(ss.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << config_to_json_text(config);
}

// ---------------------------------------------------------------------------
// Bridge and optimization

OperatingPoint characterize_operating_point(const ExperimentConfig& config, double wavelength_nm,
                                            double injection_uW) {
    InjectionParams inj = config.injection;
    inj.wavelength_nm = wavelength_nm;
    inj.power_uW = injection_uW;

    GainSwitchSpec gs = config.drive;
    const int warmup_pulses = static_cast<int>(std::ceil(config.bridge.warmup_ps * gs.clock_GHz / 1000.0));
    gs.pulses = config.bridge.pulses + warmup_pulses;

    SimulationOptions opt;
    opt.step_ps = config.bridge.step_ps;
    opt.output_stride = config.bridge.output_stride;
    opt.record_from_ps = warmup_pulses * 1000.0 / gs.clock_GHz;
    opt.noise = config.bridge.noise;

    const FieldTrace trace =
        simulate(config.laser, gain_switch_drive(gs), inj, point_seed(config.seed, laser_stream), opt);
    const DbRatio er = extinction_ratio(pulse_histogram(trace, gs.clock_GHz));

    OperatingPoint op;
    op.wavelength_nm = wavelength_nm;
    op.injection_uW = injection_uW;
    op.er_db = er.db;
    op.er_censored = er.censored;
    op.visibility = std::clamp(pulse_visibility(trace, gs.clock_GHz), 0.0, 1.0);
    op.locked = injection_uW > 0 && op.visibility >= config.bridge.lock_visibility;
    return op;
}

double sifted_weighted_qber(const ProtocolConfig& protocol, const ReceiverParams& receiver, double e_z, double e_x) {
    const double wz = protocol.z_basis_probability * receiver.bs_z_fraction;
    const double wx = (1.0 - protocol.z_basis_probability) * (1.0 - receiver.bs_z_fraction);
    return (wz * e_z + wx * e_x) / (wz + wx);
}

InjectionOptimum optimize_injection_scan(const ExperimentConfig& config, double wavelength_nm) {
    const auto& grid = config.injection_grid_uW;
    if (grid.empty()) throw InvalidArgument("injection grid is empty");
    if (grid.size() > 1) {
        double lo = std::numeric_limits<double>::infinity();
        for (double p : grid)
            if (p > 0) lo = std::min(lo, p);
        if (!(grid.back() >= 10.0 * lo)) throw InvalidArgument("injection grid must span at least one decade");
    }
    const ReceiverParams rx = wavelength_adjusted_receiver(config.receiver, wavelength_nm);
    ExperimentConfig analytic = config;
    analytic.fidelity = Fidelity::analytic;

    InjectionOptimum out;
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const OperatingPoint op = characterize_operating_point(config, wavelength_nm, grid[i]);
        out.scanned.push_back(op);
        if (!op.locked) continue;
        const SweepRow row = evaluate_link(analytic, rx, op, config.injection_sweep_attenuation_dB, 0);
        const double cost =
            config.optimization_metric == OptimizationMetric::total_qber ? row.total_qber : -row.skr_bits_per_s;
        if (cost < best) {  // strict: ties keep the lower power
            best = cost;
            out.injection_uW = grid[i];
            any = true;
        }
    }
    if (!any) throw NoLockError("no injection power in the grid locks the laser at " + format_double(wavelength_nm) + " nm");
    return out;
}

double optimize_injection(const ExperimentConfig& config, double wavelength_nm) {
    return optimize_injection_scan(config, wavelength_nm).injection_uW;
}

// ---------------------------------------------------------------------------
// Link evaluation and sweeps

SweepRow evaluate_link(const ExperimentConfig& config, const ReceiverParams& receiver, const OperatingPoint& op,
                       double attenuation_dB, std::uint64_t seed) {
    const ChannelParams channel{attenuation_dB};
    const LinkExtras extras = op.extras();
    RateTable rates{};
    bool saturated = false;
    if (config.fidelity == Fidelity::analytic) {
        const AnalyticDetection d = detect_analytic(config.protocol, channel, receiver, extras);
        rates = d.rates;
        saturated = d.saturated;
    } else {
        CounterRng symbol_rng = CounterRng(seed).split(0);
        const auto symbols = generate_symbols(symbol_rng, config.protocol, config.monte_carlo_symbols);
        const auto records = detect_monte_carlo(symbols, config.protocol, channel, receiver,
                                                CounterRng(seed).split(1).at(0), extras);
        rates = sift(symbols, records).rates();
        std::array<std::uint64_t, 3> clicks{};
        for (const DetectionRecord& r : records) ++clicks[static_cast<std::size_t>(r.detector)];
        const double duration_s = static_cast<double>(symbols.size()) / (config.protocol.symbol_rate_GHz * 1e9);
        for (auto n : clicks)
            if (static_cast<double>(n) / duration_s > saturation_count_rate_Hz) saturated = true;
    }
    const SkrResult skr = estimate_key_rate(rates, config.protocol, config.ec_efficiency);
    const GainQber zs = rates[static_cast<std::size_t>(IntensityClass::signal)][static_cast<std::size_t>(Basis::Z)];
    const GainQber xs = rates[static_cast<std::size_t>(IntensityClass::signal)][static_cast<std::size_t>(Basis::X)];

    SweepRow row;
    row.er_db = op.er_db;
    row.visibility = op.visibility;
    row.e_z = zs.qber;
    row.e_x = xs.qber;
    row.total_qber = sifted_weighted_qber(config.protocol, receiver, zs.qber, xs.qber);
    row.Q_mu = zs.gain;
    row.skr_bits_per_s = skr.skr;
    row.injection_uW = op.injection_uW;
    row.locked = op.locked;
    row.saturated = saturated;
    return row;
}

SweepTable run_injection_sweep(const ExperimentConfig& config) {
    config.validate();
    const ReceiverParams rx = wavelength_adjusted_receiver(config.receiver, config.operating_wavelength_nm);
    SweepTable t{"injection_uW", {}};
    for (std::size_t i = 0; i < config.injection_grid_uW.size(); ++i) {
        const double p = config.injection_grid_uW[i];
        const OperatingPoint op = characterize_operating_point(config, config.operating_wavelength_nm, p);
        SweepRow row = evaluate_link(config, rx, op, config.injection_sweep_attenuation_dB, point_seed(config.seed, i));
        row.x = p;
        t.rows.push_back(row);
    }
    return t;
}

SweepTable run_attenuation_sweep(const ExperimentConfig& config) {
    config.validate();
    // one laser operating point, at the configured injection power
    const OperatingPoint op =
        characterize_operating_point(config, config.operating_wavelength_nm, config.injection.power_uW);
    const ReceiverParams rx = wavelength_adjusted_receiver(config.receiver, config.operating_wavelength_nm);
    SweepTable t{"attenuation_dB", {}};
    for (std::size_t i = 0; i < config.attenuation_grid_dB.size(); ++i) {
        const double a = config.attenuation_grid_dB[i];
        SweepRow row = evaluate_link(config, rx, op, a, point_seed(config.seed, i));
        row.x = a;
        t.rows.push_back(row);
    }
    return t;
}

SweepTable run_wavelength_sweep(const ExperimentConfig& config) {
    config.validate();
    SweepTable t{"wavelength_nm", {}};
    for (std::size_t i = 0; i < config.wavelength_grid_nm.size(); ++i) {
        const double wl = config.wavelength_grid_nm[i];
        SweepRow row;
        try {
            const InjectionOptimum opt = optimize_injection_scan(config, wl);
            const auto it = std::find_if(opt.scanned.begin(), opt.scanned.end(),
                                         [&](const OperatingPoint& op) { return op.injection_uW == opt.injection_uW; });
            const ReceiverParams rx = wavelength_adjusted_receiver(config.receiver, wl);
            row = evaluate_link(config, rx, *it, config.wavelength_sweep_attenuation_dB, point_seed(config.seed, i));
        } catch (const NoLockError&) {
            row.e_z = row.e_x = row.total_qber = 0.5;
            row.locked = false;
        }
        row.x = wl;
        t.rows.push_back(row);
    }
    return t;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr const char* csv_columns =
    "er_db,visibility,e_z,e_x,total_qber,Q_mu,skr_bits_per_s,injection_uW,locked,saturated";

}  // namespace

std::string sweep_to_csv(const SweepTable& table) {
    std::string out = table.variable + "," + csv_columns + "\n";
    for (const SweepRow& r : table.rows) {
        for (double v : {r.x, r.er_db, r.visibility, r.e_z, r.e_x, r.total_qber, r.Q_mu, r.skr_bits_per_s,
                         r.injection_uW}) {
            out += format_double(v);
            out += ',';
        }
        out += r.locked ? "1," : "0,";
        out += r.saturated ? "1\n" : "0\n";
    }
    return out;
}

SweepTable sweep_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw MalformedRecord("empty sweep CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(comma + 1) != csv_columns)
        throw MalformedRecord("unexpected sweep CSV header: " + line);
    SweepTable t{line.substr(0, comma), {}};
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 11) throw MalformedRecord("line " + std::to_string(lineno) + ": expected 11 fields");
        SweepRow r;
        double* targets[] = {&r.x, &r.er_db, &r.visibility, &r.e_z, &r.e_x, &r.total_qber, &r.Q_mu,
                             &r.skr_bits_per_s, &r.injection_uW};
        for (std::size_t i = 0; i < 9; ++i)
            if (!parse_double(f[i], *targets[i]))
                throw MalformedRecord("line " + std::to_string(lineno) + ": bad number '" + f[i] + "'");
        auto flag = [&](const std::string& s) {
            if (s != "0" && s != "1") throw MalformedRecord("line " + std::to_string(lineno) + ": bad flag '" + s + "'");
            return s == "1";
        };
        r.locked = flag(f[9]);
        r.saturated = flag(f[10]);
        t.rows.push_back(r);
    }
    return t;
}

void emit_csv(const SweepTable& table, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << sweep_to_csv(table);
}

SweepTable load_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return sweep_from_csv(ss.str());
}

}  // namespace wtqkd
