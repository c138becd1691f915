// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "poisson_oracle.hpp"
#include "wtqkd/errors.hpp"
#include "wtqkd/harness.hpp"

using namespace wtqkd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Report {
    int failures = 0;

    void line(int n, const std::string& name, bool ok, const std::string& details) {
        if (!ok) ++failures;
        std::cout << "criterion " << n << " (" << name << "): " << (ok ? "PASS" : "FAIL") << "  " << details
                  << std::endl;
    }
};

std::string num(double x, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << x;
    return os.str();
}

const SweepRow& row_at(const SweepTable& t, double x) {
    for (const SweepRow& r : t.rows)
        if (std::abs(r.x - x) < 1e-9) return r;
    throw std::runtime_error("no row at " + num(x));
}

// 1 -------------------------------------------------------------------------
void skr_vs_attenuation(Report& rep, const ExperimentConfig& base) {
    ExperimentConfig config = base;
    config.fidelity = Fidelity::analytic;
    const auto t0 = Clock::now();
    const SweepTable t = run_attenuation_sweep(config);
    const double runtime = seconds_since(t0);
    const double at115 = row_at(t, 11.5).skr_bits_per_s;
    const double at0 = row_at(t, 0.0).skr_bits_per_s;
    const double at60 = row_at(t, 60.0).skr_bits_per_s;
    const bool ok = at115 >= 935e3 / 2 && at115 <= 935e3 * 2 && at0 >= 17.7e6 / 2 && at0 <= 17.7e6 * 2 &&
                    at60 > 0 && t.rows.size() == 20 && runtime < 5.0;
    rep.line(1, "SKR vs attenuation", ok,
             "SKR(11.5 dB)=" + num(at115) + " b/s [467.5k, 1.87M], SKR(0 dB)=" + num(at0) +
                 " b/s [8.85M, 35.4M], SKR(60 dB)=" + num(at60) + " b/s > 0, " + std::to_string(t.rows.size()) +
                 " points in " + num(runtime, 3) + " s < 5 s");
}

// 2 -------------------------------------------------------------------------
void wavelength_flatness(Report& rep, const ExperimentConfig& base) {
    const auto t0 = Clock::now();
    const SweepTable t = run_wavelength_sweep(base);
    const double runtime = seconds_since(t0);
    double max_all = 0.0, arg_max = 0.0;
    double max_band = 0.0, min_band = INFINITY, min_c = INFINITY;
    for (const SweepRow& r : t.rows) {
        if (r.skr_bits_per_s > max_all) {
            max_all = r.skr_bits_per_s;
            arg_max = r.x;
        }
        if (r.x >= 1519.5 && r.x <= 1585.5) {
            max_band = std::max(max_band, r.skr_bits_per_s);
            min_band = std::min(min_band, r.skr_bits_per_s);
        }
        if (r.x >= 1529.5 && r.x <= 1565.5) min_c = std::min(min_c, r.skr_bits_per_s);
    }
    const double ratio = min_band > 0 ? max_band / min_band : INFINITY;
    const bool ok = ratio <= 1.5 && min_c >= 0.85 * max_all && std::abs(arg_max - 1550.12) < 0.01 && runtime < 300.0;
    rep.line(2, "wavelength flatness", ok,
             "1520-1585 nm max/min=" + num(ratio) + " <= 1.5, C-band min/max=" + num(min_c / max_all) +
                 " >= 0.85, peak at " + num(arg_max, 7) + " nm (want 1550.12), " + num(runtime, 4) + " s < 300 s");
}

// 3 -------------------------------------------------------------------------
FieldTrace bridge_trace(const ExperimentConfig& config, double injection_uW) {
    InjectionParams inj = config.injection;
    inj.power_uW = injection_uW;
    inj.wavelength_nm = config.operating_wavelength_nm;
    GainSwitchSpec gs = config.drive;
    const int warmup = static_cast<int>(std::ceil(config.bridge.warmup_ps * gs.clock_GHz / 1000.0));
    gs.pulses = config.bridge.pulses + warmup;
    SimulationOptions opt;
    opt.step_ps = config.bridge.step_ps;
    opt.output_stride = config.bridge.output_stride;
    opt.record_from_ps = warmup * 1000.0 / gs.clock_GHz;
    opt.noise = config.bridge.noise;
    return simulate(config.laser, gain_switch_drive(gs), inj, config.seed, opt);
}

void laser_calibration(Report& rep, const ExperimentConfig& config) {
    const double clock = config.drive.clock_GHz;
    const FieldTrace locked = bridge_trace(config, 80.0);
    const PulseShape shape = average_pulse(locked, clock);
    double fwhm = NAN;
    try {
        fwhm = fit_gaussian_fwhm({shape.photons.data(), static_cast<std::size_t>(shape.photons.size())},
                                 {shape.time_ps.data(), static_cast<std::size_t>(shape.time_ps.size())});
    } catch (const FitFailure&) {
    }
    const DbRatio smsr = mode_suppression_ratio(locked);
    const double width = spectral_fwhm_GHz(optical_spectrum(locked, 1.0));

    const FieldTrace free_running = bridge_trace(config, 0.0);
    const DbRatio er0 = extinction_ratio(pulse_histogram(free_running, clock));
    const double v0 = pulse_visibility(free_running, clock);

    const bool ok = std::abs(fwhm - 70.0) <= 15.0 && smsr.db >= 30.0 && std::abs(width - 35.0) <= 15.0 &&
                    std::abs(er0.db - 30.0) <= 3.0 && v0 < 0.1;
    rep.line(3, "laser calibration", ok,
             "80 uW: pulse FWHM=" + num(fwhm) + " ps (70+-15), SMSR=" + num(smsr.db) + " dB (>=30), spectral FWHM=" +
                 num(width) + " GHz (35+-15); 0 uW: ER=" + num(er0.db) + " dB" + (er0.censored ? " (censored)" : "") +
                 " (30+-3), V=" + num(v0) + " (<0.1)");
}

// 4 -------------------------------------------------------------------------
void er_visibility_tradeoff(Report& rep, const ExperimentConfig& config) {
    const SweepTable t = run_injection_sweep(config);
    bool er_ok = true, v_ok = true;
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        er_ok = er_ok && t.rows[i].er_db <= t.rows[i - 1].er_db;
        v_ok = v_ok && t.rows[i].visibility >= t.rows[i - 1].visibility;
    }
    const auto best = std::min_element(t.rows.begin(), t.rows.end(),
                                       [](const SweepRow& a, const SweepRow& b) { return a.total_qber < b.total_qber; });
    const bool ok = er_ok && v_ok && best->x >= 80.0 && best->x <= 160.0;
    std::string er_list, v_list;
    for (const SweepRow& r : t.rows) {
        er_list += num(r.er_db) + " ";
        v_list += num(r.visibility, 3) + " ";
    }
    rep.line(4, "ER/visibility trade-off", ok,
             std::string("ER non-increasing=") + (er_ok ? "yes" : "no") + " [" + er_list + "], V non-decreasing=" +
                 (v_ok ? "yes" : "no") + " [" + v_list + "], QBER minimum at " + num(best->x) + " uW (in [80, 160])");
}

// 5 -------------------------------------------------------------------------
void decoy_soundness(Report& rep) {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(20240615);
    std::uniform_real_distribution<double> log_eta(std::log(1e-3), std::log(0.1));
    std::uniform_real_distribution<double> y0_dist(0.0, 1e-4);
    std::uniform_real_distribution<double> e_dist(0.0, 0.05);
    const double mu = 0.4, nu = 0.1;
    int sound = 0, tight = 0, aborted = 0;
    double worst_gap = 0.0;
    const int cases = 200;
    for (int i = 0; i < cases; ++i) {
        const test::SyntheticChannel ch{std::exp(log_eta(gen)), y0_dist(gen), e_dist(gen)};
        const auto [qs, es] = test::poisson_gain_qber(mu, ch);
        const auto [qd, ed] = test::poisson_gain_qber(nu, ch);
        try {
            const DecoyBounds b = decoy_bounds({qs, es}, {qd, ed}, ch.yield(0), mu, nu);
            const double y1 = ch.yield(1), e1 = ch.error(1);
            if (b.y1_lower <= y1 * (1 + 1e-12) && b.e1_upper >= e1 * (1 - 1e-12)) ++sound;
            const double gap = (y1 - b.y1_lower) / y1;
            worst_gap = std::max(worst_gap, gap);
            if (gap <= 0.10) ++tight;
        } catch (const EstimationAborted&) {
            ++aborted;
        }
    }
    const double runtime = seconds_since(t0);
    const bool ok = sound == cases && tight == cases && runtime < 10.0;
    rep.line(5, "decoy-bound soundness", ok,
             std::to_string(sound) + "/" + std::to_string(cases) + " sound, " + std::to_string(tight) + "/" +
                 std::to_string(cases) + " with Y1_lower within 10% (worst " + num(100 * worst_gap, 3) + "%), " +
                 std::to_string(aborted) + " aborted, " + num(runtime, 3) + " s < 10 s");
}

// 6 -------------------------------------------------------------------------
void monte_carlo_equivalence(Report& rep, const ExperimentConfig& config) {
    const OperatingPoint op =
        characterize_operating_point(config, config.operating_wavelength_nm, config.injection.power_uW);
    const ReceiverParams rx = wavelength_adjusted_receiver(config.receiver, config.operating_wavelength_nm);
    const ChannelParams channel{11.5};
    const AnalyticDetection expected = detect_analytic(config.protocol, channel, rx, op.extras());

    const auto t0 = Clock::now();
    CounterRng symbol_rng = CounterRng(config.seed).split(0);
    const auto symbols = generate_symbols(symbol_rng, config.protocol, 1000000);
    const auto records = detect_monte_carlo(symbols, config.protocol, channel, rx, config.seed, op.extras());
    const DetectionTally tally = sift(symbols, records);
    const double runtime = seconds_since(t0);

    double worst = 0.0;
    std::string worst_cell;
    for (IntensityClass c : all_intensity_classes) {
        for (Basis b : all_bases) {
            const TallyCell& cell = tally.at(c, b);
            const GainQber& e = expected.at(c, b);
            const double n = static_cast<double>(cell.sent);
            const double gain = static_cast<double>(cell.detected) / n;
            const double sg = std::sqrt(e.gain * (1 - e.gain) / n);
            auto score = [&](double diff, double sigma, const std::string& what) {
                const double z = sigma > 0 ? std::abs(diff) / sigma : (diff == 0 ? 0.0 : INFINITY);
                if (z > worst) {
                    worst = z;
                    worst_cell = what;
                }
            };
            const std::string where = std::string(to_string(c)) + "/" + std::string(to_string(b));
            score(gain - e.gain, sg, where + " gain");
            if (cell.detected > 0) {
                const double q = static_cast<double>(cell.errors) / static_cast<double>(cell.detected);
                score(q - e.qber, std::sqrt(e.qber * (1 - e.qber) / static_cast<double>(cell.detected)), where + " QBER");
            }
        }
    }
    const bool ok = worst <= 3.0 && runtime < 60.0;
    rep.line(6, "Monte Carlo/analytic equivalence", ok,
             "1e6 symbols at 11.5 dB, largest deviation " + num(worst, 3) + " sigma (" + worst_cell + "), " +
                 num(runtime, 3) + " s < 60 s");
}

// 7 -------------------------------------------------------------------------
void unit_properties(Report& rep) {
    std::vector<std::string> failed;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) failed.push_back(what);
    };
    expect(binary_entropy(0.0) == 0.0 && binary_entropy(1.0) == 0.0 && binary_entropy(0.5) == 1.0, "binary entropy");

    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> phase(-10.0, 10.0), unit(0.0, 1.0);
    bool sums = true;
    for (int i = 0; i < 10000; ++i) {
        const AmziProbs p = amzi_output_probs(phase(gen), unit(gen));
        sums = sums && std::abs(p.d2 + p.d3 - 1.0) <= 1e-12;
    }
    expect(sums, "AMZI normalization");

    std::vector<double> t, y;
    for (int i = 0; i < 501; ++i) {
        t.push_back(-250.0 + i);
        const double s = 69.8 / (2 * std::sqrt(2 * std::log(2.0)));
        y.push_back(std::exp(-t.back() * t.back() / (2 * s * s)));
    }
    expect(std::abs(fit_gaussian_fwhm(y, t) / 69.8 - 1) <= 1e-3, "Gaussian FWHM round trip");

    expect(channel_transmittance(0) == 1.0 && channel_transmittance(10) == 0.1 && channel_transmittance(20) == 0.01 &&
               channel_transmittance(30) == 0.001,
           "channel decades");

    const LaserParams lp;
    const double at_threshold = modulation_bandwidth_squared(lp, lp.threshold_current_mA);
    const double one = modulation_bandwidth_squared(lp, lp.threshold_current_mA + 1.0);
    const double three = modulation_bandwidth_squared(lp, lp.threshold_current_mA + 3.0);
    expect(at_threshold == 0.0 && std::abs(three / one - 3.0) <= 1e-12, "modulation bandwidth");

    std::string details = failed.empty() ? "entropy, AMZI sums over 1e4 inputs, Gaussian round trip, channel decades, "
                                           "modulation bandwidth zero and linearity"
                                         : "failed:";
    for (const auto& f : failed) details += " " + f;
    rep.line(7, "unit properties", failed.empty(), details);
}

// 8 -------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

void determinism(Report& rep, const std::string& cli, const ExperimentConfig& base) {
    const fs::path dir = fs::temp_directory_path() / ("wtqkd_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    // reduced grids keep the CLI runs short
    ExperimentConfig small = base;
    small.bridge.pulses = 40;
    small.injection_grid_uW = {0, 20, 80, 320};
    small.attenuation_grid_dB = {0, 11.5, 30};
    small.wavelength_grid_nm = {nearest_itu_channel_nm(1530.0), itu_channel_wavelength_nm(0)};
    small.monte_carlo_symbols = 100000;
    const fs::path config_path = dir / "small.json";
    save_config(small, config_path.string());

    struct Run {
        std::string args;
        std::string file;
    };
    const std::vector<Run> runs{
        {"sweep-injection", "inj"},
        {"sweep-attenuation", "att"},
        {"sweep-attenuation --fidelity mc", "att_mc"},
        {"sweep-wavelength", "wl"},
        {"sweep-injection --fidelity mc --seed 7", "inj_mc"},
    };
    std::vector<std::string> mismatched;
    int executed = 0;
    for (const Run& r : runs) {
        std::string outputs[2];
        bool ran = true;
        for (int k = 0; k < 2 && ran; ++k) {
            const fs::path out = dir / (r.file + "_" + std::to_string(k) + ".csv");
            const std::string cmd =
                "\"" + cli + "\" " + r.args + " --config \"" + config_path.string() + "\" --out \"" + out.string() + "\"";
            if (std::system(cmd.c_str()) != 0) {
                mismatched.push_back(r.args + " (exit status)");
                ran = false;
                break;
            }
            ++executed;
            outputs[k] = slurp(out);
        }
        if (ran && (outputs[0].empty() || outputs[0] != outputs[1])) mismatched.push_back(r.args);
    }
    fs::remove_all(dir);
    std::string details = std::to_string(runs.size()) + " sweeps run twice each (" + std::to_string(executed) +
                          " runs), identical outputs";
    if (!mismatched.empty()) {
        details = "differing or failed:";
        for (const auto& m : mismatched) details += " [" + m + "]";
    }
    rep.line(8, "determinism", mismatched.empty(), details);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance run"};
    std::string cli, preset;
    std::vector<int> only;
    app.add_option("--cli", cli, "Path of the command line tool")->required();
    app.add_option("--preset", preset, "Shipped default config")->required()->check(CLI::ExistingFile);
    app.add_option("--only", only, "Run these criteria only");
    CLI11_PARSE(app, argc, argv);

    const ExperimentConfig config = load_config(preset);
    Report rep;
    const std::vector<std::function<void()>> criteria{
        [&] { skr_vs_attenuation(rep, config); },
        [&] { wavelength_flatness(rep, config); },
        [&] { laser_calibration(rep, config); },
        [&] { er_visibility_tradeoff(rep, config); },
        [&] { decoy_soundness(rep); },
        [&] { monte_carlo_equivalence(rep, config); },
        [&] { unit_properties(rep); },
        [&] { determinism(rep, cli, config); },
    };
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
        try {
            criteria[i]();
        } catch (const std::exception& e) {
            rep.line(n, "error", false, e.what());
        }
    }
    std::cout << (rep.failures == 0 ? "all criteria passed" : std::to_string(rep.failures) + " criteria failed")
              << std::endl;
    return rep.failures == 0 ? 0 : 1;
}
