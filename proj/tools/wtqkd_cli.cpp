// Command line front end: laser traces, the three sweeps and one-shot key
// rates from a tally file.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "wtqkd/errors.hpp"
#include "wtqkd/format.hpp"
#include "wtqkd/harness.hpp"

using namespace wtqkd;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string fidelity;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool fidelity) {
    cmd->add_option("--config", c.config_path, "JSON config; defaults are used when omitted")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Experiment seed (overrides the config)");
    if (fidelity)
        cmd->add_option("--fidelity", c.fidelity, "Link model")->check(CLI::IsMember({"analytic", "mc"}));
    cmd->add_option("--out", c.out, "Output file; stdout when omitted");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig config = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
    if (c.seed) config.seed = *c.seed;
    if (c.fidelity == "mc") config.fidelity = Fidelity::monte_carlo;
    if (c.fidelity == "analytic") config.fidelity = Fidelity::analytic;
    config.validate();
    return config;
}

void write_text(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(out, std::ios::binary);
    if (!os) throw Error("cannot open " + out + " for writing");
    os << text;
}

void simulate_laser(const Common& c, std::optional<double> injection_uW, std::optional<double> wavelength_nm,
                    int pulses) {
    const ExperimentConfig config = resolve(c);
    InjectionParams inj = config.injection;
    if (injection_uW) inj.power_uW = *injection_uW;
    if (wavelength_nm) inj.wavelength_nm = *wavelength_nm;

    GainSwitchSpec gs = config.drive;
    const int warmup = static_cast<int>(std::ceil(config.bridge.warmup_ps * gs.clock_GHz / 1000.0));
    gs.pulses = pulses + warmup;
    SimulationOptions opt;
    opt.step_ps = config.bridge.step_ps;
    opt.output_stride = config.bridge.output_stride;
    opt.record_from_ps = warmup * 1000.0 / gs.clock_GHz;
    opt.noise = config.bridge.noise;
    const FieldTrace trace = simulate(config.laser, gain_switch_drive(gs), inj, config.seed, opt);

    if (!c.out.empty()) write_trace_csv(trace, c.out);

    // summary on stdout, one key=value per line
    const DbRatio er = extinction_ratio(pulse_histogram(trace, gs.clock_GHz));
    const DbRatio msr = mode_suppression_ratio(trace);
    const PulseShape shape = average_pulse(trace, gs.clock_GHz);
    std::cout << "injection_uW=" << format_double(inj.power_uW) << '\n'
              << "wavelength_nm=" << format_double(inj.wavelength_nm) << '\n'
              << "er_db=" << format_double(er.db) << (er.censored ? " (lower bound)" : "") << '\n'
              << "visibility=" << format_double(pulse_visibility(trace, gs.clock_GHz)) << '\n'
              << "smsr_db=" << format_double(msr.db) << (msr.censored ? " (lower bound)" : "") << '\n';
    try {
        std::cout << "pulse_fwhm_ps="
                  << format_double(fit_gaussian_fwhm({shape.photons.data(), static_cast<std::size_t>(shape.photons.size())},
                                                     {shape.time_ps.data(), static_cast<std::size_t>(shape.time_ps.size())}))
                  << '\n';
    } catch (const FitFailure& e) {
        std::cout << "pulse_fwhm_ps=nan\n";
    }
    try {
        std::cout << "spectral_fwhm_GHz=" << format_double(spectral_fwhm_GHz(optical_spectrum(trace, 1.0))) << '\n';
    } catch (const Error&) {
        std::cout << "spectral_fwhm_GHz=nan\n";
    }
}

void sweep(const Common& c, SweepTable (*run)(const ExperimentConfig&)) {
    write_text(sweep_to_csv(run(resolve(c))), c.out);
}

void skr_from_tally(const Common& c, const std::string& tally_path, std::optional<double> ec) {
    const ExperimentConfig config = resolve(c);
    const DetectionTally tally = read_tally_csv(tally_path);
    const SkrResult r = estimate_key_rate(tally.rates(), config.protocol, ec.value_or(config.ec_efficiency));
    std::ostringstream os;
    write_skr_result(r, os);
    write_text(os.str(), c.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wavelength-tunable decoy-state QKD link simulator"};
    app.require_subcommand(1);

    Common c;

    std::optional<double> injection_uW, wavelength_nm;
    int pulses = 40;
    auto* sim = app.add_subcommand("simulate-laser", "Simulate the gain-switched laser and print its pulse metrics");
    add_common(sim, c, false);
    sim->add_option("--injection-uW", injection_uW, "Injected power");
    sim->add_option("--wavelength-nm", wavelength_nm, "Injection wavelength");
    sim->add_option("--pulses", pulses, "Recorded clock periods after warm-up")->check(CLI::PositiveNumber);

    auto* inj = app.add_subcommand("sweep-injection", "Sweep the injected power at the operating wavelength");
    add_common(inj, c, true);
    auto* att = app.add_subcommand("sweep-attenuation", "Sweep channel attenuation at the configured injection");
    add_common(att, c, true);
    auto* wl = app.add_subcommand("sweep-wavelength", "Sweep the injection wavelength, optimizing injection per point");
    add_common(wl, c, true);

    std::string tally_path;
    std::optional<double> ec;
    auto* skr = app.add_subcommand("skr", "Key rate from a detection tally CSV");
    add_common(skr, c, false);
    skr->add_option("tally", tally_path, "CSV with class,basis,sent,detected,errors")->required()->check(CLI::ExistingFile);
    skr->add_option("--ec-efficiency", ec, "Error-correction inefficiency f");

    std::string default_out;
    auto* defaults = app.add_subcommand("write-config", "Write the default configuration as JSON");
    defaults->add_option("--out", default_out, "Output file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) simulate_laser(c, injection_uW, wavelength_nm, pulses);
        else if (*inj) sweep(c, run_injection_sweep);
        else if (*att) sweep(c, run_attenuation_sweep);
        else if (*wl) sweep(c, run_wavelength_sweep);
        else if (*skr) skr_from_tally(c, tally_path, ec);
        else if (*defaults) save_config(ExperimentConfig{}, default_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
