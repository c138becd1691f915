#include "wtqkd/protocol.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "wtqkd/errors.hpp"

namespace wtqkd {

std::string_view to_string(Basis b) { return b == Basis::Z ? "Z" : "X"; }

std::string_view to_string(IntensityClass c) {
    switch (c) {
        case IntensityClass::signal: return "signal";
        case IntensityClass::decoy: return "decoy";
        case IntensityClass::vacuum: return "vacuum";
    }
    return "?";
}

std::string_view to_string(IntensitySemantics s) {
    return s == IntensitySemantics::per_symbol ? "per_symbol" : "per_pulse";
}

Basis parse_basis(std::string_view s) {
    if (s == "Z") return Basis::Z;
    if (s == "X") return Basis::X;
    throw InvalidArgument("unknown basis '" + std::string(s) + "'");
}

IntensityClass parse_intensity_class(std::string_view s) {
    if (s == "signal") return IntensityClass::signal;
    if (s == "decoy") return IntensityClass::decoy;
    if (s == "vacuum") return IntensityClass::vacuum;
    throw InvalidArgument("unknown intensity class '" + std::string(s) + "'");
}

IntensitySemantics parse_intensity_semantics(std::string_view s) {
    if (s == "per_symbol") return IntensitySemantics::per_symbol;
    if (s == "per_pulse") return IntensitySemantics::per_pulse;
    throw InvalidArgument("unknown intensity semantics '" + std::string(s) + "'");
}

void ProtocolConfig::validate() const {
    auto fail = [](const std::string& what) { throw InvalidArgument(what); };
    if (!(symbol_rate_GHz > 0)) fail("symbol_rate must be positive");
    if (!(z_basis_probability > 0 && z_basis_probability < 1)) fail("z_basis_probability must lie in (0, 1)");
    if (!(decoy_intensity > 0)) fail("decoy intensity must be positive");
    if (!(decoy_intensity < signal_intensity)) fail("decoy intensity must be below signal intensity (nu < mu)");
    if (!(vacuum_intensity >= 0 && vacuum_intensity < decoy_intensity))
        fail("vacuum intensity must lie in [0, nu)");
    double sum = 0.0;
    for (double p : intensity_probabilities) {
        if (!(p > 0 && p < 1)) fail("intensity probabilities must lie in (0, 1)");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("intensity probabilities must sum to 1");
    if (phase_randomization_levels < 2) fail("phase_randomization_levels must be at least 2");
}

double ProtocolConfig::intensity(IntensityClass c) const {
    switch (c) {
        case IntensityClass::signal: return signal_intensity;
        case IntensityClass::decoy: return decoy_intensity;
        case IntensityClass::vacuum: return vacuum_intensity;
    }
    return 0.0;
}

Symbol make_symbol(Basis basis, int bit, IntensityClass cls, int phase_index,
                   const ProtocolConfig& config) {
    if (bit != 0 && bit != 1) throw InvalidArgument("bit must be 0 or 1");
    if (phase_index < 0 || phase_index >= config.phase_randomization_levels)
        throw InvalidArgument("phase index out of range");
    Symbol s;
    s.basis = basis;
    s.bit = bit;
    s.intensity_class = cls;
    s.global_phase_index = phase_index;

    const double mu = config.intensity(cls);
    const double theta = 2.0 * constants::pi * phase_index / config.phase_randomization_levels;
    const cdouble global = std::polar(1.0, theta);
    if (basis == Basis::Z) {
        const cdouble a = std::sqrt(mu) * global;
        (bit == 0 ? s.early : s.late) = a;
    } else {
        const double per_bin = config.intensity_semantics == IntensitySemantics::per_symbol ? mu / 2.0 : mu;
        s.early = std::sqrt(per_bin) * global;
        s.late = std::sqrt(per_bin) * global * std::polar(1.0, s.relative_phase());
    }
    return s;
}

Symbol sample_symbol(CounterRng& rng, const ProtocolConfig& config) {
    const Basis basis = rng.bernoulli(config.z_basis_probability) ? Basis::Z : Basis::X;
    const int bit = rng.bernoulli(0.5) ? 1 : 0;
    const double u = rng.uniform();
    IntensityClass cls = IntensityClass::vacuum;
    if (u < config.intensity_probabilities[0]) {
        cls = IntensityClass::signal;
    } else if (u < config.intensity_probabilities[0] + config.intensity_probabilities[1]) {
        cls = IntensityClass::decoy;
    }
    const int phase = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.phase_randomization_levels)));
    return make_symbol(basis, bit, cls, phase, config);
}

std::vector<Symbol> generate_symbols(CounterRng& rng, const ProtocolConfig& config, std::size_t count) {
    config.validate();
    std::vector<Symbol> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_symbol(rng, config));
    return out;
}

ModulatorWaveforms symbols_to_waveforms(std::span<const Symbol> symbols, const ProtocolConfig& config) {
    if (symbols.empty()) throw InvalidArgument("no symbols to encode");
    ModulatorWaveforms w;
    w.bin_rate_GHz = 2.0 * config.symbol_rate_GHz;
    w.gain_switch_pattern.reserve(2 * symbols.size());
    w.phase_pattern.reserve(2 * symbols.size());
    const double two_pi = 2.0 * constants::pi;
    for (const Symbol& s : symbols) {
        const double theta = two_pi * s.global_phase_index / config.phase_randomization_levels;
        const bool early_on = s.basis == Basis::X || s.bit == 0;
        const bool late_on = s.basis == Basis::X || s.bit == 1;
        w.gain_switch_pattern.push_back(early_on);
        w.gain_switch_pattern.push_back(late_on);
        w.phase_pattern.push_back(theta);
        w.phase_pattern.push_back(std::fmod(theta + s.relative_phase(), two_pi));
    }
    return w;
}

PulsePair ideal_pulse_pair(const Symbol& symbol) { return {symbol.early, symbol.late}; }

void write_symbols_csv(std::span<const Symbol> symbols, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << "index,basis,bit,class,phase_index\n";
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const Symbol& s = symbols[i];
        os << i << ',' << to_string(s.basis) << ',' << s.bit << ',' << to_string(s.intensity_class) << ','
           << s.global_phase_index << '\n';
    }
}

std::vector<Symbol> read_symbols_csv(const std::string& path, const ProtocolConfig& config) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::string line;
    std::getline(is, line);
    std::vector<Symbol> out;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string index, basis, bit, cls, phase;
        if (!std::getline(ss, index, ',') || !std::getline(ss, basis, ',') || !std::getline(ss, bit, ',') ||
            !std::getline(ss, cls, ',') || !std::getline(ss, phase))
            throw MalformedRecord(path + ":" + std::to_string(lineno) + ": expected 5 fields");
        if (std::stoul(index) != out.size())
            throw MalformedRecord(path + ":" + std::to_string(lineno) + ": symbol index out of sequence");
        out.push_back(make_symbol(parse_basis(basis), std::stoi(bit), parse_intensity_class(cls),
                                  std::stoi(phase), config));
    }
    return out;
}

}  // namespace wtqkd
