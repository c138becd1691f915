// protocol.hpp
//
// Efficient BB84 with time-bin (Z) and relative-phase (X) encoding over a pair
// of pulses per symbol, vacuum + weak decoy intensities, and discrete global
// phase randomization.

#ifndef WTQKD_PROTOCOL_HPP
#define WTQKD_PROTOCOL_HPP

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wtqkd/rng.hpp"
#include "wtqkd/types.hpp"

namespace wtqkd {

enum class Basis { Z = 0, X = 1 };
enum class IntensityClass { signal = 0, decoy = 1, vacuum = 2 };

/// How the configured intensities are read: mean photons per pulse pair, or
/// per optical pulse (X symbols then carry twice the class intensity).
enum class IntensitySemantics { per_symbol, per_pulse };

std::string_view to_string(Basis b);
std::string_view to_string(IntensityClass c);
std::string_view to_string(IntensitySemantics s);
Basis parse_basis(std::string_view s);
IntensityClass parse_intensity_class(std::string_view s);
IntensitySemantics parse_intensity_semantics(std::string_view s);

inline constexpr std::array<IntensityClass, 3> all_intensity_classes{
    IntensityClass::signal, IntensityClass::decoy, IntensityClass::vacuum};
inline constexpr std::array<Basis, 2> all_bases{Basis::Z, Basis::X};

struct ProtocolConfig {
    double symbol_rate_GHz = 1.0;
    double z_basis_probability = 0.9375;
    double signal_intensity = 0.4;
    double decoy_intensity = 0.1;
    double vacuum_intensity = 0.0;
    std::array<double, 3> intensity_probabilities{0.75, 0.125, 0.125};  // signal, decoy, vacuum
    int phase_randomization_levels = 10;
    IntensitySemantics intensity_semantics = IntensitySemantics::per_symbol;

    /// Throws InvalidArgument naming the violated constraint.
    void validate() const;

    double intensity(IntensityClass c) const;
    double probability(IntensityClass c) const {
        return intensity_probabilities[static_cast<std::size_t>(c)];
    }
    double basis_probability(Basis b) const {
        return b == Basis::Z ? z_basis_probability : 1.0 - z_basis_probability;
    }
};

struct Symbol {
    Basis basis = Basis::Z;
    int bit = 0;
    IntensityClass intensity_class = IntensityClass::signal;
    int global_phase_index = 0;
    cdouble early{0.0, 0.0};
    cdouble late{0.0, 0.0};

    /// Encoded phase between the late and early pulse; pi for X bit 1.
    double relative_phase() const { return basis == Basis::X && bit == 1 ? constants::pi : 0.0; }
    double mean_photons() const { return std::norm(early) + std::norm(late); }
};

/// Builds the pulse-pair amplitudes for the given choices.
Symbol make_symbol(Basis basis, int bit, IntensityClass cls, int phase_index,
                   const ProtocolConfig& config);

/// Draws basis, bit, intensity class, then phase index, in that order.
Symbol sample_symbol(CounterRng& rng, const ProtocolConfig& config);

std::vector<Symbol> generate_symbols(CounterRng& rng, const ProtocolConfig& config, std::size_t count);

/// Drive patterns at two bins per symbol.
struct ModulatorWaveforms {
    std::vector<bool> gain_switch_pattern;
    std::vector<double> phase_pattern;  // rad, in [0, 2 pi)
    double bin_rate_GHz = 2.0;
};

/// The early pulse of each pair carries the global phase 2 pi k / levels; the
/// late pulse carries the global phase plus the encoded relative phase.
ModulatorWaveforms symbols_to_waveforms(std::span<const Symbol> symbols, const ProtocolConfig& config);

struct PulsePair {
    cdouble early;
    cdouble late;
};

/// Coherent-state amplitudes of the two bins, bypassing the laser model.
PulsePair ideal_pulse_pair(const Symbol& symbol);

/// CSV `index,basis,bit,class,phase_index`.
void write_symbols_csv(std::span<const Symbol> symbols, const std::string& path);
std::vector<Symbol> read_symbols_csv(const std::string& path, const ProtocolConfig& config);

}  // namespace wtqkd

#endif  // WTQKD_PROTOCOL_HPP
