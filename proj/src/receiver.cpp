#include "wtqkd/receiver.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wtqkd/errors.hpp"

namespace wtqkd {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

struct BinMeans {
    double early;
    double late;
};

// Mean photon number per bin as emitted, including Z-basis leakage into the
// empty bin.
BinMeans emitted(const Symbol& s, const LinkExtras& extras) {
    if (s.basis == Basis::X) return {std::norm(s.early), std::norm(s.late)};
    const double total = s.mean_photons();
    const double f = extras.leakage_fraction();
    return s.bit == 0 ? BinMeans{total * (1.0 - f), total * f} : BinMeans{total * f, total * (1.0 - f)};
}

double symbol_visibility(const Symbol& s, const ReceiverParams& rx, const LinkExtras& extras) {
    return s.basis == Basis::X ? extras.visibility * rx.amzi_visibility : 0.0;
}

// Gates strictly inside one dead time after a click.
double blocked_gates(double dead_time_ns, double spacing_ns) {
    if (dead_time_ns <= 0.0) return 0.0;
    return std::max(0.0, std::ceil(dead_time_ns / spacing_ns - 1e-9) - 1.0);
}

}  // namespace

void ChannelParams::validate() const {
    if (!(attenuation_dB >= 0.0)) throw InvalidArgument("attenuation must be >= 0 dB");
}

void ReceiverParams::validate() const {
    auto fail = [](const std::string& what) { throw InvalidArgument(what); };
    if (!in_unit(bs_z_fraction)) fail("bs_z_fraction must lie in [0, 1]");
    if (!in_unit(amzi_visibility)) fail("amzi_visibility must lie in [0, 1]");
    if (!in_unit(detector_efficiency)) fail("detector_efficiency must lie in [0, 1]");
    if (!(amzi_insertion_loss_dB >= 0.0)) fail("amzi_insertion_loss must be >= 0 dB");
    if (!(receiver_insertion_loss_dB >= 0.0)) fail("receiver_insertion_loss must be >= 0 dB");
    if (!(dark_count_rate_Hz >= 0.0)) fail("dark_count_rate must be >= 0");
    if (!(gate_window_ps > 0.0)) fail("gate_window must be positive");
    if (!in_unit(dark_probability_per_gate())) fail("dark count probability per gate exceeds 1");
    if (!(dead_time_ns >= 0.0)) fail("dead_time must be >= 0");
    if (!(efficiency_envelope_width_nm > 0.0)) fail("efficiency envelope width must be positive");
}

void LinkExtras::validate() const {
    if (!(extinction_ratio_dB >= 0.0)) throw InvalidArgument("extinction ratio must be >= 0 dB");
    if (!in_unit(visibility)) throw InvalidArgument("visibility must lie in [0, 1]");
}

double LinkExtras::leakage_fraction() const {
    if (std::isinf(extinction_ratio_dB)) return 0.0;
    const double l = from_db(-extinction_ratio_dB);
    return l / (1.0 + l);
}

std::string_view to_string(Detector d) {
    switch (d) {
        case Detector::D1: return "D1";
        case Detector::D2: return "D2";
        case Detector::D3: return "D3";
    }
    return "?";
}

std::string_view to_string(TimeBin b) {
    switch (b) {
        case TimeBin::early: return "early";
        case TimeBin::late: return "late";
        case TimeBin::interference: return "interference";
    }
    return "?";
}

Detector parse_detector(std::string_view s) {
    if (s == "D1") return Detector::D1;
    if (s == "D2") return Detector::D2;
    if (s == "D3") return Detector::D3;
    throw MalformedRecord("unknown detector '" + std::string(s) + "'");
}

TimeBin parse_time_bin(std::string_view s) {
    if (s == "early") return TimeBin::early;
    if (s == "late") return TimeBin::late;
    if (s == "interference") return TimeBin::interference;
    throw MalformedRecord("unknown time bin '" + std::string(s) + "'");
}

double channel_transmittance(double attenuation_dB) {
    if (!(attenuation_dB >= 0.0)) throw InvalidArgument("attenuation must be >= 0 dB");
    return from_db(-attenuation_dB);
}

AmziProbs amzi_output_probs(double relative_phase, double visibility) {
    if (!in_unit(visibility)) throw InvalidArgument("visibility must lie in [0, 1]");
    const double c = visibility * std::cos(relative_phase);
    return {(1.0 + c) / 2.0, (1.0 - c) / 2.0};
}

double click_probability(double mean_photons, double efficiency, double dark_probability) {
    if (!(mean_photons >= 0.0) || !in_unit(efficiency) || !in_unit(dark_probability))
        throw InvalidArgument("click_probability inputs out of range");
    return 1.0 - (1.0 - dark_probability) * std::exp(-efficiency * mean_photons);
}

PathTransmittance path_transmittance(const ChannelParams& channel, const ReceiverParams& rx) {
    const double common = channel_transmittance(channel.attenuation_dB) * from_db(-rx.receiver_insertion_loss_dB);
    return {common * rx.bs_z_fraction * rx.detector_efficiency,
            common * (1.0 - rx.bs_z_fraction) * from_db(-rx.amzi_insertion_loss_dB) * 0.5 * rx.detector_efficiency};
}

AnalyticDetection detect_analytic(const ProtocolConfig& config, const ChannelParams& channel,
                                  const ReceiverParams& rx, const LinkExtras& extras) {
    config.validate();
    channel.validate();
    rx.validate();
    extras.validate();

    const PathTransmittance path = path_transmittance(channel, rx);
    const double pd = rx.dark_probability_per_gate();

    struct Gates {
        double d1_early, d1_late, d2, d3;
    };
    // [class][basis][bit]
    std::array<std::array<std::array<Gates, 2>, 2>, 3> gates{};
    std::array<double, 3> raw{};  // mean raw clicks per symbol per detector
    for (IntensityClass c : all_intensity_classes) {
        for (Basis b : all_bases) {
            for (int bit = 0; bit < 2; ++bit) {
                const Symbol s = make_symbol(b, bit, c, 0, config);
                const BinMeans m = emitted(s, extras);
                const AmziProbs amzi = amzi_output_probs(s.relative_phase(), symbol_visibility(s, rx, extras));
                const double slot = (m.early + m.late) * path.interferometer;
                Gates g{click_probability(m.early * path.direct, 1.0, pd),
                        click_probability(m.late * path.direct, 1.0, pd),
                        click_probability(slot * amzi.d2, 1.0, pd), click_probability(slot * amzi.d3, 1.0, pd)};
                gates[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)][bit] = g;
                const double w = config.probability(c) * config.basis_probability(b) * 0.5;
                raw[0] += w * (g.d1_early + g.d1_late);
                raw[1] += w * g.d2;
                raw[2] += w * g.d3;
            }
        }
    }

    AnalyticDetection out;
    const double period_ns = 1.0 / config.symbol_rate_GHz;
    const std::array<double, 3> gates_per_symbol{2.0, 1.0, 1.0};
    for (std::size_t d = 0; d < 3; ++d) {
        const double spacing = period_ns / gates_per_symbol[d];
        const double n = blocked_gates(rx.dead_time_ns, spacing);
        out.dead_time_survival[d] = 1.0 / (1.0 + n * raw[d] / gates_per_symbol[d]);
    }
    const bool d1_self_block = blocked_gates(rx.dead_time_ns, period_ns / 2.0) >= 1.0;
    const double s1 = out.dead_time_survival[0];
    const double s2 = out.dead_time_survival[1];
    const double s3 = out.dead_time_survival[2];

    for (IntensityClass c : all_intensity_classes) {
        const auto ci = static_cast<std::size_t>(c);
        for (Basis b : all_bases) {
            const auto bi = static_cast<std::size_t>(b);
            double gain = 0.0;
            double errors = 0.0;
            for (int bit = 0; bit < 2; ++bit) {
                const Gates& g = gates[ci][bi][bit];
                // an early D1 click blocks the late gate of the same symbol
                const double early = s1 * g.d1_early;
                const double late = s1 * (d1_self_block ? 1.0 - g.d1_early : 1.0) * g.d1_late;
                const double d2 = s2 * g.d2;
                const double d3 = s3 * g.d3;
                const double w = 0.5 * config.probability(c) * config.basis_probability(b);
                out.records_per_symbol[0] += w * (early + late);
                out.records_per_symbol[1] += w * d2;
                out.records_per_symbol[2] += w * d3;
                if (b == Basis::Z) {
                    gain += 0.5 * (early + late);
                    errors += 0.5 * (bit == 0 ? late : early);
                } else {
                    gain += 0.5 * (d2 + d3);
                    errors += 0.5 * (bit == 0 ? d3 : d2);
                }
            }
            out.rates[ci][bi] = {gain, gain > 0.0 ? errors / gain : 0.5};
        }
    }
    for (std::size_t d = 0; d < 3; ++d) {
        out.count_rate_Hz[d] = out.records_per_symbol[d] * config.symbol_rate_GHz * 1e9;
        if (out.count_rate_Hz[d] > saturation_count_rate_Hz) out.saturated = true;
    }
    return out;
}

std::vector<DetectionRecord> detect_monte_carlo(std::span<const Symbol> symbols, const ProtocolConfig& config,
                                                const ChannelParams& channel, const ReceiverParams& rx,
                                                std::uint64_t seed, const LinkExtras& extras) {
    config.validate();
    channel.validate();
    rx.validate();
    extras.validate();

    const double common = channel_transmittance(channel.attenuation_dB) * from_db(-rx.receiver_insertion_loss_dB);
    const double amzi_survival = from_db(-rx.amzi_insertion_loss_dB);
    const double eta = rx.detector_efficiency;
    const double pd = rx.dark_probability_per_gate();
    const double period_ns = 1.0 / config.symbol_rate_GHz;
    const CounterRng parent(seed);

    std::array<double, 3> last_click{-std::numeric_limits<double>::infinity(),
                                     -std::numeric_limits<double>::infinity(),
                                     -std::numeric_limits<double>::infinity()};
    std::vector<DetectionRecord> records;

    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const Symbol& s = symbols[k];
        CounterRng rng = parent.split(k);
        const BinMeans m = emitted(s, extras);
        const AmziProbs amzi = amzi_output_probs(s.relative_phase(), symbol_visibility(s, rx, extras));

        int d1_early = 0, d1_late = 0, d2 = 0, d3 = 0;
        // bin 0 = early, 1 = late. An early photon reaches the interference
        // slot through the long arm, a late photon through the short arm.
        for (int bin = 0; bin < 2; ++bin) {
            const std::uint64_t n = rng.poisson((bin == 0 ? m.early : m.late) * common);
            for (std::uint64_t i = 0; i < n; ++i) {
                if (rng.bernoulli(rx.bs_z_fraction)) {
                    if (rng.bernoulli(eta)) ++(bin == 0 ? d1_early : d1_late);
                    continue;
                }
                if (!rng.bernoulli(amzi_survival)) continue;
                const bool long_arm = rng.bernoulli(0.5);
                if (long_arm != (bin == 0)) continue;  // side slot
                const bool to_d2 = rng.bernoulli(amzi.d2);
                if (rng.bernoulli(eta)) ++(to_d2 ? d2 : d3);
            }
        }

        const double t0 = static_cast<double>(k) * period_ns;
        auto gate = [&](Detector d, TimeBin b, double t, int photons) {
            const bool dark = rng.bernoulli(pd);
            if (photons == 0 && !dark) return;
            auto& last = last_click[static_cast<std::size_t>(d)];
            if (t - last < rx.dead_time_ns) return;
            last = t;
            records.push_back({k, d, b, photons == 0});
        };
        gate(Detector::D1, TimeBin::early, t0, d1_early);
        gate(Detector::D1, TimeBin::late, t0 + period_ns / 2.0, d1_late);
        gate(Detector::D2, TimeBin::interference, t0 + period_ns / 2.0, d2);
        gate(Detector::D3, TimeBin::interference, t0 + period_ns / 2.0, d3);
    }
    return records;
}

ReceiverParams wavelength_adjusted_receiver(const ReceiverParams& receiver, double wavelength_nm) {
    if (!(wavelength_nm >= 1500.0 && wavelength_nm <= 1600.0))
        throw InvalidArgument("wavelength must lie in [1500, 1600] nm");
    ReceiverParams out = receiver;
    const double d = (wavelength_nm - 1550.0) / receiver.efficiency_envelope_width_nm;
    out.detector_efficiency = receiver.detector_efficiency * std::exp(-0.5 * d * d);
    return out;
}

void write_records_csv(std::span<const DetectionRecord> records, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << "symbol_index,detector,bin,is_dark\n";
    for (const DetectionRecord& r : records)
        os << r.symbol_index << ',' << to_string(r.detector) << ',' << to_string(r.bin) << ','
           << (r.is_dark ? 1 : 0) << '\n';
}

std::vector<DetectionRecord> read_records_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::string line;
    std::getline(is, line);
    std::vector<DetectionRecord> out;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string idx, det, bin, dark;
        if (!std::getline(ss, idx, ',') || !std::getline(ss, det, ',') || !std::getline(ss, bin, ',') ||
            !std::getline(ss, dark))
            throw MalformedRecord(path + ":" + std::to_string(lineno) + ": expected 4 fields");
        DetectionRecord r;
        try {
            r.symbol_index = std::stoull(idx);
        } catch (const std::exception&) {
            throw MalformedRecord(path + ":" + std::to_string(lineno) + ": bad symbol index");
        }
        r.detector = parse_detector(det);
        r.bin = parse_time_bin(bin);
        if (dark != "0" && dark != "1") throw MalformedRecord(path + ":" + std::to_string(lineno) + ": bad is_dark");
        r.is_dark = dark == "1";
        out.push_back(r);
    }
    return out;
}

}  // namespace wtqkd
