#include "wtqkd/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "wtqkd/errors.hpp"
#include "wtqkd/format.hpp"

namespace wtqkd {

DetectionTally& DetectionTally::operator+=(const DetectionTally& other) {
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t b = 0; b < 2; ++b) {
            cells[c][b].sent += other.cells[c][b].sent;
            cells[c][b].detected += other.cells[c][b].detected;
            cells[c][b].errors += other.cells[c][b].errors;
        }
    }
    sifted_out += other.sifted_out;
    return *this;
}

void DetectionTally::validate() const {
    for (IntensityClass c : all_intensity_classes) {
        for (Basis b : all_bases) {
            const TallyCell& t = at(c, b);
            const std::string where = std::string(to_string(c)) + "/" + std::string(to_string(b));
            if (t.errors > t.detected) throw InvalidArgument(where + ": errors exceed detections");
            // D1 has two gates per symbol
            const std::uint64_t opportunities = b == Basis::Z ? 2 * t.sent : t.sent;
            if (t.detected > opportunities) throw InvalidArgument(where + ": detections exceed gate opportunities");
        }
    }
}

RateTable DetectionTally::rates() const {
    RateTable out{};
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t b = 0; b < 2; ++b) {
            const TallyCell& t = cells[c][b];
            out[c][b].gain = t.sent ? static_cast<double>(t.detected) / static_cast<double>(t.sent) : 0.0;
            out[c][b].qber = t.detected ? static_cast<double>(t.errors) / static_cast<double>(t.detected) : 0.0;
        }
    }
    return out;
}

DetectionTally sift(std::span<const Symbol> sent, std::span<const DetectionRecord> records) {
    DetectionTally tally;
    for (const Symbol& s : sent) ++tally.at(s.intensity_class, s.basis).sent;
    for (const DetectionRecord& r : records) {
        if (r.symbol_index >= sent.size())
            throw MalformedRecord("record references symbol " + std::to_string(r.symbol_index) + " of " +
                                  std::to_string(sent.size()));
        const bool direct = r.detector == Detector::D1;
        if (direct == (r.bin == TimeBin::interference))
            throw MalformedRecord("detector " + std::string(to_string(r.detector)) + " cannot record bin " +
                                  std::string(to_string(r.bin)));
        const Symbol& s = sent[r.symbol_index];
        if (direct != (s.basis == Basis::Z)) {
            ++tally.sifted_out;
            continue;
        }
        TallyCell& cell = tally.at(s.intensity_class, s.basis);
        ++cell.detected;
        const bool error = direct ? (r.bin == TimeBin::early) != (s.bit == 0)
                                  : (r.detector == Detector::D2) != (s.bit == 0);
        if (error) ++cell.errors;
    }
    return tally;
}

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("binary_entropy argument must lie in [0, 1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

GainQber analytic_gain_qber(double intensity, double eta_total, double y0, double e_opt) {
    if (!(intensity >= 0.0) || !(eta_total >= 0.0 && eta_total <= 1.0) || !(y0 >= 0.0 && y0 <= 1.0) ||
        !(e_opt >= 0.0 && e_opt <= 1.0))
        throw InvalidArgument("analytic_gain_qber inputs out of range");
    const double signal = -std::expm1(-eta_total * intensity);
    const double q = y0 + signal;
    if (q == 0.0) return {0.0, 0.0};
    return {q, (0.5 * y0 + e_opt * signal) / q};
}

DecoyBounds decoy_bounds(const GainQber& signal, const GainQber& decoy, double y0, double mu, double nu) {
    if (!(nu > 0.0 && nu < mu)) throw InvalidArgument("decoy bounds need 0 < nu < mu");
    if (!(y0 >= 0.0 && y0 <= 1.0)) throw InvalidArgument("vacuum yield must lie in [0, 1]");
    const double y1 = mu / (mu * nu - nu * nu) *
                      (decoy.gain * std::exp(nu) - signal.gain * std::exp(mu) * (nu * nu) / (mu * mu) -
                       (mu * mu - nu * nu) / (mu * mu) * y0);
    if (!(y1 > 0.0)) throw EstimationAborted("single-photon yield bound is not positive");
    const double e1 = (decoy.qber * decoy.gain * std::exp(nu) - 0.5 * y0) / (y1 * nu);
    return {std::min(y1, 1.0), std::clamp(e1, 0.0, 1.0)};
}

SkrResult secure_key_rate(double Q_mu, double E_mu, double y1_lower, double e1_upper, const ProtocolConfig& config,
                          double clock_GHz, double ec_efficiency) {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(Q_mu) || !unit(E_mu) || !unit(y1_lower) || !unit(e1_upper))
        throw InvalidArgument("key rate inputs must lie in [0, 1]");
    if (!(ec_efficiency >= 1.0)) throw InvalidArgument("error-correction efficiency must be >= 1");
    if (!(clock_GHz > 0.0)) throw InvalidArgument("clock must be positive");
    const double mu = config.signal_intensity;
    SkrResult r;
    r.q_sift = config.z_basis_probability * config.z_basis_probability;
    r.Q_mu = Q_mu;
    r.E_mu = E_mu;
    r.Y1_lower = y1_lower;
    r.e1_upper = e1_upper;
    r.Q1_lower = y1_lower * mu * std::exp(-mu);
    const double per_pulse =
        r.Q1_lower * (1.0 - binary_entropy(e1_upper)) - ec_efficiency * Q_mu * binary_entropy(E_mu);
    r.skr = clock_GHz * 1e9 * config.probability(IntensityClass::signal) * r.q_sift * std::max(0.0, per_pulse);
    return r;
}

SkrResult estimate_key_rate(const RateTable& rates, const ProtocolConfig& config, double ec_efficiency) {
    const double mu = config.signal_intensity;
    const double nu = config.decoy_intensity;
    auto cell = [&](IntensityClass c, Basis b) { return rates[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)]; };
    const GainQber zs = cell(IntensityClass::signal, Basis::Z);
    try {
        const DecoyBounds z = decoy_bounds(zs, cell(IntensityClass::decoy, Basis::Z),
                                           cell(IntensityClass::vacuum, Basis::Z).gain, mu, nu);
        const DecoyBounds x = decoy_bounds(cell(IntensityClass::signal, Basis::X), cell(IntensityClass::decoy, Basis::X),
                                           cell(IntensityClass::vacuum, Basis::X).gain, mu, nu);
        return secure_key_rate(zs.gain, zs.qber, z.y1_lower, x.e1_upper, config, config.symbol_rate_GHz,
                               ec_efficiency);
    } catch (const EstimationAborted&) {
        SkrResult r = secure_key_rate(zs.gain, zs.qber, 0.0, 0.5, config, config.symbol_rate_GHz, ec_efficiency);
        r.skr = 0.0;
        r.estimation_aborted = true;
        return r;
    }
}

void write_tally_csv(const DetectionTally& tally, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << "class,basis,sent,detected,errors\n";
    for (IntensityClass c : all_intensity_classes) {
        for (Basis b : all_bases) {
            const TallyCell& t = tally.at(c, b);
            os << to_string(c) << ',' << to_string(b) << ',' << t.sent << ',' << t.detected << ',' << t.errors
               << '\n';
        }
    }
}

DetectionTally read_tally_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    std::string line;
    std::getline(is, line);
    DetectionTally tally;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        std::stringstream ss(line);
        std::string cls, basis, sent, detected, errors;
        if (!std::getline(ss, cls, ',') || !std::getline(ss, basis, ',') || !std::getline(ss, sent, ',') ||
            !std::getline(ss, detected, ',') || !std::getline(ss, errors))
            throw MalformedRecord(where + ": expected 5 fields");
        try {
            TallyCell& t = tally.at(parse_intensity_class(cls), parse_basis(basis));
            t.sent = std::stoull(sent);
            t.detected = std::stoull(detected);
            t.errors = std::stoull(errors);
        } catch (const InvalidArgument& e) {
            throw MalformedRecord(where + ": " + e.what());
        } catch (const std::logic_error&) {
            throw MalformedRecord(where + ": counts must be nonnegative integers");
        }
    }
    tally.validate();
    return tally;
}

void write_skr_result(const SkrResult& r, std::ostream& os) {
    os << "skr=" << format_double(r.skr) << '\n'
       << "q_sift=" << format_double(r.q_sift) << '\n'
       << "Q_mu=" << format_double(r.Q_mu) << '\n'
       << "E_mu=" << format_double(r.E_mu) << '\n'
       << "Y1_lower=" << format_double(r.Y1_lower) << '\n'
       << "e1_upper=" << format_double(r.e1_upper) << '\n'
       << "Q1_lower=" << format_double(r.Q1_lower) << '\n'
       << "estimation_aborted=" << (r.estimation_aborted ? "true" : "false") << '\n';
}

}  // namespace wtqkd
