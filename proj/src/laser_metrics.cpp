#include "wtqkd/laser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "wtqkd/errors.hpp"

namespace wtqkd {

double modulation_bandwidth_squared(const LaserParams& params, double bias_mA) {
    params.validate();
    if (bias_mA < params.threshold_current_mA)
        throw BelowThresholdError("bias current is below threshold");
    const double q = params.elementary_charge_C;
    const double prefactor = 3.0 / (4.0 * constants::pi * constants::pi * q);
    const double f2 = prefactor * params.gain_coefficient() / params.active_volume_m3 *
                      (bias_mA - params.threshold_current_mA) * mA;
    return f2 / (GHz * GHz);
}

double modulation_bandwidth(const LaserParams& params, double bias_mA) {
    return std::sqrt(modulation_bandwidth_squared(params, bias_mA));
}

void PulseHistogram::validate() const {
    if (bin_edges_ps.size() != counts.size() + 1)
        throw InvalidArgument("histogram needs one more edge than counts");
    if (counts.size() == 0) throw InsufficientData("empty histogram");
    for (Eigen::Index i = 1; i < bin_edges_ps.size(); ++i)
        if (!(bin_edges_ps(i) > bin_edges_ps(i - 1)))
            throw InvalidArgument("histogram bin edges must be strictly increasing");
    if ((counts < 0).any()) throw InvalidArgument("histogram counts must be nonnegative");
}

namespace {

/// Mean of `values` folded modulo `period_ps` into `bins` equal bins.
ArrayXd fold(const ArrayXd& time_ps, const ArrayXd& values, double period_ps, Eigen::Index bins) {
    ArrayXd sum = ArrayXd::Zero(bins);
    ArrayXd hits = ArrayXd::Zero(bins);
    for (Eigen::Index i = 0; i < time_ps.size(); ++i) {
        double phase = std::fmod(time_ps(i), period_ps);
        if (phase < 0) phase += period_ps;
        auto b = static_cast<Eigen::Index>(phase / period_ps * static_cast<double>(bins));
        b = std::min(b, bins - 1);
        sum(b) += values(i);
        hits(b) += 1.0;
    }
    return (hits > 0).select(sum / hits.max(1.0), 0.0);
}

double period_ps_of(double clock_GHz) {
    if (!(clock_GHz > 0)) throw InvalidArgument("clock must be positive");
    return 1e3 / clock_GHz;
}

/// Offset within the clock period where the folded output is lowest, used
/// as the boundary between pulse windows.
double window_start_ps(const FieldTrace& trace, double period_ps) {
    const auto bins = std::max<Eigen::Index>(
        8, static_cast<Eigen::Index>(std::round(period_ps / trace.sample_interval_ps)));
    const ArrayXd folded = fold(trace.time_ps, trace.total_photons(), period_ps, bins);
    Eigen::Index lo = 0;
    folded.minCoeff(&lo);
    return (static_cast<double>(lo) + 0.5) * period_ps / static_cast<double>(bins);
}

struct Window {
    Eigen::Index begin;
    Eigen::Index end;
};

std::vector<Window> pulse_windows(const FieldTrace& trace, double period_ps) {
    std::vector<Window> windows;
    if (trace.samples() == 0) return windows;
    const double start = window_start_ps(trace, period_ps);
    const double t0 = trace.time_ps(0);
    double edge = start + std::ceil((t0 - start) / period_ps) * period_ps;
    const double t_last = trace.time_ps(trace.samples() - 1);
    Eigen::Index i = 0;
    while (edge + period_ps <= t_last + 0.5 * trace.sample_interval_ps) {
        while (i < trace.samples() && trace.time_ps(i) < edge) ++i;
        Eigen::Index j = i;
        while (j < trace.samples() && trace.time_ps(j) < edge + period_ps) ++j;
        if (j > i) windows.push_back({i, j});
        i = j;
        edge += period_ps;
    }
    return windows;
}

}  // namespace

PulseHistogram pulse_histogram(const FieldTrace& trace, double clock_GHz, double bin_width_ps,
                               double peak_counts) {
    const double period = period_ps_of(clock_GHz);
    if (!(bin_width_ps > 0)) throw InvalidArgument("bin width must be positive");
    if (trace.samples() == 0) throw InsufficientData("empty trace");
    const auto bins = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::round(period / bin_width_ps)));
    const ArrayXd folded = fold(trace.time_ps, trace.total_photons(), period, bins);
    const double top = folded.maxCoeff();
    if (!(top > 0)) throw InsufficientData("trace carries no light");

    PulseHistogram hist;
    hist.bin_edges_ps = ArrayXd::LinSpaced(bins + 1, 0.0, period);
    hist.counts = (folded / top * peak_counts).round().cast<long long>();
    return hist;
}

DbRatio extinction_ratio(const PulseHistogram& hist) {
    hist.validate();
    const long long n_max = hist.counts.maxCoeff();
    const long long n_min = hist.counts.minCoeff();
    if (n_max <= 0) throw InsufficientData("histogram has no counts");
    if (n_min == 0) return {to_db(static_cast<double>(n_max)), true};
    return {to_db(static_cast<double>(n_max) / static_cast<double>(n_min)), false};
}

GaussianFit fit_gaussian(std::span<const double> intensity, std::span<const double> time_ps,
                         int max_iterations) {
    const auto n = static_cast<Eigen::Index>(intensity.size());
    if (n != static_cast<Eigen::Index>(time_ps.size()))
        throw InvalidArgument("intensity and time axis differ in length");
    if (n < 5) throw InsufficientData("need at least 5 samples to fit a Gaussian");
    const Eigen::Map<const ArrayXd> y(intensity.data(), n);
    const Eigen::Map<const ArrayXd> t(time_ps.data(), n);

    Eigen::Index peak = 0;
    const double y_max = y.maxCoeff(&peak);
    const double y_min = y.minCoeff();
    const double span = y_max - y_min;
    if (!(span > 1e-12 * std::max(1.0, std::abs(y_max))))
        throw FitFailure("trace has no peak to fit", 0.0);

    // Initial guess from the half-maximum crossings around the peak.
    const double half = y_min + 0.5 * span;
    Eigen::Index lo = peak, hi = peak;
    while (lo > 0 && y(lo) > half) --lo;
    while (hi < n - 1 && y(hi) > half) ++hi;
    double width = std::max(t(hi) - t(lo), std::abs(t(1) - t(0)));

    Eigen::Vector4d p(span, t(peak), width / 2.3548200450309493, y_min);
    auto residuals = [&](const Eigen::Vector4d& q) {
        const ArrayXd z = (t - q(1)) / q(2);
        return ArrayXd(q(0) * (-0.5 * z.square()).exp() + q(3) - y);
    };
    ArrayXd r = residuals(p);
    double cost = r.square().sum();
    double lambda = 1e-3;
    int it = 0;
    bool converged = false;
    for (; it < max_iterations; ++it) {
        const ArrayXd z = (t - p(1)) / p(2);
        const ArrayXd g = (-0.5 * z.square()).exp();
        Eigen::MatrixXd J(n, 4);
        J.col(0) = g.matrix();
        J.col(1) = (p(0) * g * z / p(2)).matrix();
        J.col(2) = (p(0) * g * z.square() / p(2)).matrix();
        J.col(3).setOnes();
        const Eigen::Matrix4d JtJ = J.transpose() * J;
        const Eigen::Vector4d grad = J.transpose() * r.matrix();

        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::Matrix4d A = JtJ;
            A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-30);
            const Eigen::Vector4d step = A.ldlt().solve(-grad);
            Eigen::Vector4d candidate = p + step;
            candidate(2) = std::abs(candidate(2));
            const ArrayXd rc = residuals(candidate);
            const double c = rc.square().sum();
            if (std::isfinite(c) && c <= cost) {
                const double rel = (cost - c) / std::max(cost, 1e-300);
                const double move = step.cwiseAbs().cwiseQuotient(p.cwiseAbs().cwiseMax(1e-12)).maxCoeff();
                p = candidate;
                r = rc;
                cost = c;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (rel < 1e-14 || move < 1e-10) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            // No downhill step left: at a minimum to working precision.
            converged = true;
        }
        if (converged) break;
    }
    const double rms = std::sqrt(cost / static_cast<double>(n));
    if (!converged || !(p(2) > 0) || !std::isfinite(rms))
        throw FitFailure("Gaussian fit did not converge", rms);

    GaussianFit fit;
    fit.amplitude = p(0);
    fit.center = p(1);
    fit.sigma = p(2);
    fit.offset = p(3);
    fit.fwhm = 2.0 * std::sqrt(2.0 * std::log(2.0)) * p(2);
    fit.residual = rms;
    fit.iterations = it + 1;
    return fit;
}

double fit_gaussian_fwhm(std::span<const double> intensity, std::span<const double> time_ps) {
    return fit_gaussian(intensity, time_ps).fwhm;
}

PulseShape average_pulse(const FieldTrace& trace, double clock_GHz) {
    const double period = period_ps_of(clock_GHz);
    if (trace.samples() == 0) throw InsufficientData("empty trace");
    const auto bins = std::max<Eigen::Index>(
        8, static_cast<Eigen::Index>(std::round(period / trace.sample_interval_ps)));
    const ArrayXd folded = fold(trace.time_ps, trace.total_photons(), period, bins);
    Eigen::Index lo = 0;
    folded.minCoeff(&lo);
    // Rotate so the window starts at the minimum and the pulse sits inside.
    PulseShape shape;
    shape.photons.resize(bins);
    shape.time_ps.resize(bins);
    const double dt = period / static_cast<double>(bins);
    for (Eigen::Index i = 0; i < bins; ++i) {
        shape.photons(i) = folded((lo + i) % bins);
        shape.time_ps(i) = (static_cast<double>(i) + 0.5) * dt;
    }
    return shape;
}

DbRatio mode_suppression_ratio(const FieldTrace& trace) {
    if (trace.samples() == 0) throw InsufficientData("empty trace");
    const double main = trace.injected_photons().mean();
    if (trace.side_mode_photons.cols() == 0) return {to_db(std::max(main, 1e-300) / 1e-300), true};
    const double side = trace.side_mode_photons.colwise().mean().maxCoeff();
    if (!(side > 0)) return {to_db(std::max(main, 1e-300) / 1e-300), true};
    return {to_db(main / side), false};
}

std::vector<std::optional<double>> pulse_phases(const FieldTrace& trace, double clock_GHz,
                                                double threshold_fraction) {
    const double period = period_ps_of(clock_GHz);
    const auto windows = pulse_windows(trace, period);
    std::vector<cdouble> weighted;
    std::vector<double> energy;
    weighted.reserve(windows.size());
    energy.reserve(windows.size());
    for (const auto& w : windows) {
        const auto seg = trace.injected_field.segment(w.begin, w.end - w.begin);
        weighted.push_back((seg.abs() * seg).sum());
        energy.push_back(seg.abs2().sum());
    }
    std::vector<std::optional<double>> phases(windows.size());
    if (windows.empty()) return phases;
    std::vector<double> sorted = energy;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (std::size_t k = 0; k < windows.size(); ++k) {
        if (energy[k] > threshold_fraction * median && energy[k] > 0)
            phases[k] = std::arg(weighted[k]);
    }
    return phases;
}

double interference_visibility(std::span<const double> phases) {
    if (phases.size() < 2) throw InsufficientData("visibility needs at least two phases");
    cdouble sum = 0.0;
    for (std::size_t k = 0; k + 1 < phases.size(); ++k)
        sum += std::polar(1.0, phases[k] - phases[k + 1]);
    return std::abs(sum) / static_cast<double>(phases.size() - 1);
}

double coherent_fraction(const FieldTrace& trace) {
    const double main = trace.injected_photons().sum();
    const double total = main + trace.side_mode_photons.sum();
    return total > 0 ? main / total : 0.0;
}

double pulse_visibility(const FieldTrace& trace, double clock_GHz) {
    const auto phases = pulse_phases(trace, clock_GHz);
    // Missing pulses break adjacency; score each run of consecutive pulses.
    cdouble sum = 0.0;
    long pairs = 0;
    for (std::size_t k = 0; k + 1 < phases.size(); ++k) {
        if (!phases[k] || !phases[k + 1]) continue;
        sum += std::polar(1.0, *phases[k] - *phases[k + 1]);
        ++pairs;
    }
    if (pairs == 0) throw InsufficientData("no adjacent pulse pairs in trace");
    return std::abs(sum) / static_cast<double>(pairs) * coherent_fraction(trace);
}

double circular_mean(std::span<const double> phases) {
    if (phases.empty()) throw InsufficientData("no phases");
    cdouble sum = 0.0;
    for (double p : phases) sum += std::polar(1.0, p);
    return std::arg(sum);
}

double circular_std(std::span<const double> phases) {
    if (phases.empty()) throw InsufficientData("no phases");
    cdouble sum = 0.0;
    for (double p : phases) sum += std::polar(1.0, p);
    const double r = std::min(1.0, std::abs(sum) / static_cast<double>(phases.size()));
    if (r <= 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(-2.0 * std::log(r));
}

std::vector<double> present(const std::vector<std::optional<double>>& phases) {
    std::vector<double> out;
    out.reserve(phases.size());
    for (const auto& p : phases)
        if (p) out.push_back(*p);
    return out;
}

OpticalSpectrum optical_spectrum(const FieldTrace& trace, double resolution_GHz) {
    const Eigen::Index n = trace.samples();
    if (n < 16) throw InsufficientData("trace too short for a spectrum");
    if (trace.side_mode_photons.rows() != n || trace.carrier_density.size() != n)
        throw InvalidArgument("malformed trace");
    const double dt = trace.sample_interval_ps * ps;

    Eigen::Index len = n;
    if (resolution_GHz > 0)
        len = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::round(1.0 / (resolution_GHz * GHz * dt))));
    len = std::max<Eigen::Index>(len, 16);
    const Eigen::Index hop = std::max<Eigen::Index>(1, len / 2);

    ArrayXd window(len);
    for (Eigen::Index i = 0; i < len; ++i)
        window(i) = 0.5 - 0.5 * std::cos(2.0 * constants::pi * static_cast<double>(i) / static_cast<double>(len));
    if (len == n && resolution_GHz <= 0) window.setOnes();
    const double wnorm = window.square().sum();

    Eigen::FFT<double> fft;
    std::vector<cdouble> in(static_cast<std::size_t>(len)), out;
    ArrayXd acc = ArrayXd::Zero(len);
    long segments = 0;
    for (Eigen::Index start = 0; start + len <= n; start += hop) {
        for (Eigen::Index i = 0; i < len; ++i)
            in[static_cast<std::size_t>(i)] = window(i) * trace.injected_field(start + i);
        fft.fwd(out, in);
        for (Eigen::Index i = 0; i < len; ++i) acc(i) += std::norm(out[static_cast<std::size_t>(i)]);
        ++segments;
    }
    // Parseval: sum_k |X_k|^2 = len sum_i |x_i|^2, so this sums to the mean photon number
    acc /= static_cast<double>(segments) * wnorm * static_cast<double>(len);

    // Reorder to ascending optical frequency. With fields written as
    // E e^{-i w t}, FFT bin k maps to an offset of -k / (len dt).
    OpticalSpectrum spec;
    spec.frequency_offset_GHz.resize(len);
    spec.power.resize(len);
    spec.wavelength_nm.resize(len);
    const double df = 1.0 / (static_cast<double>(len) * dt);
    const double nu0 = constants::speed_of_light / (trace.injected_wavelength_nm * nm);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(static_cast<std::size_t>(len));
    for (Eigen::Index k = 0; k < len; ++k) {
        const Eigen::Index signed_k = k <= len / 2 ? k : k - len;
        pts.emplace_back(-static_cast<double>(signed_k) * df, acc(k));
    }
    std::sort(pts.begin(), pts.end());
    for (Eigen::Index k = 0; k < len; ++k) {
        const auto& [f, p] = pts[static_cast<std::size_t>(k)];
        spec.frequency_offset_GHz(k) = f / GHz;
        spec.power(k) = p;
        spec.wavelength_nm(k) = constants::speed_of_light / (nu0 + f) / nm;
    }
    const ArrayXd side_mean = trace.side_mode_photons.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < side_mean.size(); ++j)
        spec.side_modes.push_back({trace.side_mode_wavelength_nm(j), side_mean(j)});
    return spec;
}

double spectral_fwhm_GHz(const OpticalSpectrum& spectrum, SpectralWidth method) {
    const ArrayXd& p = spectrum.power;
    const ArrayXd& f = spectrum.frequency_offset_GHz;
    const Eigen::Index n = p.size();
    if (n < 3) throw InsufficientData("spectrum too short");
    Eigen::Index peak = 0;
    const double top = p.maxCoeff(&peak);
    if (!(top > 0)) throw InsufficientData("spectrum is empty");

    if (method != SpectralWidth::half_maximum) {
        std::vector<double> fx, py;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(f(i) - f(peak)) > spectral_width_span_GHz) continue;
            fx.push_back(f(i));
            py.push_back(p(i));
        }
        if (fx.size() < 5) throw InsufficientData("too few spectral bins");
        if (method == SpectralWidth::gaussian_fit) return fit_gaussian(py, fx).fwhm;
        double w = 0, m1 = 0, m2 = 0;
        for (std::size_t i = 0; i < fx.size(); ++i) {
            w += py[i];
            m1 += py[i] * fx[i];
        }
        m1 /= w;
        for (std::size_t i = 0; i < fx.size(); ++i) m2 += py[i] * (fx[i] - m1) * (fx[i] - m1);
        return 2.0 * std::sqrt(2.0 * std::log(2.0)) * std::sqrt(m2 / w);
    }

    const double half = 0.5 * top;

    Eigen::Index lo = peak;
    while (lo > 0 && p(lo) > half) --lo;
    Eigen::Index hi = peak;
    while (hi < n - 1 && p(hi) > half) ++hi;

    auto cross = [&](Eigen::Index a, Eigen::Index b) {
        // a is below half, b above (or equal)
        const double pa = p(a), pb = p(b);
        if (pb == pa) return f(a);
        return f(a) + (half - pa) / (pb - pa) * (f(b) - f(a));
    };
    const double left = p(lo) <= half && lo < peak ? cross(lo, lo + 1) : f(lo);
    const double right = p(hi) <= half && hi > peak ? cross(hi, hi - 1) : f(hi);
    return right - left;
}

}  // namespace wtqkd
