#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "wtqkd/errors.hpp"
#include "wtqkd/receiver.hpp"

using namespace wtqkd;

TEST_CASE("channel transmittance") {
    CHECK(channel_transmittance(0.0) == 1.0);
    CHECK(channel_transmittance(11.5) == doctest::Approx(0.0708).epsilon(1e-3));
    CHECK(channel_transmittance(30.0) == 0.001);
    CHECK(channel_transmittance(10.0) == 0.1);
    CHECK_THROWS_AS(channel_transmittance(-1.0), InvalidArgument);
}

TEST_CASE("AMZI output probabilities") {
    auto p = amzi_output_probs(0.0, 1.0);
    CHECK(p.d2 == 1.0);
    CHECK(p.d3 == 0.0);
    p = amzi_output_probs(constants::pi, 1.0);
    CHECK(p.d2 == doctest::Approx(0.0));
    CHECK(p.d3 == doctest::Approx(1.0));
    for (double phi : {0.0, 0.7, 2.0, constants::pi}) {
        p = amzi_output_probs(phi, 0.0);
        CHECK(p.d2 == 0.5);
        CHECK(p.d3 == 0.5);
    }
    CHECK_THROWS_AS(amzi_output_probs(0.0, 1.5), InvalidArgument);
}

TEST_CASE("click probability") {
    CHECK(click_probability(0.0, 0.33, 0.0) == 0.0);
    CHECK(click_probability(1e6, 0.33, 0.0) == 1.0);
    const double mean = 0.4 * 0.0708;
    CHECK(click_probability(mean, 0.33, 0.0) == doctest::Approx(0.009302).epsilon(1e-4));
    CHECK(click_probability(mean, 0.33, 0.0) == doctest::Approx(1 - std::exp(-0.33 * mean)));
    CHECK(click_probability(0.0, 0.33, 0.25) == 0.25);
    CHECK_THROWS_AS(click_probability(-1.0, 0.5, 0.0), InvalidArgument);
}

TEST_CASE("path transmittance is the product of its factors") {
    ReceiverParams rx;
    const ChannelParams ch{11.5};
    const PathTransmittance t = path_transmittance(ch, rx);
    const double channel = std::pow(10.0, -1.15);
    const double rx_loss = std::pow(10.0, -0.1);
    const double amzi = std::pow(10.0, -0.2);
    CHECK(t.direct == doctest::Approx(channel * rx_loss * 0.5 * 0.33).epsilon(1e-14));
    CHECK(t.interferometer == doctest::Approx(channel * rx_loss * 0.5 * amzi * 0.5 * 0.33).epsilon(1e-14));
}

TEST_CASE("analytic detection limits") {
    ProtocolConfig cfg;
    ReceiverParams rx;
    rx.dark_count_rate_Hz = 0.0;
    rx.amzi_visibility = 1.0;

    SUBCASE("ideal device has no errors") {
        const auto d = detect_analytic(cfg, ChannelParams{10.0}, rx, LinkExtras{});
        for (IntensityClass c : {IntensityClass::signal, IntensityClass::decoy}) {
            CHECK(d.at(c, Basis::Z).qber == 0.0);
            CHECK(d.at(c, Basis::X).qber == doctest::Approx(0.0).epsilon(1e-15));
            CHECK(d.at(c, Basis::Z).gain > 0.0);
        }
    }
    SUBCASE("visibility sets the X error floor") {
        rx.dead_time_ns = 0.0;
        const auto d = detect_analytic(cfg, ChannelParams{20.0}, rx, LinkExtras{30.0, 0.98});
        // clicks saturate as 1 - exp(-mean), so the error ratio is not the
        // linear (1 - V) / 2 exactly
        const auto t = path_transmittance(ChannelParams{20.0}, rx);
        const double mu = cfg.signal_intensity;
        const double slot = mu * t.interferometer;
        const double xe = -std::expm1(-slot * 0.01), xc = -std::expm1(-slot * 0.99);
        CHECK(d.at(IntensityClass::signal, Basis::X).qber == doctest::Approx(xe / (xe + xc)).epsilon(1e-12));
        CHECK(d.at(IntensityClass::signal, Basis::X).qber == doctest::Approx(0.01).epsilon(1e-3));
        const double l = std::pow(10.0, -3.0);
        const double f = l / (1 + l);
        const double ze = -std::expm1(-mu * t.direct * f), zc = -std::expm1(-mu * t.direct * (1 - f));
        CHECK(d.at(IntensityClass::signal, Basis::Z).qber == doctest::Approx(ze / (ze + zc)).epsilon(1e-12));
    }
    SUBCASE("dark counts dominate at extreme loss") {
        rx.dark_count_rate_Hz = 100.0;
        const auto d = detect_analytic(cfg, ChannelParams{250.0}, rx, LinkExtras{});
        CHECK(d.at(IntensityClass::signal, Basis::Z).qber == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(d.at(IntensityClass::signal, Basis::X).qber == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("dead time lowers gains and flags saturation") {
        ReceiverParams live = rx;
        live.dead_time_ns = 0.0;
        ReceiverParams dead = rx;
        dead.dead_time_ns = 50.0;
        const auto a = detect_analytic(cfg, ChannelParams{0.0}, live);
        const auto b = detect_analytic(cfg, ChannelParams{0.0}, dead);
        CHECK(b.at(IntensityClass::signal, Basis::Z).gain < a.at(IntensityClass::signal, Basis::Z).gain);
        CHECK(b.saturated);
        CHECK(a.dead_time_survival[0] == 1.0);
        const auto far = detect_analytic(cfg, ChannelParams{30.0}, dead);
        CHECK_FALSE(far.saturated);
    }
}

TEST_CASE("Monte Carlo detection") {
    ProtocolConfig cfg;
    ReceiverParams rx;
    CounterRng rng(1);
    const auto symbols = generate_symbols(rng, cfg, 20000);

    SUBCASE("nothing arrives through 300 dB without dark counts") {
        rx.dark_count_rate_Hz = 0.0;
        CHECK(detect_monte_carlo(symbols, cfg, ChannelParams{300.0}, rx, 9).empty());
    }
    SUBCASE("dead time removes records") {
        ReceiverParams live = rx;
        live.dead_time_ns = 0.0;
        ReceiverParams dead = rx;
        dead.dead_time_ns = 50.0;
        const auto a = detect_monte_carlo(symbols, cfg, ChannelParams{0.0}, live, 9);
        const auto b = detect_monte_carlo(symbols, cfg, ChannelParams{0.0}, dead, 9);
        CHECK(b.size() < a.size());
        // no two records on one detector closer than the dead time
        std::array<double, 3> last{-1e18, -1e18, -1e18};
        for (const auto& r : b) {
            const double t = r.symbol_index + (r.bin == TimeBin::early ? 0.0 : 0.5);
            const auto d = static_cast<std::size_t>(r.detector);
            CHECK(t - last[d] >= 50.0);
            last[d] = t;
        }
    }
    SUBCASE("deterministic per seed") {
        const auto a = detect_monte_carlo(symbols, cfg, ChannelParams{5.0}, rx, 4);
        const auto b = detect_monte_carlo(symbols, cfg, ChannelParams{5.0}, rx, 4);
        CHECK(a == b);
        const auto c = detect_monte_carlo(symbols, cfg, ChannelParams{5.0}, rx, 5);
        CHECK_FALSE(a == c);
    }
    SUBCASE("records respect the detector and bin pairing") {
        for (const auto& r : detect_monte_carlo(symbols, cfg, ChannelParams{3.0}, rx, 2)) {
            if (r.detector == Detector::D1)
                CHECK(r.bin != TimeBin::interference);
            else
                CHECK(r.bin == TimeBin::interference);
        }
    }
}

TEST_CASE("wavelength-adjusted receiver") {
    ReceiverParams rx;
    CHECK(wavelength_adjusted_receiver(rx, 1550.0).detector_efficiency == 0.33);
    const double lo = wavelength_adjusted_receiver(rx, 1515.0).detector_efficiency;
    const double hi = wavelength_adjusted_receiver(rx, 1585.0).detector_efficiency;
    CHECK(lo < 0.33);
    CHECK(lo >= 0.85 * 0.33);
    CHECK(lo == doctest::Approx(0.9 * 0.33));
    CHECK(lo == hi);
    const auto adjusted = wavelength_adjusted_receiver(rx, 1530.0);
    CHECK(adjusted.dark_count_rate_Hz == rx.dark_count_rate_Hz);
    CHECK(adjusted.amzi_visibility == rx.amzi_visibility);
    CHECK_THROWS_AS(wavelength_adjusted_receiver(rx, 1650.0), InvalidArgument);
}

TEST_CASE("receiver validation") {
    ReceiverParams rx;
    CHECK_NOTHROW(rx.validate());
    rx.bs_z_fraction = 1.2;
    CHECK_THROWS_AS(rx.validate(), InvalidArgument);
    rx = {};
    rx.amzi_insertion_loss_dB = -1;
    CHECK_THROWS_AS(rx.validate(), InvalidArgument);
    CHECK_THROWS_AS(ChannelParams{-3.0}.validate(), InvalidArgument);
}

TEST_CASE("record CSV round trip") {
    std::vector<DetectionRecord> recs{{0, Detector::D1, TimeBin::early, false},
                                      {7, Detector::D3, TimeBin::interference, true},
                                      {9, Detector::D1, TimeBin::late, false}};
    const auto path = (std::filesystem::temp_directory_path() / "wtqkd_records.csv").string();
    write_records_csv(recs, path);
    CHECK(read_records_csv(path) == recs);
    std::remove(path.c_str());
}
