#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "wtqkd/errors.hpp"
#include "wtqkd/format.hpp"
#include "wtqkd/harness.hpp"

using namespace wtqkd;

namespace {

std::string schema_key(const std::string& text) {
    try {
        config_from_json_text(text);
    } catch (const SchemaError& e) {
        return e.key_path();
    }
    return "<accepted>";
}

ExperimentConfig fast_config() {
    ExperimentConfig c;
    c.bridge.pulses = 16;
    c.bridge.warmup_ps = 2000.0;
    return c;
}

}  // namespace

TEST_CASE("shipped preset loads and matches the built-in defaults") {
    const ExperimentConfig c = load_config(std::string(WTQKD_SOURCE_DIR) + "/presets/default.json");
    CHECK(config_to_json_text(c) == config_to_json_text(ExperimentConfig{}));
    CHECK(c.protocol.signal_intensity == 0.4);
    CHECK(c.receiver.detector_efficiency == 0.33);
    CHECK(c.attenuation_grid_dB.size() == 20);
}

TEST_CASE("config JSON round trip") {
    ExperimentConfig c;
    c.seed = 99;
    c.fidelity = Fidelity::monte_carlo;
    c.optimization_metric = OptimizationMetric::skr;
    c.protocol.decoy_intensity = 0.12;
    c.receiver.dead_time_ns = 0.0;
    c.drive.pattern = {true, false, true};
    c.injection_grid_uW = {0, 5, 50};
    const std::string text = config_to_json_text(c);
    const ExperimentConfig back = config_from_json_text(text);
    CHECK(config_to_json_text(back) == text);
    CHECK(back.seed == 99);
    CHECK(back.fidelity == Fidelity::monte_carlo);
    CHECK(back.drive.pattern == std::vector<bool>{true, false, true});

    // omitted keys keep their defaults
    CHECK(config_to_json_text(config_from_json_text("{}")) == config_to_json_text(ExperimentConfig{}));
}

TEST_CASE("schema errors name the offending key") {
    CHECK(schema_key(R"({"protocol": {"decoy_intensity": 0.5}})") == "protocol");
    try {
        config_from_json_text(R"({"protocol": {"decoy_intensity": 0.4}})");
        FAIL("nu >= mu accepted");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("nu < mu") != std::string::npos);
    }
    CHECK(schema_key(R"({"receiver": {"bogus": 1}})") == "receiver.bogus");
    CHECK(schema_key(R"({"laser": {"mode_count": "many"}})") == "laser.mode_count");
    CHECK(schema_key(R"({"sweeps": {"attenuation_grid_dB": [0, 5, 2]}})") == "sweeps.attenuation_grid_dB");
    CHECK(schema_key(R"({"fidelity": "exact"})") == "fidelity");
    CHECK(schema_key(R"({"seed": -1})") == "seed");
    CHECK(schema_key(R"({"keyrate": {"ec_efficiency": 0.9}})") == "keyrate.ec_efficiency");
    CHECK(schema_key(R"([1, 2])") == "<root>");
    CHECK_THROWS_AS(config_from_json_text("{not json"), SchemaError);
}

TEST_CASE("sweep CSV round trip") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SweepTable t{"attenuation_dB", {}};
    for (int i = 0; i < 50; ++i) {
        SweepRow r;
        r.x = i * 1.5;
        r.er_db = 30 * u(gen);
        r.visibility = std::abs(u(gen));
        r.e_z = 1e-3 * std::abs(u(gen));
        r.e_x = 0.1 / 3.0;
        r.total_qber = std::pow(10.0, -7 * std::abs(u(gen)));
        r.Q_mu = 1e-9 * std::abs(u(gen));
        r.skr_bits_per_s = 1e7 * std::abs(u(gen));
        r.injection_uW = 80;
        r.locked = i % 3 != 0;
        r.saturated = i % 5 == 0;
        t.rows.push_back(r);
    }
    const auto path = std::filesystem::temp_directory_path() / "wtqkd_sweep_test.csv";
    emit_csv(t, path.string());
    const SweepTable back = load_csv(path.string());
    std::filesystem::remove(path);
    REQUIRE(back.rows.size() == t.rows.size());
    CHECK(back.variable == "attenuation_dB");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const SweepRow& a = t.rows[i];
        const SweepRow& b = back.rows[i];
        for (auto [x, y] : {std::pair{a.er_db, b.er_db}, {a.visibility, b.visibility}, {a.total_qber, b.total_qber},
                            {a.Q_mu, b.Q_mu}, {a.skr_bits_per_s, b.skr_bits_per_s}})
            CHECK(std::abs(x - y) <= 1e-12 * std::abs(x));
    }
    CHECK(back == t);  // shortest round-trip output is in fact exact
    CHECK(sweep_to_csv(t).rfind("attenuation_dB,er_db,visibility,e_z,e_x,total_qber,Q_mu,skr_bits_per_s,"
                                "injection_uW,locked,saturated\n",
                                0) == 0);
    CHECK_THROWS_AS(sweep_from_csv("x,y\n1,2\n"), MalformedRecord);
    CHECK_THROWS_AS(sweep_from_csv(std::string("x,") +
                                   "er_db,visibility,e_z,e_x,total_qber,Q_mu,skr_bits_per_s,injection_uW,locked,saturated\n"
                                   "1,2,3\n"),
                    MalformedRecord);
}

TEST_CASE("ITU grid") {
    CHECK(itu_channel_wavelength_nm(0) == doctest::Approx(1552.524).epsilon(1e-6));
    CHECK(nearest_itu_channel_nm(1550.0) == doctest::Approx(1550.12).epsilon(1e-5));
    CHECK(nearest_itu_channel_nm(1550.12) == doctest::Approx(1550.116).epsilon(1e-6));
    const auto grid = default_wavelength_grid();
    REQUIRE(grid.size() == 16);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::abs(grid[i] - (1515.0 + 5.0 * static_cast<double>(i))) < 0.21);
        if (i) CHECK(grid[i] > grid[i - 1]);
    }
}

TEST_CASE("point seeds are distinct and reproducible") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(point_seed(1, i));
    CHECK(seen.size() == 1000);
    CHECK(point_seed(1, 7) == point_seed(1, 7));
    CHECK(point_seed(1, 7) != point_seed(2, 7));
}

TEST_CASE("sifted-weighted QBER") {
    const ProtocolConfig p;
    const ReceiverParams rx;
    CHECK(sifted_weighted_qber(p, rx, 0.02, 0.02) == doctest::Approx(0.02));
    // Z carries 0.9375 * 0.5 of the weight, X 0.0625 * 0.5
    CHECK(sifted_weighted_qber(p, rx, 0.0, 0.1) == doctest::Approx(0.1 * 0.0625).epsilon(1e-12));
}

TEST_CASE("injection optimization") {
    ExperimentConfig c = fast_config();
    SUBCASE("single-point grid returns that point") {
        c.injection_grid_uW = {80};
        CHECK(optimize_injection(c, 1550.12) == 80.0);
    }
    SUBCASE("grid must span a decade") {
        c.injection_grid_uW = {20, 40, 80};
        CHECK_THROWS_AS(optimize_injection(c, 1550.12), InvalidArgument);
    }
    SUBCASE("no locking point") {
        c.injection_grid_uW = {0};
        CHECK_THROWS_AS(optimize_injection(c, 1550.12), NoLockError);
    }
}

TEST_CASE("wavelength sweep reports unlocked points") {
    ExperimentConfig c = fast_config();
    c.injection_grid_uW = {0};
    c.wavelength_grid_nm = {1550.12};
    const SweepTable t = run_wavelength_sweep(c);
    REQUIRE(t.rows.size() == 1);
    CHECK_FALSE(t.rows[0].locked);
    CHECK(t.rows[0].total_qber == 0.5);
    CHECK(t.rows[0].skr_bits_per_s == 0.0);
}

TEST_CASE("attenuation sweep rows keep module invariants") {
    ExperimentConfig c = fast_config();
    const SweepTable t = run_attenuation_sweep(c);
    REQUIRE(t.rows.size() == c.attenuation_grid_dB.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const SweepRow& r = t.rows[i];
        CHECK(r.x == c.attenuation_grid_dB[i]);
        CHECK(r.injection_uW == c.injection.power_uW);
        CHECK(r.skr_bits_per_s >= 0);
        CHECK((r.e_z >= 0 && r.e_z <= 0.5));
        CHECK((r.e_x >= 0 && r.e_x <= 0.5));
        CHECK((r.Q_mu >= 0 && r.Q_mu <= 1));
        if (i) CHECK(r.skr_bits_per_s <= t.rows[i - 1].skr_bits_per_s);
    }
}
