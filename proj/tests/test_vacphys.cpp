#include <doctest.h>

#include "vacdaq/error.hpp"
#include "vacdaq/vacphys.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace vacdaq;
using namespace vacdaq::vacphys;

namespace {

constexpr std::array kAllUnits{PressureUnit::pascal, PressureUnit::torr,     PressureUnit::atm,
                               PressureUnit::bar,    PressureUnit::psi,      PressureUnit::mbar,
                               PressureUnit::microbar, PressureUnit::mtorr,  PressureUnit::micron,
                               PressureUnit::kpa};

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST_CASE("convert_pressure reproduces the conversion table") {
    CHECK(convert_pressure(1.0, PressureUnit::torr, PressureUnit::pascal) == doctest::Approx(133.3));
    CHECK(convert_pressure(1.0, PressureUnit::atm, PressureUnit::torr) == doctest::Approx(760.0));
    CHECK(convert_pressure(1.0, PressureUnit::mbar, PressureUnit::pascal) == doctest::Approx(100.0));
    CHECK(convert_pressure(1.0, PressureUnit::mtorr, PressureUnit::torr) == doctest::Approx(1e-3));
    for (auto u : kAllUnits)
        CHECK(convert_pressure(3.25, u, u) == 3.25);
}

TEST_CASE("convert_pressure round trips within 1% for every unit pair") {
    for (auto a : kAllUnits)
        for (auto b : kAllUnits) {
            const double there = convert_pressure(42.0, a, b);
            const double back = convert_pressure(there, b, a);
            INFO(unit_name(a), " -> ", unit_name(b));
            CHECK(rel_err(back, 42.0) < 0.01);
        }
}

TEST_CASE("convert_pressure rejects non-finite input") {
    CHECK_THROWS_AS(convert_pressure(std::nan(""), PressureUnit::torr, PressureUnit::pascal), DomainError);
    CHECK_THROWS_AS(convert_pressure(INFINITY, PressureUnit::torr, PressureUnit::pascal), DomainError);
}

TEST_CASE("parse_unit") {
    CHECK(parse_unit("Pa") == PressureUnit::pascal);
    CHECK(parse_unit("TORR") == PressureUnit::torr);
    CHECK(parse_unit("ubar") == PressureUnit::microbar);
    for (auto u : kAllUnits)
        CHECK(parse_unit(unit_name(u)) == u);
    CHECK_THROWS_AS(parse_unit("furlong"), ConfigError);
}

TEST_CASE("ideal gas relation") {
    const double n = number_density(101000.0, 300.0);
    CHECK(ideal_gas_pressure(n, 300.0) == doctest::Approx(101000.0));
    CHECK(n == doctest::Approx(2.438e25).epsilon(1e-3));
    CHECK_THROWS_AS(ideal_gas_pressure(0.0, 300.0), DomainError);
}

TEST_CASE("mean free path of air") {
    const auto air = GasParams::air();
    CHECK(rel_err(mean_free_path(1.0, air), 6.7e-3) < 0.02);
    CHECK(rel_err(mean_free_path(1e-3, air), 6.7) < 0.02);
    CHECK(rel_err(mean_free_path(1.01e5, air), 66e-9) < 0.02);
    CHECK_THROWS_AS(mean_free_path(0.0, air), DomainError);
    CHECK_THROWS_AS(mean_free_path(-1.0, air), DomainError);
}

TEST_CASE("mean free path halves exactly when pressure doubles") {
    const auto air = GasParams::air();
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> exponent(-9.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const double p = std::pow(10.0, exponent(rng));
        CHECK(mean_free_path(2.0 * p, air) == mean_free_path(p, air) / 2.0);
    }
}

TEST_CASE("knudsen number and flow regime") {
    auto kn = knudsen_number(1.0, 1.0);
    CHECK(kn.value == 1.0);
    CHECK(kn.regime == FlowRegime::transition);

    kn = knudsen_number(6.7, 0.067);
    CHECK(kn.value == doctest::Approx(100.0));
    CHECK(kn.regime == FlowRegime::molecular);

    kn = knudsen_number(66e-9, 0.1);
    CHECK(kn.value == doctest::Approx(6.6e-7));
    CHECK(kn.regime == FlowRegime::viscous);

    CHECK_THROWS_AS(knudsen_number(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(knudsen_number(1.0, -2.0), DomainError);
}

TEST_CASE("kinetic speeds") {
    auto gas = GasParams::air();
    const auto s = kinetic_speeds(gas);
    CHECK(s.mean / s.most_probable == doctest::Approx(1.128).epsilon(0.001 / 1.128));
    CHECK(s.surface_flux_per_density == doctest::Approx(s.mean / 4.0));
    // sqrt(2 * 1.380649e-23 * 300 / 4.65e-26), evaluated offline
    CHECK(s.most_probable == doctest::Approx(422.076).epsilon(1e-5));

    gas.temperature *= 4.0;
    CHECK(kinetic_speeds(gas).most_probable == doctest::Approx(2.0 * s.most_probable).epsilon(1e-12));

    gas.molecule_mass = 0.0;
    CHECK_THROWS_AS(kinetic_speeds(gas), DomainError);
}

TEST_CASE("pipe conductance worked examples") {
    PipeSpec viscous{ConductanceRegime::viscous, 2.0, 60.0, 0.1, std::nullopt};
    CHECK(pipe_conductance(viscous) == doctest::Approx(4.8));

    PipeSpec narrow{ConductanceRegime::molecular, 2.5, 60.0, std::nullopt, std::nullopt};
    // 12 * 2.5^3 / 60; the two-figure value quoted for this line is 3.1
    CHECK(pipe_conductance(narrow) == doctest::Approx(3.125));
    CHECK(std::round(pipe_conductance(narrow) * 10.0) / 10.0 == doctest::Approx(3.1));

    PipeSpec wide{ConductanceRegime::molecular, 5.0, 60.0, std::nullopt, std::nullopt};
    CHECK(pipe_conductance(wide) == doctest::Approx(25.0));

    PipeSpec hole{ConductanceRegime::aperture, 0.0, std::nullopt, std::nullopt, 1.0};
    // v_mean/4 for air at 300 K times 1 cm^2, evaluated offline
    CHECK(pipe_conductance(hole) == doctest::Approx(11.9065).epsilon(1e-4));
}

TEST_CASE("pipe conductance scaling laws") {
    PipeSpec m{ConductanceRegime::molecular, 1.5, 40.0, std::nullopt, std::nullopt};
    const double base = pipe_conductance(m);
    m.diameter_cm *= 2.0;
    CHECK(pipe_conductance(m) == 8.0 * base);
    m.length_cm = 80.0;
    CHECK(pipe_conductance(m) == 4.0 * base);

    PipeSpec v{ConductanceRegime::viscous, 1.5, 40.0, 0.25, std::nullopt};
    const double vbase = pipe_conductance(v);
    v.diameter_cm *= 2.0;
    CHECK(pipe_conductance(v) == 16.0 * vbase);
    v.mean_pressure_torr = 0.5;
    CHECK(pipe_conductance(v) == 32.0 * vbase);
    v.length_cm = 160.0;
    CHECK(pipe_conductance(v) == 8.0 * vbase);
}

TEST_CASE("pipe conductance missing fields") {
    CHECK_THROWS_AS(pipe_conductance({ConductanceRegime::viscous, 2.0, 60.0, std::nullopt, std::nullopt}),
                    ConfigError);
    CHECK_THROWS_AS(pipe_conductance({ConductanceRegime::molecular, 2.0, std::nullopt, std::nullopt, std::nullopt}),
                    ConfigError);
    CHECK_THROWS_AS(pipe_conductance({ConductanceRegime::aperture, 2.0, 60.0, std::nullopt, std::nullopt}),
                    ConfigError);
    CHECK_THROWS_AS(pipe_conductance({ConductanceRegime::molecular, 0.0, 60.0, std::nullopt, std::nullopt}),
                    DomainError);
}

TEST_CASE("combine conductance") {
    const std::vector<double> same{7.0, 7.0};
    CHECK(combine_conductance(same, CombineMode::series) == doctest::Approx(3.5));
    const std::vector<double> mixed{4.8, 25.0};
    CHECK(combine_conductance(mixed, CombineMode::parallel) == doctest::Approx(29.8));
    CHECK(combine_conductance(mixed, CombineMode::series) == doctest::Approx(4.027).epsilon(1e-3));
    CHECK_THROWS_AS(combine_conductance({}, CombineMode::series), DomainError);
    const std::vector<double> bad{1.0, 0.0};
    CHECK_THROWS_AS(combine_conductance(bad, CombineMode::parallel), DomainError);
}

TEST_CASE("series never exceeds the smallest, parallel never undercuts the largest") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> value(0.01, 500.0);
    std::uniform_int_distribution<int> size(1, 8);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> cs(static_cast<std::size_t>(size(rng)));
        for (auto& c : cs)
            c = value(rng);
        const double lo = *std::min_element(cs.begin(), cs.end());
        const double hi = *std::max_element(cs.begin(), cs.end());
        CHECK(combine_conductance(cs, CombineMode::series) <= lo * (1 + 1e-12));
        CHECK(combine_conductance(cs, CombineMode::parallel) >= hi);
    }
}

TEST_CASE("pump-down curve") {
    PumpdownParams p{1000.0, 1e-2, 4.8, 50.0};
    CHECK(pumpdown_pressure(p, 0.0) == 1000.0);
    CHECK(pumpdown_pressure(p, std::numeric_limits<double>::infinity()) == 1e-2);
    CHECK(pumpdown_pressure(p, 1e6) == doctest::Approx(1e-2));
    const double tau = 50.0 / 4.8;
    CHECK(pumpdown_pressure(p, tau) == doctest::Approx(1e-2 + (1000.0 - 1e-2) / std::exp(1.0)));

    p.exponent_factor = 2.5;
    CHECK(pumpdown_pressure(p, 2.5 * tau) == doctest::Approx(1e-2 + (1000.0 - 1e-2) / std::exp(1.0)));

    CHECK_THROWS_AS(pumpdown_pressure(p, -1.0), DomainError);
    CHECK_THROWS_AS(pumpdown_pressure({1.0, 2.0, 1.0, 1.0}, 0.0), DomainError);
    CHECK_THROWS_AS(pumpdown_pressure({10.0, 1.0, 0.0, 1.0}, 0.0), DomainError);
    CHECK_THROWS_AS(pumpdown_pressure({10.0, 1.0, 1.0, 0.0}, 0.0), DomainError);
}

TEST_CASE("pump-down is monotone and bounded") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> t(0.0, 500.0);
    const PumpdownParams p{1000.0, 1e-3, 3.1, 20.0};
    for (int i = 0; i < 2000; ++i) {
        double t1 = t(rng), t2 = t(rng);
        if (t1 > t2)
            std::swap(t1, t2);
        const double a = pumpdown_pressure(p, t1);
        const double b = pumpdown_pressure(p, t2);
        CHECK(a >= b);
        CHECK(b >= p.pump_inlet_pressure);
        CHECK(a <= p.initial_pressure);
    }
}
