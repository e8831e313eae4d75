#include "vacdaq/vacphys.hpp"

#include "vacdaq/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

namespace vacdaq::vacphys {

namespace {

enum Base { kPa, kTorr, kAtm, kBar, kPsi };

// 1 X = n Y, rows X, columns Y.
constexpr std::array<std::array<double, 5>, 5> kTable{{
    {1.0, 0.0075, 9.87e-6, 1e-5, 1.45e-4},
    {133.3, 1.0, 0.00132, 0.00133, 0.0193},
    {1.01e5, 760.0, 1.0, 1.01, 14.7},
    {1e5, 750.0, 0.987, 1.0, 14.5},
    {6895.0, 51.7, 0.068, 0.069, 1.0},
}};

struct UnitMapping {
    Base base;
    double scale; // 1 unit = scale base units
};

constexpr UnitMapping mapping(PressureUnit unit) {
    switch (unit) {
    case PressureUnit::pascal: return {kPa, 1.0};
    case PressureUnit::torr: return {kTorr, 1.0};
    case PressureUnit::atm: return {kAtm, 1.0};
    case PressureUnit::bar: return {kBar, 1.0};
    case PressureUnit::psi: return {kPsi, 1.0};
    case PressureUnit::mbar: return {kBar, 1e-3};
    case PressureUnit::microbar: return {kBar, 1e-6};
    case PressureUnit::mtorr: return {kTorr, 1e-3};
    case PressureUnit::micron: return {kTorr, 1e-3};
    case PressureUnit::kpa: return {kPa, 1e3};
    }
    return {kPa, 1.0};
}

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError(std::string(what) + " must be positive and finite");
}

// Mean speed of air at 300 K, used for aperture conductance.
double air_mean_speed() { return kinetic_speeds(GasParams::air()).mean; }

} // namespace

std::string_view unit_name(PressureUnit unit) noexcept {
    switch (unit) {
    case PressureUnit::pascal: return "pa";
    case PressureUnit::torr: return "torr";
    case PressureUnit::atm: return "atm";
    case PressureUnit::bar: return "bar";
    case PressureUnit::psi: return "psi";
    case PressureUnit::mbar: return "mbar";
    case PressureUnit::microbar: return "microbar";
    case PressureUnit::mtorr: return "mtorr";
    case PressureUnit::micron: return "micron";
    case PressureUnit::kpa: return "kpa";
    }
    return "?";
}

PressureUnit parse_unit(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "pa" || s == "pascal") return PressureUnit::pascal;
    if (s == "torr") return PressureUnit::torr;
    if (s == "atm") return PressureUnit::atm;
    if (s == "bar") return PressureUnit::bar;
    if (s == "psi") return PressureUnit::psi;
    if (s == "mbar" || s == "hpa") return PressureUnit::mbar;
    if (s == "microbar" || s == "ubar" || s == "µbar") return PressureUnit::microbar;
    if (s == "mtorr" || s == "millitorr") return PressureUnit::mtorr;
    if (s == "micron") return PressureUnit::micron;
    if (s == "kpa") return PressureUnit::kpa;
    throw ConfigError("unknown pressure unit '" + std::string(text) + "'");
}

double convert_pressure(double value, PressureUnit from, PressureUnit to) {
    if (!std::isfinite(value))
        throw DomainError("pressure value must be finite");
    if (from == to)
        return value;
    const UnitMapping f = mapping(from);
    const UnitMapping t = mapping(to);
    return value * f.scale * kTable[f.base][t.base] / t.scale;
}

double ideal_gas_pressure(double number_density, double temperature) {
    require_positive(number_density, "number density");
    require_positive(temperature, "temperature");
    return number_density * kBoltzmann * temperature;
}

double number_density(double pressure_pa, double temperature) {
    require_positive(pressure_pa, "pressure");
    require_positive(temperature, "temperature");
    return pressure_pa / (kBoltzmann * temperature);
}

GasParams GasParams::air() {
    constexpr double temperature = 300.0;
    constexpr double lambda_times_p = 6.7e-3; // m Pa
    const double diameter =
        std::sqrt(kBoltzmann * temperature / (std::numbers::sqrt2 * std::numbers::pi * lambda_times_p));
    return GasParams{
        .temperature = temperature,
        .molecule_mass = 4.65e-26,
        .molecule_diameter = diameter,
        .number_density = 1.01e5 / (kBoltzmann * temperature),
    };
}

double mean_free_path(double pressure_pa, const GasParams& gas) {
    require_positive(pressure_pa, "pressure");
    require_positive(gas.temperature, "temperature");
    require_positive(gas.molecule_diameter, "molecule diameter");
    const double d = gas.molecule_diameter;
    return kBoltzmann * gas.temperature / (std::numbers::sqrt2 * std::numbers::pi * d * d * pressure_pa);
}

std::string_view regime_name(FlowRegime regime) noexcept {
    switch (regime) {
    case FlowRegime::viscous: return "viscous";
    case FlowRegime::transition: return "transition";
    case FlowRegime::molecular: return "molecular";
    }
    return "?";
}

KnudsenResult knudsen_number(double mean_free_path_m, double characteristic_length_m) {
    require_positive(characteristic_length_m, "characteristic length");
    if (!(mean_free_path_m >= 0.0) || !std::isfinite(mean_free_path_m))
        throw DomainError("mean free path must be non-negative and finite");
    const double kn = mean_free_path_m / characteristic_length_m;
    FlowRegime regime = FlowRegime::transition;
    if (kn < 0.01)
        regime = FlowRegime::viscous;
    else if (kn > 1.0)
        regime = FlowRegime::molecular;
    return {kn, regime};
}

KineticSpeeds kinetic_speeds(const GasParams& gas) {
    require_positive(gas.temperature, "temperature");
    require_positive(gas.molecule_mass, "molecule mass");
    const double vp = std::sqrt(2.0 * kBoltzmann * gas.temperature / gas.molecule_mass);
    const double mean = 2.0 / std::sqrt(std::numbers::pi) * vp;
    return {vp, mean, mean / 4.0};
}

double pipe_conductance(const PipeSpec& spec) {
    switch (spec.regime) {
    case ConductanceRegime::viscous: {
        if (!spec.length_cm || !spec.mean_pressure_torr)
            throw ConfigError("viscous conductance needs length and mean pressure");
        require_positive(spec.diameter_cm, "diameter");
        require_positive(*spec.length_cm, "length");
        require_positive(*spec.mean_pressure_torr, "mean pressure");
        const double d = spec.diameter_cm;
        return 180.0 * d * d * d * d / *spec.length_cm * *spec.mean_pressure_torr;
    }
    case ConductanceRegime::molecular: {
        if (!spec.length_cm)
            throw ConfigError("molecular conductance needs length");
        require_positive(spec.diameter_cm, "diameter");
        require_positive(*spec.length_cm, "length");
        const double d = spec.diameter_cm;
        return 12.0 * d * d * d / *spec.length_cm;
    }
    case ConductanceRegime::aperture: {
        if (!spec.area_cm2)
            throw ConfigError("aperture conductance needs area");
        require_positive(*spec.area_cm2, "area");
        // (m/s) * cm^2 -> L/s: 1e-4 m^2/cm^2 * 1e3 L/m^3
        return air_mean_speed() / 4.0 * *spec.area_cm2 * 0.1;
    }
    }
    throw ConfigError("unknown conductance regime");
}

double combine_conductance(std::span<const double> values, CombineMode mode) {
    if (values.empty())
        throw DomainError("no conductances to combine");
    double acc = 0.0;
    for (double c : values) {
        require_positive(c, "conductance");
        acc += mode == CombineMode::series ? 1.0 / c : c;
    }
    return mode == CombineMode::series ? 1.0 / acc : acc;
}

void PumpdownParams::validate() const {
    require_positive(volume_l, "volume");
    require_positive(conductance_lps, "conductance");
    require_positive(exponent_factor, "exponent factor");
    if (!(pump_inlet_pressure >= 0.0) || !(initial_pressure >= pump_inlet_pressure) ||
        !std::isfinite(initial_pressure))
        throw DomainError("pump-down pressures must satisfy p1 >= p2 >= 0");
}

double pumpdown_pressure(const PumpdownParams& params, double t_seconds) {
    params.validate();
    if (!(t_seconds >= 0.0))
        throw DomainError("pump-down time must be non-negative");
    const double p1 = params.initial_pressure;
    const double p2 = params.pump_inlet_pressure;
    if (std::isinf(t_seconds))
        return p2;
    return p2 + (p1 - p2) * std::exp(-t_seconds / params.time_constant());
}

} // namespace vacdaq::vacphys
