#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace vacdaq::vacphys {

inline constexpr double kBoltzmann = 1.380649e-23; // J/K

enum class PressureUnit { pascal, torr, atm, bar, psi, mbar, microbar, mtorr, micron, kpa };

std::string_view unit_name(PressureUnit unit) noexcept;

/// Accepts the canonical names plus a few common spellings ("pa", "ubar",
/// "millitorr", ...). Case-insensitive. Throws ConfigError otherwise.
PressureUnit parse_unit(std::string_view text);

/// Converts between pressure units using the five-unit conversion table
/// (Pa, Torr, atm, bar, psi). Decimal-prefixed units scale exactly onto
/// their base unit before the table lookup, so e.g. mbar -> Pa is exactly
/// 100 while Torr -> atm inherits the table's three-digit rounding.
double convert_pressure(double value, PressureUnit from, PressureUnit to);

// Ideal gas: p = n k T
double ideal_gas_pressure(double number_density, double temperature);
double number_density(double pressure_pa, double temperature);

struct GasParams {
    double temperature;       // K
    double molecule_mass;     // kg
    double molecule_diameter; // m
    double number_density;    // 1/m^3

    /// Air/N2 at 300 K. The molecular diameter is chosen so that
    /// lambda * p = 6.7 mm Pa exactly.
    static GasParams air();
};

/// lambda = k T / (sqrt(2) pi d^2 p), in metres.
double mean_free_path(double pressure_pa, const GasParams& gas);

enum class FlowRegime { viscous, transition, molecular };

std::string_view regime_name(FlowRegime regime) noexcept;

struct KnudsenResult {
    double value;
    FlowRegime regime; // Kn < 0.01 viscous, Kn > 1 molecular
};

KnudsenResult knudsen_number(double mean_free_path_m, double characteristic_length_m);

struct KineticSpeeds {
    double most_probable;            // m/s, sqrt(2kT/m)
    double mean;                     // m/s, (2/sqrt(pi)) * most_probable
    double surface_flux_per_density; // m/s, mean/4; multiply by n for the wall flux
};

KineticSpeeds kinetic_speeds(const GasParams& gas);

enum class ConductanceRegime { viscous, molecular, aperture };

struct PipeSpec {
    ConductanceRegime regime = ConductanceRegime::molecular;
    double diameter_cm = 0.0;
    std::optional<double> length_cm;          // pipe regimes
    std::optional<double> mean_pressure_torr; // viscous only
    std::optional<double> area_cm2;           // aperture only
};

/// Long-pipe and aperture conductance for air at room temperature, L/s.
///   viscous:   180 D^4 / L * P
///   molecular: 12 D^3 / L
///   aperture:  (v_mean / 4) * A
double pipe_conductance(const PipeSpec& spec);

enum class CombineMode { series, parallel };

double combine_conductance(std::span<const double> values, CombineMode mode);

struct PumpdownParams {
    double initial_pressure;     // p1
    double pump_inlet_pressure;  // p2
    double conductance_lps;      // C
    double volume_l;             // V
    double exponent_factor = 1.0;

    double time_constant() const { return exponent_factor * volume_l / conductance_lps; }
    void validate() const;
};

/// p(t) = p2 + (p1 - p2) exp(-t / tau), tau = exponent_factor * V / C.
double pumpdown_pressure(const PumpdownParams& params, double t_seconds);

} // namespace vacdaq::vacphys
