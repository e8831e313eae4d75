#pragma once

#include "vacdaq/vacphys.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string_view>

namespace vacdaq::gauge {

using vacphys::PressureUnit;

// Full-range gauge characteristic U = c + 0.6 log10 p  <=>  p = 10^(1.667 U - d)
struct GaugeConstants {
    PressureUnit unit;
    double c; // V
    double d;
};

inline constexpr double kSignalMin = 0.0;  // V
inline constexpr double kSignalMax = 10.0; // V

inline constexpr double kColdCathodeOnset = 1e-2;   // mbar, CC active below
inline constexpr double kPiraniUnderrange = 5e-4;   // mbar
inline constexpr double kRangeMin = 5e-9;           // mbar
inline constexpr double kRangeMax = 1000.0;         // mbar

/// Table constants, verbatim. Throws ConfigError for atm, bar and psi.
GaugeConstants constants_for(PressureUnit unit);

/// Clamped to [0, 10] V. Throws DomainError for p <= 0.
double signal_from_pressure(double p, const GaugeConstants& k);

/// Throws RangeError when U lies outside [0, 10] V.
double pressure_from_signal(double volts, const GaugeConstants& k);
/// Same formula without the span check, for readings flagged out of range.
double extrapolated_pressure(double volts, const GaugeConstants& k);

/// Cold-cathode ignition delay in seconds for a pressure in mbar; log-log
/// interpolation through (1e-5, 1 s), (1e-7, 20 s), (5e-9, 120 s) and flat
/// outside those anchors. Throws StateError outside (0, 1e-2].
double ignition_delay(double p_mbar);

enum class IgnitionState { pirani_only, cc_waiting, cc_ignited };
enum class GaugeStatus { ok, pirani_underrange, overrange, not_ignited, disabled };

std::string_view status_name(GaugeStatus status) noexcept;
std::string_view ignition_name(IgnitionState state) noexcept;

struct GaugeReading {
    double voltage = 0.0;
    GaugeStatus status = GaugeStatus::ok;
    bool pirani_underrange = false; // what the controller display would flag
    double true_pressure_mbar = 0.0;
};

// True pressure in mbar as a function of simulated time in seconds.
using PressureSource = std::function<double(double)>;

struct NoiseOptions {
    double amplitude = 0.3; // multiplicative, uniform in [1-a, 1+a]
    std::uint64_t seed = 1;
};

struct ChannelOptions {
    bool enabled = true;
    bool cold_cathode = true;   // false: Pirani-only operation
    bool preignited = false;    // start already ignited if below the onset
    std::optional<NoiseOptions> noise;
};

class GaugeChannel {
public:
    GaugeChannel(GaugeConstants constants, PressureSource source, ChannelOptions options = {});

    /// Advances simulated time by dt and samples the gauge.
    GaugeReading step(double dt);

    void set_enabled(bool enabled);
    bool enabled() const noexcept { return options_.enabled; }

    IgnitionState ignition_state() const noexcept { return state_; }
    double ignition_timer() const noexcept { return timer_; }
    double time() const noexcept { return time_; }
    const GaugeConstants& constants() const noexcept { return constants_; }

private:
    double sample_pressure();
    double volts_for(double p_mbar) const;

    GaugeConstants constants_;
    PressureSource source_;
    ChannelOptions options_;
    IgnitionState state_ = IgnitionState::pirani_only;
    double timer_ = 0.0;
    double time_ = 0.0;
    std::mt19937_64 rng_;
};

} // namespace vacdaq::gauge
