#include "vacdaq/gauge.hpp"

#include "vacdaq/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

namespace vacdaq::gauge {

namespace {

struct DelayAnchor {
    double log_p;
    double log_t;
};

const std::array<DelayAnchor, 3>& delay_anchors() {
    static const std::array<DelayAnchor, 3> anchors{{
        {std::log10(1e-5), std::log10(1.0)},
        {std::log10(1e-7), std::log10(20.0)},
        {std::log10(5e-9), std::log10(120.0)},
    }};
    return anchors;
}

} // namespace

GaugeConstants constants_for(PressureUnit unit) {
    switch (unit) {
    case PressureUnit::mbar: return {unit, 6.8, 11.33};
    case PressureUnit::microbar: return {unit, 5.0, 8.333};
    case PressureUnit::torr: return {unit, 6.875, 11.46};
    case PressureUnit::mtorr: return {unit, 5.075, 8.458};
    case PressureUnit::micron: return {unit, 5.075, 8.458};
    case PressureUnit::pascal: return {unit, 5.6, 9.333};
    case PressureUnit::kpa: return {unit, 7.4, 12.33};
    default: break;
    }
    throw ConfigError("no gauge constants for unit '" + std::string(vacphys::unit_name(unit)) + "'");
}

double signal_from_pressure(double p, const GaugeConstants& k) {
    if (!(p > 0.0) || std::isnan(p))
        throw DomainError("gauge pressure must be positive");
    const double u = k.c + 0.6 * std::log10(p);
    return std::clamp(u, kSignalMin, kSignalMax);
}

double pressure_from_signal(double volts, const GaugeConstants& k) {
    if (!(volts >= kSignalMin && volts <= kSignalMax))
        throw RangeError("measuring signal " + std::to_string(volts) + " V outside 0-10 V");
    return extrapolated_pressure(volts, k);
}

double extrapolated_pressure(double volts, const GaugeConstants& k) { return std::pow(10.0, 1.667 * volts - k.d); }

double ignition_delay(double p_mbar) {
    if (!(p_mbar > 0.0 && p_mbar <= kColdCathodeOnset))
        throw StateError("ignition delay is only defined below the cold-cathode onset");
    const auto& a = delay_anchors();
    const double lp = std::log10(p_mbar);
    if (lp >= a.front().log_p)
        return 1.0;
    if (lp <= a.back().log_p)
        return 120.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        if (lp <= a[i].log_p && lp >= a[i + 1].log_p) {
            const double f = (lp - a[i].log_p) / (a[i + 1].log_p - a[i].log_p);
            return std::pow(10.0, a[i].log_t + f * (a[i + 1].log_t - a[i].log_t));
        }
    }
    return 120.0;
}

std::string_view status_name(GaugeStatus status) noexcept {
    switch (status) {
    case GaugeStatus::ok: return "ok";
    case GaugeStatus::pirani_underrange: return "pirani_underrange";
    case GaugeStatus::overrange: return "overrange";
    case GaugeStatus::not_ignited: return "not_ignited";
    case GaugeStatus::disabled: return "disabled";
    }
    return "?";
}

std::string_view ignition_name(IgnitionState state) noexcept {
    switch (state) {
    case IgnitionState::pirani_only: return "pirani_only";
    case IgnitionState::cc_waiting: return "cc_waiting";
    case IgnitionState::cc_ignited: return "cc_ignited";
    }
    return "?";
}

GaugeChannel::GaugeChannel(GaugeConstants constants, PressureSource source, ChannelOptions options)
    : constants_(constants), source_(std::move(source)), options_(std::move(options)),
      rng_(options_.noise ? options_.noise->seed : 0) {
    if (!source_)
        throw ConfigError("gauge channel needs a pressure source");
    if (options_.preignited && options_.cold_cathode) {
        const double p = source_(0.0);
        if (p < kColdCathodeOnset)
            state_ = IgnitionState::cc_ignited;
    }
}

void GaugeChannel::set_enabled(bool enabled) {
    if (options_.enabled && !enabled) {
        state_ = IgnitionState::pirani_only;
        timer_ = 0.0;
    }
    options_.enabled = enabled;
}

double GaugeChannel::sample_pressure() {
    double p = source_(time_);
    if (options_.noise) {
        std::uniform_real_distribution<double> dist(1.0 - options_.noise->amplitude,
                                                    1.0 + options_.noise->amplitude);
        p *= dist(rng_);
    }
    return p;
}

double GaugeChannel::volts_for(double p_mbar) const {
    const double p = vacphys::convert_pressure(p_mbar, PressureUnit::mbar, constants_.unit);
    return signal_from_pressure(p, constants_);
}

GaugeReading GaugeChannel::step(double dt) {
    if (!(dt > 0.0))
        throw DomainError("gauge step needs dt > 0");
    time_ += dt;
    GaugeReading reading;
    if (!options_.enabled) {
        reading.status = GaugeStatus::disabled;
        reading.voltage = 0.0;
        return reading;
    }

    const double p = sample_pressure();
    reading.true_pressure_mbar = p;
    reading.pirani_underrange = p < kPiraniUnderrange;

    if (p > kRangeMax) {
        state_ = IgnitionState::pirani_only;
        timer_ = 0.0;
        reading.voltage = kSignalMax;
        reading.status = GaugeStatus::overrange;
        return reading;
    }

    const double pirani_volts = volts_for(std::max(p, kPiraniUnderrange));
    if (p >= kColdCathodeOnset || !options_.cold_cathode) {
        state_ = IgnitionState::pirani_only;
        timer_ = 0.0;
        reading.voltage = pirani_volts;
        reading.status = reading.pirani_underrange ? GaugeStatus::pirani_underrange : GaugeStatus::ok;
        return reading;
    }

    switch (state_) {
    case IgnitionState::pirani_only:
        state_ = IgnitionState::cc_waiting;
        timer_ = 0.0;
        break;
    case IgnitionState::cc_waiting:
        timer_ += dt;
        break;
    case IgnitionState::cc_ignited:
        break;
    }
    if (state_ == IgnitionState::cc_waiting && timer_ >= ignition_delay(p))
        state_ = IgnitionState::cc_ignited;

    if (state_ == IgnitionState::cc_ignited) {
        reading.voltage = volts_for(std::max(p, kRangeMin));
        reading.status = GaugeStatus::ok;
    } else {
        reading.voltage = pirani_volts;
        reading.status = GaugeStatus::not_ignited;
    }
    return reading;
}

} // namespace vacdaq::gauge
