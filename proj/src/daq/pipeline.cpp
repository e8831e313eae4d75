#include "vacdaq/daq/pipeline.hpp"

#include "vacdaq/error.hpp"
#include "vacdaq/gauge.hpp"

namespace vacdaq::daq {

void ChannelConfig::validate() const {
    const std::string who = "channel " + std::to_string(index);
    if (index < 1 || index > kMaxChannels)
        throw ConfigError("channel index " + std::to_string(index) + " outside 1..6");
    if (!(threshold_voltage >= 0.0 && threshold_voltage <= 10.0))
        throw RangeError(who + ": threshold " + std::to_string(threshold_voltage) + " V outside 0..10 V");
    gauge::constants_for(unit);
}

std::string_view status_name(SampleStatus status) noexcept {
    switch (status) {
    case SampleStatus::ok:
        return "ok";
    case SampleStatus::clamped:
        return "clamped";
    case SampleStatus::disconnected:
        return "disconnected";
    case SampleStatus::not_ignited:
        return "not_ignited";
    case SampleStatus::underrange:
        return "underrange";
    case SampleStatus::overrange:
        return "overrange";
    case SampleStatus::disabled:
        return "disabled";
    }
    return "?";
}

SampleStatus parse_status(std::string_view text) {
    for (auto s : {SampleStatus::ok, SampleStatus::clamped, SampleStatus::disconnected, SampleStatus::not_ignited,
                   SampleStatus::underrange, SampleStatus::overrange, SampleStatus::disabled})
        if (status_name(s) == text)
            return s;
    throw ConfigError("unknown sample status '" + std::string(text) + "'");
}

Conversion convert_count(std::uint16_t raw, PressureUnit unit, double midpoint) {
    const auto k = gauge::constants_for(unit);
    const double y = adc::count_to_volts(raw, midpoint);
    SignalRange range = SignalRange::in_range;
    if (y <= gauge::kSignalMin)
        range = SignalRange::underrange;
    else if (y > gauge::kSignalMax || raw == 0xFFFF)
        range = SignalRange::overrange;
    return {y, gauge::extrapolated_pressure(y, k), range};
}

PressureSample make_sample(Timestamp ts, const ChannelConfig& config, std::uint16_t raw, double midpoint) {
    const auto c = convert_count(raw, config.unit, midpoint);
    PressureSample s;
    s.timestamp = ts;
    s.channel = config.index;
    s.raw_count = raw;
    s.voltage = c.voltage;
    s.pressure = c.pressure;
    s.unit = config.unit;
    s.status = c.range == SignalRange::underrange  ? SampleStatus::underrange
               : c.range == SignalRange::overrange ? SampleStatus::overrange
                                                   : SampleStatus::ok;
    if (!config.enabled)
        s.status = SampleStatus::disabled;
    return s;
}

double threshold_pressure(const ChannelConfig& config) {
    return gauge::pressure_from_signal(config.threshold_voltage, gauge::constants_for(config.unit));
}

PressureSample apply_threshold(PressureSample sample, const ChannelConfig& config) {
    if (sample.status == SampleStatus::disabled || sample.voltage > config.threshold_voltage)
        return sample;
    sample.voltage = config.threshold_voltage;
    sample.pressure = threshold_pressure(config);
    sample.status = SampleStatus::clamped;
    sample.clamped = true;
    return sample;
}

DisconnectDetector::DisconnectDetector(std::size_t polls, double midpoint) : polls_(polls), midpoint_(midpoint) {
    if (polls_ < 1)
        throw ConfigError("disconnect detection needs at least one poll");
}

void DisconnectDetector::update(std::vector<PressureSample>& samples) {
    for (auto& s : samples) {
        if (s.channel < 1 || s.channel > kMaxChannels)
            continue;
        auto& run = low_run_[s.channel];
        if (s.status == SampleStatus::disabled) {
            run = 0;
            continue;
        }
        // judged on the device's value, not the clamped one
        if (adc::count_to_volts(s.raw_count, midpoint_) < kDisconnectVolts)
            ++run;
        else
            run = 0;
        if (run >= polls_)
            s.status = SampleStatus::disconnected;
    }
}

bool DisconnectDetector::disconnected(std::size_t channel) const {
    return channel >= 1 && channel <= kMaxChannels && low_run_[channel] >= polls_;
}

void DisconnectDetector::reset() { low_run_.fill(0); }

} // namespace vacdaq::daq
