#pragma once

#include "vacdaq/adc.hpp"
#include "vacdaq/vacphys.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vacdaq::daq {

using vacphys::PressureUnit;
using Timestamp = std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;

inline constexpr std::size_t kMaxChannels = 6;
inline constexpr double kDisconnectVolts = 0.1;
inline constexpr std::size_t kDisconnectPolls = 3;

struct ChannelConfig {
    std::size_t index = 1; // 1-based
    PressureUnit unit = PressureUnit::mbar;
    double threshold_voltage = 0.0;
    bool enabled = true;
    std::string label;

    void validate() const;
};

// not_ignited is part of the vocabulary but the analog signal alone cannot
// reveal it, so the engine never emits it.
enum class SampleStatus { ok, clamped, disconnected, not_ignited, underrange, overrange, disabled };

std::string_view status_name(SampleStatus status) noexcept;
/// Throws ConfigError.
SampleStatus parse_status(std::string_view text);

struct PressureSample {
    Timestamp timestamp{};
    std::size_t channel = 1;
    std::uint16_t raw_count = 0;
    double voltage = 0.0;
    double pressure = 0.0; // in `unit`
    PressureUnit unit = PressureUnit::mbar;
    SampleStatus status = SampleStatus::ok;
    bool clamped = false;

    bool operator==(const PressureSample&) const = default;
};

enum class SignalRange { in_range, underrange, overrange };

struct Conversion {
    double voltage;
    double pressure;
    SignalRange range;
};

/// Total on 16-bit input. Y <= 0 V is underrange (a live gauge never sits
/// at zero); a count saturated at 65535 or Y > 10 V is overrange.
Conversion convert_count(std::uint16_t raw, PressureUnit unit, double midpoint = adc::kDefaultMidpoint);

PressureSample make_sample(Timestamp ts, const ChannelConfig& config, std::uint16_t raw,
                           double midpoint = adc::kDefaultMidpoint);

/// Pressure equivalent of a channel's threshold voltage.
double threshold_pressure(const ChannelConfig& config);

/// Readings at or below the threshold are raised to it. raw_count is kept.
PressureSample apply_threshold(PressureSample sample, const ChannelConfig& config);

// Flags a channel after N consecutive polls whose raw-derived voltage is
// below 0.1 V; the first sample at or above 0.1 V clears it.
class DisconnectDetector {
public:
    explicit DisconnectDetector(std::size_t polls = kDisconnectPolls, double midpoint = adc::kDefaultMidpoint);

    /// Updates the per-channel history and rewrites status in place.
    void update(std::vector<PressureSample>& samples);
    bool disconnected(std::size_t channel) const;
    void reset();

private:
    std::size_t polls_;
    double midpoint_;
    std::array<std::size_t, kMaxChannels + 1> low_run_{};
};

} // namespace vacdaq::daq
