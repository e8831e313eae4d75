#pragma once

#include <cstdint>

namespace vacdaq::adc {

// Offset-binary +-10 V input: Y = 10 (X / M - 1).
inline constexpr double kDefaultMidpoint = 32770.0;
inline constexpr double kFullScale = 10.0; // V

/// Saturating: Y is clamped to [-10, 10], the count to [0, 65535].
std::uint16_t volts_to_count(double volts, double midpoint = kDefaultMidpoint);
double count_to_volts(std::uint16_t count, double midpoint = kDefaultMidpoint);

} // namespace vacdaq::adc
