#include "vacdaq/adc.hpp"

#include <algorithm>
#include <cmath>

namespace vacdaq::adc {

std::uint16_t volts_to_count(double volts, double midpoint) {
    if (std::isnan(volts))
        volts = 0.0;
    const double y = std::clamp(volts, -kFullScale, kFullScale);
    // std::round is half-away-from-zero
    const double x = std::round(midpoint * (y / kFullScale + 1.0));
    return static_cast<std::uint16_t>(std::clamp(x, 0.0, 65535.0));
}

double count_to_volts(std::uint16_t count, double midpoint) { return kFullScale * (count / midpoint - 1.0); }

} // namespace vacdaq::adc
