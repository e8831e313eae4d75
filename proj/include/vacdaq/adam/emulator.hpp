#pragma once

#include "vacdaq/adc.hpp"
#include "vacdaq/gauge.hpp"
#include "vacdaq/modbus/net.hpp"
#include "vacdaq/vacphys.hpp"

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

namespace vacdaq::adam {

inline constexpr std::size_t kChannels = 8;
inline constexpr std::uint16_t kDefaultTickMs = 100;
inline constexpr std::uint16_t kMinTickMs = 10;
inline constexpr std::uint16_t kMaxTickMs = 10000;

std::string identity_string();

struct RegisterMap {
    std::array<std::uint16_t, kChannels> input_registers{}; // 3x 0..7
    std::array<bool, kChannels> coils{};                     // 0x 0..7, channel enable
    std::array<std::uint16_t, kChannels> holding_registers{}; // 4x 0..7, [0] = tick period ms
    std::vector<std::uint8_t> identity;                       // FC17 payload
    std::uint64_t tick = 0;
    double time = 0.0; // simulated seconds
};

// Pressure programs, all in mbar.
struct Constant {
    double pressure_mbar;
};
// Log-linear from start to end over duration_s, then holds. duration 0 is a step.
struct Ramp {
    double start_mbar;
    double end_mbar;
    double duration_s;
};
struct Pumpdown {
    vacphys::PumpdownParams params;
};
struct Disconnected {};

using Program = std::variant<Disconnected, Constant, Ramp, Pumpdown>;

/// Throws StateError for Disconnected.
double program_pressure(const Program& program, double t);

struct ChannelScenario {
    Program program = Disconnected{};
    vacphys::PressureUnit unit = vacphys::PressureUnit::mbar;
    bool enabled = true;
    bool preignited = false;
    bool cold_cathode = true;
    std::optional<gauge::NoiseOptions> noise;
};

struct Scenario {
    std::array<ChannelScenario, kChannels> channels{};
    double midpoint = adc::kDefaultMidpoint;
    std::uint16_t tick_ms = kDefaultTickMs;

    /// Throws ConfigError naming the offending channel.
    void validate() const;
};

/// JSON. Unlisted channels stay Disconnected. Throws ConfigError with a
/// line/column for syntax errors and a field path for bad values.
Scenario parse_scenario(std::string_view text, std::string_view source = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);

// An analog-input chassis: eight gauge channels sampled into input registers.
// One writer (tick) publishes immutable snapshots; readers never block it.
class Emulator {
public:
    explicit Emulator(Scenario scenario);
    ~Emulator();
    Emulator(const Emulator&) = delete;
    Emulator& operator=(const Emulator&) = delete;

    /// Advances every channel by dt seconds and publishes one snapshot.
    void tick(double dt);
    std::shared_ptr<const RegisterMap> snapshot() const;

    /// Register-map semantics for a decoded request. Throws
    /// modbus::ExceptionReply for bad addresses and values.
    modbus::ResponsePdu handle_request(const modbus::RequestPdu& request);
    modbus::RequestHandler handler();

    /// Real-time ticking at the period in holding register 0.
    void start_ticker();
    void stop_ticker();

    std::optional<gauge::GaugeReading> last_reading(std::size_t channel) const;
    const Scenario& scenario() const noexcept { return scenario_; }

private:
    void publish_locked();
    void set_coil_locked(std::size_t channel, bool on);

    Scenario scenario_;
    mutable std::mutex state_mutex_; // working state below
    RegisterMap working_;
    std::vector<std::optional<gauge::GaugeChannel>> gauges_;
    std::array<std::optional<gauge::GaugeReading>, kChannels> readings_{};

    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const RegisterMap> published_;

    std::mutex ticker_mutex_;
    std::condition_variable ticker_cv_;
    bool ticker_stop_ = false;
    std::thread ticker_;
};

} // namespace vacdaq::adam
