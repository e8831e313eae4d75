#pragma once

#include "vacdaq/daq/csv.hpp"
#include "vacdaq/daq/pipeline.hpp"
#include "vacdaq/error.hpp"
#include "vacdaq/modbus/net.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace vacdaq::daq {

struct EngineConfig {
    modbus::Endpoint target{"172.16.4.156", 502};
    std::uint8_t unit_id = 0x01;
    std::chrono::milliseconds poll_interval{1000};
    std::chrono::milliseconds timeout{1000};
    std::uint16_t start_register = 0;
    std::uint16_t register_count = 6;
    double midpoint = adc::kDefaultMidpoint;
    std::size_t disconnect_polls = kDisconnectPolls;
    std::size_t degraded_after = 5; // consecutive failed polls
    std::vector<ChannelConfig> channels;
    std::filesystem::path log_path = "vacdaq.csv";
    modbus::Endpoint serve_address{"127.0.0.1", 8080};
    std::optional<std::filesystem::path> static_dir;
    bool autostart = true;

    /// Six default channels, everything else at its default.
    static EngineConfig defaults();
    void validate() const;
};

/// JSON. Throws ConfigError with a line/column or field path.
EngineConfig parse_engine_config(std::string_view text, std::string_view source = "<config>");
EngineConfig load_engine_config(const std::filesystem::path& path);

class PollError : public Error {
public:
    PollError(const std::string& what, std::optional<modbus::ExceptionCode> code = std::nullopt)
        : Error(what), code_(code) {}
    std::optional<modbus::ExceptionCode> exception_code() const noexcept { return code_; }

private:
    std::optional<modbus::ExceptionCode> code_;
};

/// One fetch: ReadInputRegisters{start, count} and the per-channel pipeline
/// up to the threshold clamp. Throws PollError.
std::vector<PressureSample> poll_once(modbus::Client& client, const EngineConfig& config, Timestamp ts);

Timestamp now_ms();

struct SampleBatch {
    std::uint64_t seq = 0;
    Timestamp timestamp{};
    std::vector<PressureSample> samples;
};

// Live feed for one subscriber. Bounded; the engine drops a subscriber whose
// queue overflows rather than stall the poll loop.
class Subscription {
public:
    explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

    /// Empty on timeout or once closed and drained.
    std::shared_ptr<const SampleBatch> pop(std::chrono::milliseconds wait);
    bool closed() const;
    void close();

private:
    friend class Engine;
    bool offer(std::shared_ptr<const SampleBatch> batch);

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::shared_ptr<const SampleBatch>> queue_;
    std::size_t capacity_;
    bool closed_ = false;
};

enum class PollingState { stopped, running, degraded };
std::string_view polling_state_name(PollingState s) noexcept;

struct ChannelStatus {
    ChannelConfig config;
    double threshold_pressure = 0.0;
    std::optional<PressureSample> last;
};

struct EngineStatus {
    PollingState state = PollingState::stopped;
    bool connected = false;
    std::string target;
    std::chrono::milliseconds poll_interval{};
    std::uint64_t cycles = 0;
    std::uint64_t poll_errors = 0;
    std::uint64_t consecutive_failures = 0;
    std::uint64_t rows_logged = 0;
    std::optional<std::string> last_error;
    std::optional<std::string> log_error;
    std::optional<std::chrono::microseconds> last_cycle_latency; // poll start to log written
    std::vector<ChannelStatus> channels;
};

class Engine {
public:
    static constexpr std::size_t kSubscriberQueue = 64;
    static constexpr std::size_t kRecentLines = 1000;

    explicit Engine(EngineConfig config);
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Both idempotent; return whether anything changed.
    bool start();
    bool stop();

    /// Applied between cycles. Throw RangeError / ConfigError.
    ChannelStatus set_threshold(std::size_t channel, double volts);
    ChannelStatus set_enabled(std::size_t channel, bool enabled);

    EngineStatus status() const;
    std::optional<ChannelStatus> channel(std::size_t index) const;
    std::shared_ptr<Subscription> subscribe();
    /// Most recent CSV lines (rows and comments), oldest first.
    std::vector<std::string> recent_log(std::size_t limit) const;

    /// Stops the poll thread, closes subscribers, flushes the log. Idempotent.
    void shutdown();

    const EngineConfig& config() const noexcept { return config_; }

private:
    template <class F>
    auto submit(F&& f) -> decltype(f());
    void loop();
    void cycle();
    void publish(std::shared_ptr<const SampleBatch> batch);
    void remember(std::string line);
    void update_status_locked();
    std::size_t slot(std::size_t channel) const;

    EngineConfig config_;

    // owned by the poll thread
    std::unique_ptr<modbus::Client> client_;
    std::unique_ptr<CsvLog> log_;
    DisconnectDetector detector_;
    std::vector<ChannelConfig> channels_;
    bool polling_ = false;
    std::uint64_t seq_ = 0;
    std::chrono::steady_clock::time_point last_cycle_{};
    Timestamp last_timestamp_{};

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::function<void()>> commands_;
    bool quit_ = false;

    mutable std::mutex status_mutex_;
    EngineStatus status_;
    std::deque<std::string> recent_;
    std::vector<std::weak_ptr<Subscription>> subscribers_;
    bool shut_down_ = false;

    std::thread thread_;
    std::once_flag shutdown_once_;
};

} // namespace vacdaq::daq
