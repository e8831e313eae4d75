#pragma once

#include "vacdaq/daq/engine.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace vacdaq::daq {

// JSON bodies shared by the HTTP API and the CLI's --format json.
std::string sample_json(const PressureSample& s);
std::string status_json(const EngineStatus& s);

// HTTP control/monitoring API for the operator console.
//
//   GET  /api/status                 engine state plus every channel
//   GET  /api/channels               channel configs and last samples
//   PUT  /api/channels/{n}/threshold {"voltage": v}, 0 <= v <= 10
//   PUT  /api/channels/{n}/enabled   {"enabled": b}
//   POST /api/control/start|stop
//   GET  /api/log?limit=N            recent CSV lines, oldest first
//   GET  /api/stream                 server-sent events, one "batch" per poll
//
// 400 for a bad body or value, 404 for an unknown channel.
class HmiServer {
public:
    HmiServer(Engine& engine, modbus::Endpoint listen, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~HmiServer();
    HmiServer(const HmiServer&) = delete;
    HmiServer& operator=(const HmiServer&) = delete;

    std::uint16_t port() const noexcept { return port_; }
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_ = 0;
    std::thread thread_;
};

} // namespace vacdaq::daq
