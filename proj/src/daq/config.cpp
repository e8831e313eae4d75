#include "vacdaq/daq/engine.hpp"

#include "../json_fields.hpp"
#include "vacdaq/gauge.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace vacdaq::daq {

using detail::Fields;
using detail::json;

EngineConfig EngineConfig::defaults() {
    EngineConfig c;
    for (std::size_t i = 1; i <= kMaxChannels; ++i) {
        ChannelConfig ch;
        ch.index = i;
        ch.label = "CH" + std::to_string(i);
        c.channels.push_back(ch);
    }
    return c;
}

void EngineConfig::validate() const {
    if (target.host.empty() || target.port == 0)
        throw ConfigError("target needs a host and a non-zero port");
    if (poll_interval.count() < 10)
        throw ConfigError("poll_interval_ms must be at least 10");
    if (timeout.count() < 1)
        throw ConfigError("timeout_ms must be positive");
    if (register_count < 1 || register_count > kMaxChannels)
        throw ConfigError("register_count must be within 1..6");
    if (static_cast<std::uint32_t>(start_register) + register_count > 0x10000)
        throw ConfigError("start_register + register_count exceeds the address space");
    if (channels.size() != register_count)
        throw ConfigError("register_count (" + std::to_string(register_count) + ") must equal the number of channels (" +
                          std::to_string(channels.size()) + ")");
    std::set<std::size_t> seen;
    for (const auto& ch : channels) {
        ch.validate();
        if (ch.index > register_count)
            throw ConfigError("channel " + std::to_string(ch.index) + " has no register (register_count " +
                              std::to_string(register_count) + ")");
        if (!seen.insert(ch.index).second)
            throw ConfigError("channel " + std::to_string(ch.index) + " configured twice");
    }
    if (!(midpoint >= 32000.0 && midpoint <= 33500.0))
        throw ConfigError("midpoint is not a plausible bipolar midpoint");
    if (disconnect_polls < 1)
        throw ConfigError("disconnect_polls must be at least 1");
    if (degraded_after < 1)
        throw ConfigError("degraded_after must be at least 1");
}

namespace {

modbus::Endpoint endpoint(Fields& f, std::string_view key, std::uint16_t default_port) {
    try {
        return modbus::Endpoint::parse(f.string(key), default_port);
    } catch (const ConfigError& e) {
        f.fail(key, e.what());
    }
}

} // namespace

EngineConfig parse_engine_config(std::string_view text, std::string_view source) {
    const json doc = detail::parse_json(text, source);
    Fields top(doc, std::string(source));
    EngineConfig c = EngineConfig::defaults();

    if (top.has("target"))
        c.target = endpoint(top, "target", 502);
    if (top.has("host"))
        c.target.host = top.string("host");
    c.target.port = static_cast<std::uint16_t>(top.integer("port", 1, 65535, c.target.port));
    c.unit_id = static_cast<std::uint8_t>(top.integer("unit_id", 0, 255, c.unit_id));
    c.poll_interval = std::chrono::milliseconds(top.integer("poll_interval_ms", 10, 3'600'000, 1000));
    c.timeout = std::chrono::milliseconds(top.integer("timeout_ms", 1, 60'000, 1000));
    c.start_register = static_cast<std::uint16_t>(top.integer("start_register", 0, 65535, 0));
    c.midpoint = top.opt_number("midpoint").value_or(adc::kDefaultMidpoint);
    c.disconnect_polls = static_cast<std::size_t>(top.integer("disconnect_polls", 1, 1000, kDisconnectPolls));
    c.degraded_after = static_cast<std::size_t>(top.integer("degraded_after", 1, 1000, 5));
    if (top.has("log_path"))
        c.log_path = top.string("log_path");
    if (top.has("serve_address"))
        c.serve_address = endpoint(top, "serve_address", 8080);
    if (top.has("static_dir"))
        c.static_dir = top.string("static_dir");
    c.autostart = top.boolean("autostart", true);

    if (const json* chans = top.find("channels")) {
        if (!chans->is_array())
            top.fail("channels", "expected an array");
        c.channels.clear();
        for (std::size_t i = 0; i < chans->size(); ++i) {
            Fields f((*chans)[i], std::string(source) + ".channels[" + std::to_string(i) + "]");
            ChannelConfig ch;
            ch.index = static_cast<std::size_t>(f.integer("index", 1, kMaxChannels));
            try {
                ch.unit = vacphys::parse_unit(f.string("unit", std::string("mbar")));
                gauge::constants_for(ch.unit);
            } catch (const ConfigError& e) {
                f.fail("unit", e.what());
            }
            ch.threshold_voltage = f.opt_number("threshold_voltage").value_or(0.0);
            if (!(ch.threshold_voltage >= 0.0 && ch.threshold_voltage <= 10.0))
                f.fail("threshold_voltage", "must be within 0..10 V");
            ch.enabled = f.boolean("enabled", true);
            ch.label = f.string("label", "CH" + std::to_string(ch.index));
            f.reject_unknown();
            c.channels.push_back(ch);
        }
    }
    c.register_count = static_cast<std::uint16_t>(
        top.integer("register_count", 1, kMaxChannels, static_cast<long long>(c.channels.size())));
    top.reject_unknown();

    try {
        c.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string(source) + ": " + e.what());
    }
    return c;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_engine_config(buf.str(), path.string());
}

} // namespace vacdaq::daq
