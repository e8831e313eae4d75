#include "vacdaq/daq/http_api.hpp"

#include <httplib.h>
#include <json.hpp>

#include <spdlog/spdlog.h>

namespace vacdaq::daq {

using nlohmann::json;

namespace {

json sample_to_json(const PressureSample& s) {
    return {{"timestamp", format_timestamp(s.timestamp)},
            {"channel", s.channel},
            {"raw_count", s.raw_count},
            {"voltage", s.voltage},
            {"voltage_text", format_voltage(s.voltage)},
            {"pressure", s.pressure},
            {"pressure_text", format_pressure(s.pressure)},
            {"unit", vacphys::unit_name(s.unit)},
            {"status", status_name(s.status)},
            {"clamped", s.clamped}};
}

json channel_to_json(const ChannelStatus& c) {
    return {{"index", c.config.index},
            {"label", c.config.label},
            {"unit", vacphys::unit_name(c.config.unit)},
            {"threshold_voltage", c.config.threshold_voltage},
            {"threshold_pressure", c.threshold_pressure},
            {"enabled", c.config.enabled},
            {"last", c.last ? sample_to_json(*c.last) : json(nullptr)}};
}

json optional_text(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

json status_to_json(const EngineStatus& s) {
    json channels = json::array();
    for (const auto& c : s.channels)
        channels.push_back(channel_to_json(c));
    return {{"state", polling_state_name(s.state)},
            {"connected", s.connected},
            {"target", s.target},
            {"poll_interval_ms", s.poll_interval.count()},
            {"cycles", s.cycles},
            {"poll_errors", s.poll_errors},
            {"consecutive_failures", s.consecutive_failures},
            {"rows_logged", s.rows_logged},
            {"last_error", optional_text(s.last_error)},
            {"log_error", optional_text(s.log_error)},
            {"last_cycle_latency_ms",
             s.last_cycle_latency ? json(s.last_cycle_latency->count() / 1000.0) : json(nullptr)},
            {"channels", channels}};
}

json batch_to_json(const SampleBatch& b) {
    json samples = json::array();
    for (const auto& s : b.samples)
        samples.push_back(sample_to_json(s));
    return {{"seq", b.seq}, {"timestamp", format_timestamp(b.timestamp)}, {"samples", samples}};
}

void reply(httplib::Response& res, int code, const json& body) {
    res.status = code;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int code, std::string_view message) {
    reply(res, code, json{{"error", message}});
}

// Channel number from the route, or nullopt after writing a 404.
std::optional<std::size_t> channel_of(Engine& engine, const httplib::Request& req, httplib::Response& res) {
    std::size_t n = 0;
    try {
        n = std::stoul(req.matches[1].str());
    } catch (const std::exception&) {
    }
    if (!engine.channel(n)) {
        fail(res, 404, "no channel " + req.matches[1].str());
        return std::nullopt;
    }
    return n;
}

std::optional<json> body_field(const httplib::Request& req, httplib::Response& res, const char* key) {
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::exception&) {
        fail(res, 400, "body is not JSON");
        return std::nullopt;
    }
    if (!body.is_object() || !body.contains(key)) {
        fail(res, 400, std::string("body needs a \"") + key + "\" field");
        return std::nullopt;
    }
    return body[key];
}

} // namespace

std::string sample_json(const PressureSample& s) { return sample_to_json(s).dump(); }
std::string status_json(const EngineStatus& s) { return status_to_json(s).dump(); }

struct HmiServer::Impl {
    httplib::Server server;
    std::atomic<bool> stopping{false};
};

HmiServer::HmiServer(Engine& engine, modbus::Endpoint listen, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
    auto& svr = impl_->server;
    auto* stopping = &impl_->stopping;

    svr.Get("/api/status", [&engine](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, status_to_json(engine.status()));
    });

    svr.Get("/api/channels", [&engine](const httplib::Request&, httplib::Response& res) {
        json channels = json::array();
        for (const auto& c : engine.status().channels)
            channels.push_back(channel_to_json(c));
        reply(res, 200, json{{"channels", channels}});
    });

    svr.Put(R"(/api/channels/(\d+)/threshold)", [&engine](const httplib::Request& req, httplib::Response& res) {
        const auto n = channel_of(engine, req, res);
        if (!n)
            return;
        const auto v = body_field(req, res, "voltage");
        if (!v)
            return;
        if (!v->is_number())
            return fail(res, 400, "voltage must be a number");
        try {
            reply(res, 200, channel_to_json(engine.set_threshold(*n, v->get<double>())));
        } catch (const RangeError& e) {
            fail(res, 400, e.what());
        }
    });

    svr.Put(R"(/api/channels/(\d+)/enabled)", [&engine](const httplib::Request& req, httplib::Response& res) {
        const auto n = channel_of(engine, req, res);
        if (!n)
            return;
        const auto v = body_field(req, res, "enabled");
        if (!v)
            return;
        if (!v->is_boolean())
            return fail(res, 400, "enabled must be true or false");
        reply(res, 200, channel_to_json(engine.set_enabled(*n, v->get<bool>())));
    });

    svr.Post("/api/control/start", [&engine](const httplib::Request&, httplib::Response& res) {
        const bool changed = engine.start();
        reply(res, 200, json{{"changed", changed}, {"state", polling_state_name(engine.status().state)}});
    });

    svr.Post("/api/control/stop", [&engine](const httplib::Request&, httplib::Response& res) {
        const bool changed = engine.stop();
        reply(res, 200, json{{"changed", changed}, {"state", polling_state_name(engine.status().state)}});
    });

    svr.Get("/api/log", [&engine](const httplib::Request& req, httplib::Response& res) {
        std::size_t limit = 100;
        if (req.has_param("limit")) {
            const std::string text = req.get_param_value("limit");
            std::size_t used = 0;
            long n = 0;
            try {
                n = std::stol(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != text.size() || text.empty() || n < 1 || n > static_cast<long>(Engine::kRecentLines))
                return fail(res, 400, "limit must be an integer 1..1000");
            limit = static_cast<std::size_t>(n);
        }
        reply(res, 200, json{{"header", kCsvHeader}, {"lines", engine.recent_log(limit)}});
    });

    svr.Get("/api/stream", [&engine, stopping](const httplib::Request&, httplib::Response& res) {
        auto sub = engine.subscribe();
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [sub, stopping, started = false,
             quiet = std::chrono::steady_clock::now()](std::size_t, httplib::DataSink& sink) mutable {
                if (!started) {
                    started = true;
                    const std::string hello = "retry: 2000\n\n";
                    return sink.write(hello.data(), hello.size());
                }
                if (stopping->load() || !sink.is_writable()) {
                    sink.done();
                    return true;
                }
                const auto batch = sub->pop(std::chrono::milliseconds(250));
                if (!batch) {
                    if (sub->closed()) {
                        sink.done();
                        return true;
                    }
                    if (std::chrono::steady_clock::now() - quiet > std::chrono::seconds(15)) {
                        quiet = std::chrono::steady_clock::now();
                        const std::string ping = ": keepalive\n\n";
                        return sink.write(ping.data(), ping.size());
                    }
                    return true;
                }
                quiet = std::chrono::steady_clock::now();
                const std::string event = "id: " + std::to_string(batch->seq) + "\nevent: batch\ndata: " +
                                          batch_to_json(*batch).dump() + "\n\n";
                return sink.write(event.data(), event.size());
            },
            [sub](bool) { sub->close(); });
    });

    if (static_dir && !svr.set_mount_point("/", static_dir->string()))
        throw ConfigError("static directory " + static_dir->string() + " does not exist");

    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            spdlog::error("hmi api: {}", e.what());
            fail(res, 500, e.what());
        }
    });

    if (listen.port == 0) {
        const int p = svr.bind_to_any_port(listen.host);
        if (p <= 0)
            throw TransportError("cannot bind HMI API on " + listen.host);
        port_ = static_cast<std::uint16_t>(p);
    } else {
        if (!svr.bind_to_port(listen.host, listen.port))
            throw TransportError("cannot bind HMI API on " + listen.to_string());
        port_ = listen.port;
    }
    thread_ = std::thread([&svr] { svr.listen_after_bind(); });
}

HmiServer::~HmiServer() { stop(); }

void HmiServer::stop() {
    if (impl_->stopping.exchange(true))
        return;
    impl_->server.stop();
    if (thread_.joinable())
        thread_.join();
}

} // namespace vacdaq::daq
