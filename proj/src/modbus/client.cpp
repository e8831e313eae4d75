#include "vacdaq/modbus/net.hpp"

#include "socket.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <map>

namespace vacdaq::modbus {

Endpoint Endpoint::parse(std::string_view text, std::uint16_t default_port) {
    Endpoint ep;
    ep.port = default_port;
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        ep.host = std::string(text);
    } else {
        ep.host = std::string(text.substr(0, colon));
        const auto digits = text.substr(colon + 1);
        unsigned value = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty() || value > 65535)
            throw ConfigError("bad port in '" + std::string(text) + "'");
        ep.port = static_cast<std::uint16_t>(value);
    }
    if (ep.host.empty())
        ep.host = "0.0.0.0";
    return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

void ClientConfig::validate() const {
    if (target.host.empty())
        throw ConfigError("client target host is empty");
    if (target.port == 0)
        throw ConfigError("client target port must be non-zero");
    if (timeout.count() <= 0)
        throw ConfigError("timeout must be positive");
    if (max_outstanding < 1 || max_outstanding > 16)
        throw ConfigError("max_outstanding must be within 1..16");
}

Client::Client(ClientConfig config) : config_(std::move(config)) { config_.validate(); }

Client::~Client() { close(); }

void Client::connect() {
    if (fd_ >= 0)
        return;
    fd_ = detail::connect_tcp(config_.target.host, config_.target.port, config_.timeout);
}

void Client::close() noexcept {
    detail::Fd(fd_).reset();
    fd_ = -1;
}

ResponsePdu Client::transact(const RequestPdu& request) {
    auto out = transact_pipelined(std::span<const RequestPdu>(&request, 1));
    return std::move(out.front());
}

std::vector<ResponsePdu> Client::transact_pipelined(std::span<const RequestPdu> requests) {
    std::vector<ResponsePdu> out;
    out.reserve(requests.size());
    for (std::size_t at = 0; at < requests.size(); at += config_.max_outstanding) {
        const auto window = requests.subspan(at, std::min(config_.max_outstanding, requests.size() - at));
        std::vector<ResponsePdu> part;
        try {
            part = exchange(window);
        } catch (const TimeoutError&) {
            throw;
        } catch (const TransportError& e) {
            // stale connection (peer restarted, idle reset): one fresh attempt
            spdlog::debug("modbus client: {}; reconnecting", e.what());
            close();
            part = exchange(window);
        }
        for (auto& r : part)
            out.push_back(std::move(r));
    }
    return out;
}

std::vector<ResponsePdu> Client::exchange(std::span<const RequestPdu> requests) {
    connect();

    std::map<std::uint16_t, std::size_t> pending;
    std::vector<std::uint8_t> wire;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const std::uint16_t tid = next_tid_++;
        const auto frame = encode_frame(Adu{{tid, 0, 0, config_.unit_id}, requests[i]});
        if (observer_)
            observer_(frame);
        wire.insert(wire.end(), frame.begin(), frame.end());
        pending.emplace(tid, i);
    }
    try {
        detail::send_all(fd_, wire);
    } catch (...) {
        close();
        throw;
    }

    std::vector<std::optional<ResponsePdu>> got(requests.size());
    const auto deadline = detail::Clock::now() + config_.timeout;
    std::vector<std::uint8_t> frame;
    auto fail = [this](auto error) {
        close();
        throw error;
    };

    while (!pending.empty()) {
        frame.assign(kMbapSize, 0);
        switch (detail::read_exact(fd_, frame, deadline)) {
        case detail::ReadResult::ok:
            break;
        case detail::ReadResult::timed_out:
            // a half-read frame would desynchronise the stream, so drop it
            fail(TimeoutError("no response from " + config_.target.to_string() + " within " +
                              std::to_string(config_.timeout.count()) + " ms"));
            break;
        default:
            fail(TransportError("connection closed by " + config_.target.to_string()));
        }
        MbapHeader header;
        try {
            header = decode_header(frame);
        } catch (...) {
            close();
            throw;
        }
        frame.resize(kMbapSize + header.length - 1);
        const auto body = std::span<std::uint8_t>(frame).subspan(kMbapSize);
        const auto r = detail::read_exact(fd_, body, deadline);
        if (r == detail::ReadResult::timed_out)
            fail(TimeoutError("truncated response from " + config_.target.to_string()));
        if (r != detail::ReadResult::ok)
            fail(TransportError("connection closed by " + config_.target.to_string()));

        const auto it = pending.find(header.transaction_id);
        if (it == pending.end()) {
            ++discarded_;
            spdlog::warn("modbus client: discarding response with unknown transaction id {}", header.transaction_id);
            continue;
        }
        if (header.unit_id != config_.unit_id)
            fail(ProtocolError("response unit id " + std::to_string(header.unit_id) + " does not match request"));
        const std::size_t index = it->second;
        try {
            got[index] = decode_response_pdu(body, function_of(requests[index]));
        } catch (...) {
            close();
            throw;
        }
        pending.erase(it);
    }

    std::vector<ResponsePdu> out;
    out.reserve(got.size());
    for (auto& r : got)
        out.push_back(std::move(*r));
    return out;
}

} // namespace vacdaq::modbus
