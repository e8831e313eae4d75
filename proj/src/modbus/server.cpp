#include "vacdaq/modbus/net.hpp"

#include "socket.hpp"

#include <spdlog/spdlog.h>

#include <optional>
#include <type_traits>

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace vacdaq::modbus {

namespace {

// A client that stalls mid-frame gets this long before it is dropped.
constexpr auto kFrameBodyTimeout = std::chrono::seconds(5);

// Quantity and value checks every function shares, done before the handler
// sees the request.
std::optional<ExceptionCode> check_request(const RequestPdu& req) {
    auto span_ok = [](std::uint32_t start, std::uint32_t count, std::uint32_t max) -> std::optional<ExceptionCode> {
        if (count < 1 || count > max)
            return ExceptionCode::illegal_data_value;
        if (start + count > 0x10000)
            return ExceptionCode::illegal_data_address;
        return std::nullopt;
    };
    return std::visit(
        [&](const auto& r) -> std::optional<ExceptionCode> {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ReadCoilsRequest> || std::is_same_v<T, ForceMultipleCoilsRequest>)
                return span_ok(r.start, r.count, kMaxCoils);
            else if constexpr (std::is_same_v<T, ReadHoldingRegistersRequest> ||
                               std::is_same_v<T, ReadInputRegistersRequest>)
                return span_ok(r.start, r.count, kMaxRegisters);
            else if constexpr (std::is_same_v<T, PresetMultipleRegistersRequest>)
                return span_ok(r.start, static_cast<std::uint32_t>(r.values.size()), 123);
            else if constexpr (std::is_same_v<T, ForceSingleCoilRequest>)
                return r.valid_value() ? std::nullopt : std::optional(ExceptionCode::illegal_data_value);
            else
                return std::nullopt;
        },
        req);
}

} // namespace

void ServerConfig::validate() const {
    if (!handler)
        throw ConfigError("server needs a request handler");
    if (max_connections < 1)
        throw ConfigError("max_connections must be at least 1");
}

Server::Server(ServerConfig config) : config_(std::move(config)) {
    config_.validate();
    int pipe_fds[2];
    if (::pipe2(pipe_fds, O_CLOEXEC) < 0)
        throw TransportError(detail::errno_text("pipe"));
    wake_read_ = pipe_fds[0];
    wake_write_ = pipe_fds[1];
    try {
        listen_fd_ = detail::listen_tcp(config_.listen.host, config_.listen.port, port_);
    } catch (...) {
        ::close(wake_read_);
        ::close(wake_write_);
        throw;
    }
    acceptor_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
    std::call_once(stop_once_, [this] {
        stopping_ = true;
        const char byte = 1;
        // the pipe is never drained, so every poll on it sees POLLIN from now on
        [[maybe_unused]] auto n = ::write(wake_write_, &byte, 1);
        if (acceptor_.joinable())
            acceptor_.join();
        ::close(listen_fd_);
        reap(true);
        ::close(wake_read_);
        ::close(wake_write_);
    });
}

void Server::reap(bool all) {
    std::lock_guard lock(conn_mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
        if (all || it->finished) {
            if (it->thread.joinable())
                it->thread.join();
            it = connections_.erase(it);
        } else {
            ++it;
        }
    }
}

void Server::accept_loop() {
    while (!stopping_) {
        pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {wake_read_, POLLIN, 0}};
        if (::poll(fds, 2, -1) < 0) {
            if (errno == EINTR)
                continue;
            spdlog::error("modbus server: {}", detail::errno_text("poll"));
            return;
        }
        if (fds[1].revents & POLLIN)
            return;
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0)
            continue;
        reap(false);
        if (active_ >= config_.max_connections) {
            ++refused_;
            spdlog::warn("modbus server: connection limit {} reached, refusing", config_.max_connections);
            ::close(fd);
            continue;
        }
        detail::set_nodelay(fd);
        ++active_;
        std::lock_guard lock(conn_mutex_);
        auto& conn = connections_.emplace_back();
        conn.fd = fd;
        conn.thread = std::thread([this, &conn] {
            try {
                serve_connection(conn);
            } catch (const std::exception& e) {
                spdlog::warn("modbus server: connection dropped: {}", e.what());
            }
            ::close(conn.fd);
            --active_;
            conn.finished = true;
        });
    }
}

void Server::serve_connection(Connection& conn) {
    std::vector<std::uint8_t> frame;
    while (!stopping_) {
        frame.assign(kMbapSize, 0);
        if (detail::read_exact(conn.fd, frame, std::nullopt, wake_read_) != detail::ReadResult::ok)
            return;
        MbapHeader header;
        try {
            header = decode_header(frame);
        } catch (const Error& e) {
            spdlog::warn("modbus server: bad MBAP header ({}), closing", e.what());
            return;
        }
        frame.resize(kMbapSize + header.length - 1);
        const auto body = std::span<std::uint8_t>(frame).subspan(kMbapSize);
        if (detail::read_exact(conn.fd, body, detail::Clock::now() + kFrameBodyTimeout) != detail::ReadResult::ok)
            return;

        bool close_after = false;
        const ResponsePdu response = dispatch(header, body, close_after);
        if (close_after)
            return;
        ++served_; // before the send so a client never sees its answer ahead of the count
        detail::send_all(conn.fd, encode_frame(Adu{{header.transaction_id, 0, 0, header.unit_id}, response}));
    }
}

ResponsePdu Server::dispatch(const MbapHeader& header, std::span<const std::uint8_t> pdu, bool& close_after) {
    RequestPdu request;
    try {
        request = decode_request_pdu(pdu);
    } catch (const UnsupportedFunctionError& e) {
        if (e.function() & kExceptionFlag) {
            close_after = true;
            return {};
        }
        return build_exception(e.function(), ExceptionCode::illegal_function);
    } catch (const Error& e) {
        spdlog::warn("modbus server: malformed request ({}), closing", e.what());
        close_after = true;
        return {};
    }

    const std::uint8_t function = function_of(request);
    const std::uint8_t unit = header.unit_id;
    if (unit != 0x00 && unit != 0xFF && unit != config_.bridge_unit_id)
        return build_exception(function, ExceptionCode::gateway_target_failed);
    if (const auto code = check_request(request))
        return build_exception(function, *code);

    try {
        ResponsePdu response = config_.handler(RequestContext{header.transaction_id, unit}, request);
        if (!is_exception(response) && function_of(response) != function)
            throw StateError("handler answered with the wrong function");
        return response;
    } catch (const ExceptionReply& e) {
        return build_exception(function, e.code());
    } catch (const std::exception& e) {
        spdlog::warn("modbus server: handler failed: {}", e.what());
        return build_exception(function, ExceptionCode::device_failure);
    }
}

std::unique_ptr<Server> serve(ServerConfig config) { return std::make_unique<Server>(std::move(config)); }

} // namespace vacdaq::modbus
