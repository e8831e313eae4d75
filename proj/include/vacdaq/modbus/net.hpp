#pragma once

#include "vacdaq/error.hpp"
#include "vacdaq/modbus/codec.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace vacdaq::modbus {

inline constexpr std::uint16_t kDefaultPort = 502;

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = kDefaultPort;

    /// "host", "host:port" or ":port". Throws ConfigError.
    static Endpoint parse(std::string_view text, std::uint16_t default_port = kDefaultPort);
    std::string to_string() const;
};

struct ClientConfig {
    Endpoint target;
    std::uint8_t unit_id = 0xFF;
    std::chrono::milliseconds timeout{1000};
    std::size_t max_outstanding = 10;

    void validate() const;
};

// A Modbus TCP client over one persistent connection. Not thread-safe: one
// caller at a time.
class Client {
public:
    using FrameObserver = std::function<void(std::span<const std::uint8_t>)>;

    explicit Client(ClientConfig config);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void connect();
    void close() noexcept;
    bool connected() const noexcept { return fd_ >= 0; }

    /// Sends one request and waits for the response carrying the same
    /// transaction id. Exception responses are returned, not thrown.
    ResponsePdu transact(const RequestPdu& request);

    /// Writes every request before reading; responses are matched by
    /// transaction id and returned in request order.
    std::vector<ResponsePdu> transact_pipelined(std::span<const RequestPdu> requests);

    /// Called with every encoded request ADU just before it is written.
    void set_request_observer(FrameObserver observer) { observer_ = std::move(observer); }

    std::uint16_t next_transaction_id() const noexcept { return next_tid_; }
    std::uint64_t discarded_frames() const noexcept { return discarded_; }
    const ClientConfig& config() const noexcept { return config_; }

private:
    std::vector<ResponsePdu> exchange(std::span<const RequestPdu> requests);

    ClientConfig config_;
    int fd_ = -1;
    std::uint16_t next_tid_ = 0;
    std::uint64_t discarded_ = 0;
    FrameObserver observer_;
};

// Thrown by a request handler to answer with a specific exception code.
class ExceptionReply : public Error {
public:
    explicit ExceptionReply(ExceptionCode code)
        : Error(std::string("modbus exception ") + std::string(exception_name(code))), code_(code) {}
    ExceptionCode code() const noexcept { return code_; }

private:
    ExceptionCode code_;
};

struct RequestContext {
    std::uint16_t transaction_id;
    std::uint8_t unit_id;
};

// Must be safe to call concurrently from several connections.
using RequestHandler = std::function<ResponsePdu(const RequestContext&, const RequestPdu&)>;

struct ServerConfig {
    Endpoint listen{"0.0.0.0", kDefaultPort};
    std::size_t max_connections = 8;
    std::uint8_t bridge_unit_id = 0x01; // accepted next to 00H and FFH
    RequestHandler handler;

    void validate() const;
};

class Server {
public:
    explicit Server(ServerConfig config);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Stops accepting, lets in-flight requests finish, joins all threads.
    /// Idempotent.
    void stop();

    std::uint16_t port() const noexcept { return port_; }
    std::size_t active_connections() const noexcept { return active_.load(); }
    std::uint64_t refused_connections() const noexcept { return refused_.load(); }
    std::uint64_t requests_served() const noexcept { return served_.load(); }

private:
    struct Connection {
        int fd = -1;
        std::thread thread;
        std::atomic<bool> finished{false};
    };

    void accept_loop();
    void serve_connection(Connection& conn);
    ResponsePdu dispatch(const MbapHeader& header, std::span<const std::uint8_t> pdu, bool& close_after);
    void reap(bool all);

    ServerConfig config_;
    int listen_fd_ = -1;
    int wake_read_ = -1;
    int wake_write_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::atomic<std::size_t> active_{0};
    std::atomic<std::uint64_t> refused_{0};
    std::atomic<std::uint64_t> served_{0};
    std::mutex conn_mutex_;
    std::list<Connection> connections_;
    std::thread acceptor_;
    std::once_flag stop_once_;
};

/// Binds and starts serving; throws TransportError when the address cannot be bound.
std::unique_ptr<Server> serve(ServerConfig config);

} // namespace vacdaq::modbus
