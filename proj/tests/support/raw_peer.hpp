#pragma once
// Minimal hand-rolled TCP peers for exercising the client against
// misbehaving servers, and the server against misbehaving clients.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace vacdaq::testing {

using Bytes = std::vector<std::uint8_t>;

inline bool recv_exact(int fd, std::uint8_t* buf, std::size_t n, int timeout_ms = 2000) {
    std::size_t got = 0;
    while (got < n) {
        pollfd p{fd, POLLIN, 0};
        if (::poll(&p, 1, timeout_ms) <= 0)
            return false;
        const ssize_t r = ::recv(fd, buf + got, n - got, 0);
        if (r <= 0)
            return false;
        got += static_cast<std::size_t>(r);
    }
    return true;
}

/// Reads one MBAP framed ADU; empty on EOF or timeout.
inline Bytes recv_frame(int fd, int timeout_ms = 2000) {
    Bytes f(7);
    if (!recv_exact(fd, f.data(), 7, timeout_ms))
        return {};
    const std::size_t len = (f[4] << 8) | f[5];
    f.resize(6 + len);
    if (!recv_exact(fd, f.data() + 7, len - 1, timeout_ms))
        return {};
    return f;
}

inline void send_bytes(int fd, const Bytes& b) { ::send(fd, b.data(), b.size(), MSG_NOSIGNAL); }

/// True once the peer has closed (EOF) within the timeout.
inline bool sees_eof(int fd, int timeout_ms = 2000) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, timeout_ms) <= 0)
        return false;
    std::uint8_t b;
    return ::recv(fd, &b, 1, 0) <= 0;
}

inline int connect_local(std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
        ::close(fd);
        throw std::runtime_error("connect failed");
    }
    return fd;
}

// Accepts a single connection on an ephemeral loopback port and runs
// `script` on it in a background thread.
class RawServer {
public:
    explicit RawServer(std::function<void(int)> script) {
        listen_ = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in sa{};
        sa.sin_family = AF_INET;
        sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        ::bind(listen_, reinterpret_cast<sockaddr*>(&sa), sizeof sa);
        ::listen(listen_, 4);
        socklen_t len = sizeof sa;
        ::getsockname(listen_, reinterpret_cast<sockaddr*>(&sa), &len);
        port_ = ntohs(sa.sin_port);
        thread_ = std::thread([this, script = std::move(script)] {
            pollfd p{listen_, POLLIN, 0};
            if (::poll(&p, 1, 5000) <= 0)
                return;
            const int fd = ::accept(listen_, nullptr, nullptr);
            if (fd < 0)
                return;
            script(fd);
            ::close(fd);
        });
    }
    ~RawServer() {
        thread_.join();
        ::close(listen_);
    }
    std::uint16_t port() const { return port_; }

private:
    int listen_ = -1;
    std::uint16_t port_ = 0;
    std::thread thread_;
};

} // namespace vacdaq::testing
