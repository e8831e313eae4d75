#include "socket.hpp"

#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace vacdaq::modbus::detail {

void Fd::reset() noexcept {
    if (fd_ >= 0)
        ::close(fd_);
    fd_ = -1;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

namespace {

struct AddrList {
    addrinfo* head = nullptr;
    ~AddrList() {
        if (head)
            ::freeaddrinfo(head);
    }
};

AddrList resolve(const std::string& host, std::uint16_t port, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive)
        hints.ai_flags = AI_PASSIVE;
    AddrList out;
    const std::string service = std::to_string(port);
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &out.head);
    if (rc != 0)
        throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    return out;
}

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

} // namespace

int connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
    const auto addrs = resolve(host, port, false);
    const auto deadline = Clock::now() + timeout;
    std::string last = "no address";
    for (addrinfo* ai = addrs.head; ai; ai = ai->ai_next) {
        Fd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (fd.get() < 0) {
            last = errno_text("socket");
            continue;
        }
        const int flags = ::fcntl(fd.get(), F_GETFL);
        ::fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
        int rc = ::connect(fd.get(), ai->ai_addr, ai->ai_addrlen);
        if (rc < 0 && errno != EINPROGRESS) {
            last = errno_text("connect");
            continue;
        }
        if (rc < 0) {
            pollfd p{fd.get(), POLLOUT, 0};
            rc = ::poll(&p, 1, remaining_ms(deadline));
            if (rc == 0)
                throw TimeoutError("connect to " + host + ":" + std::to_string(port) + " timed out");
            int err = 0;
            socklen_t len = sizeof err;
            ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
            if (rc < 0 || err != 0) {
                errno = err ? err : errno;
                last = errno_text("connect");
                continue;
            }
        }
        ::fcntl(fd.get(), F_SETFL, flags);
        set_nodelay(fd.get());
        return fd.release();
    }
    throw TransportError(host + ":" + std::to_string(port) + ": " + last);
}

int listen_tcp(const std::string& host, std::uint16_t port, std::uint16_t& bound_port) {
    const auto addrs = resolve(host, port, true);
    Fd fd(::socket(addrs.head->ai_family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (fd.get() < 0)
        throw TransportError(errno_text("socket"));
    const int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd.get(), addrs.head->ai_addr, addrs.head->ai_addrlen) < 0)
        throw TransportError(errno_text(("bind " + host + ":" + std::to_string(port)).c_str()));
    if (::listen(fd.get(), 64) < 0)
        throw TransportError(errno_text("listen"));
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&sa), &len);
    bound_port = ntohs(sa.sin_port);
    return fd.release();
}

void set_nodelay(int fd) {
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void send_all(int fd, std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError(errno_text("send"));
        }
        done += static_cast<std::size_t>(n);
    }
}

ReadResult read_exact(int fd, std::span<std::uint8_t> buf, std::optional<Clock::time_point> deadline,
                      int wake_fd) {
    std::size_t got = 0;
    while (got < buf.size()) {
        pollfd fds[2] = {{fd, POLLIN, 0}, {wake_fd, POLLIN, 0}};
        const nfds_t nfds = (wake_fd >= 0 && got == 0) ? 2 : 1;
        const int wait = deadline ? remaining_ms(*deadline) : -1;
        const int rc = ::poll(fds, nfds, wait);
        if (rc < 0) {
            if (errno == EINTR)
                continue;
            throw TransportError(errno_text("poll"));
        }
        if (rc == 0)
            return ReadResult::timed_out;
        if (nfds == 2 && (fds[1].revents & POLLIN) && !(fds[0].revents & POLLIN))
            return ReadResult::woken;
        const ssize_t n = ::recv(fd, buf.data() + got, buf.size() - got, 0);
        if (n == 0)
            return ReadResult::closed;
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN)
                continue;
            if (errno == ECONNRESET)
                return ReadResult::closed;
            throw TransportError(errno_text("recv"));
        }
        got += static_cast<std::size_t>(n);
    }
    return ReadResult::ok;
}

} // namespace vacdaq::modbus::detail
