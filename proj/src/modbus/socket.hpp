#pragma once
// POSIX socket plumbing shared by the client and server. Internal.

#include "vacdaq/error.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace vacdaq::modbus::detail {

using Clock = std::chrono::steady_clock;

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& o) noexcept : fd_(o.release()) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = o.release();
        }
        return *this;
    }
    int get() const noexcept { return fd_; }
    int release() noexcept {
        const int f = fd_;
        fd_ = -1;
        return f;
    }
    void reset() noexcept;

private:
    int fd_ = -1;
};

std::string errno_text(const char* what);

int connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Returns the listening fd; fills the bound port.
int listen_tcp(const std::string& host, std::uint16_t port, std::uint16_t& bound_port);

void set_nodelay(int fd);

void send_all(int fd, std::span<const std::uint8_t> bytes);

enum class ReadResult { ok, closed, timed_out, woken };

/// Reads exactly buf.size() bytes. `deadline` absent means wait forever.
/// `wake_fd` (if >= 0) interrupts the wait, but only before the first byte.
ReadResult read_exact(int fd, std::span<std::uint8_t> buf, std::optional<Clock::time_point> deadline,
                      int wake_fd = -1);

} // namespace vacdaq::modbus::detail
