#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vacdaq {

// Root of every error thrown by the library. The subclasses map onto the
// error kinds the CLI turns into exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Codec errors
class EncodeError : public Error {
public:
    using Error::Error;
};

class FramingError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

// The peer used a function code this stack does not implement. This is a
// local decode failure, not a device's IllegalFunction exception.
class UnsupportedFunctionError : public ProtocolError {
public:
    UnsupportedFunctionError(std::uint8_t function, const std::string& what)
        : ProtocolError(what), function_(function) {}
    std::uint8_t function() const noexcept { return function_; }

private:
    std::uint8_t function_;
};

// Transport errors
class TransportError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public TransportError {
public:
    using TransportError::TransportError;
};

} // namespace vacdaq
