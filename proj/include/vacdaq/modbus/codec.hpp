#pragma once

// Modbus TCP/IP application data units: 7-byte MBAP header followed by the
// PDU, big-endian throughout, no checksum.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace vacdaq::modbus {

inline constexpr std::size_t kMbapSize = 7;
inline constexpr std::uint16_t kMaxCoils = 2000;
inline constexpr std::uint16_t kMaxRegisters = 125;
inline constexpr std::uint16_t kCoilOn = 0xFF00;
inline constexpr std::uint16_t kCoilOff = 0x0000;
inline constexpr std::uint8_t kExceptionFlag = 0x80;
// Largest MBAP length field either side will accept (unit id + PDU).
inline constexpr std::uint16_t kMaxLengthField = 260;

enum class FunctionCode : std::uint8_t {
    read_coils = 0x01,
    read_holding_registers = 0x03,
    read_input_registers = 0x04,
    force_single_coil = 0x05,
    preset_single_register = 0x06,
    force_multiple_coils = 0x0F,
    preset_multiple_registers = 0x10,
    report_slave_id = 0x11,
};

bool is_supported_function(std::uint8_t function) noexcept;

enum class ExceptionCode : std::uint8_t {
    illegal_function = 0x01,
    illegal_data_address = 0x02,
    illegal_data_value = 0x03,
    device_failure = 0x04,
    acknowledge = 0x05,
    device_busy = 0x06,
    negative_acknowledge = 0x07,
    memory_parity_error = 0x08,
    gateway_path_unavailable = 0x0A,
    gateway_target_failed = 0x0B,
    extended_exception = 0xFF,
};

bool is_known_exception(std::uint8_t code) noexcept;
std::string_view exception_name(ExceptionCode code) noexcept;

struct MbapHeader {
    std::uint16_t transaction_id = 0;
    std::uint16_t protocol_id = 0;
    std::uint16_t length = 0; // filled in by the encoder
    std::uint8_t unit_id = 0xFF;

    bool operator==(const MbapHeader&) const = default;
};

// Requests

struct ReadCoilsRequest {
    std::uint16_t start = 0;
    std::uint16_t count = 0;
    bool operator==(const ReadCoilsRequest&) const = default;
};

struct ReadHoldingRegistersRequest {
    std::uint16_t start = 0;
    std::uint16_t count = 0;
    bool operator==(const ReadHoldingRegistersRequest&) const = default;
};

struct ReadInputRegistersRequest {
    std::uint16_t start = 0;
    std::uint16_t count = 0;
    bool operator==(const ReadInputRegistersRequest&) const = default;
};

// raw_value as seen on the wire; only FF00H and 0000H may be encoded. A
// decoded request can carry anything so a server can answer IllegalDataValue.
struct ForceSingleCoilRequest {
    std::uint16_t address = 0;
    std::uint16_t raw_value = kCoilOff;

    static ForceSingleCoilRequest make(std::uint16_t address, bool on) {
        return {address, on ? kCoilOn : kCoilOff};
    }
    bool valid_value() const noexcept { return raw_value == kCoilOn || raw_value == kCoilOff; }
    bool on() const noexcept { return raw_value == kCoilOn; }
    bool operator==(const ForceSingleCoilRequest&) const = default;
};

struct PresetSingleRegisterRequest {
    std::uint16_t address = 0;
    std::uint16_t value = 0;
    bool operator==(const PresetSingleRegisterRequest&) const = default;
};

struct ForceMultipleCoilsRequest {
    std::uint16_t start = 0;
    std::uint16_t count = 0;
    std::vector<bool> bits; // bits.size() == count
    bool operator==(const ForceMultipleCoilsRequest&) const = default;
};

struct PresetMultipleRegistersRequest {
    std::uint16_t start = 0;
    std::vector<std::uint16_t> values;
    bool operator==(const PresetMultipleRegistersRequest&) const = default;
};

struct ReportSlaveIdRequest {
    bool operator==(const ReportSlaveIdRequest&) const = default;
};

using RequestPdu = std::variant<ReadCoilsRequest, ReadHoldingRegistersRequest, ReadInputRegistersRequest,
                                ForceSingleCoilRequest, PresetSingleRegisterRequest, ForceMultipleCoilsRequest,
                                PresetMultipleRegistersRequest, ReportSlaveIdRequest>;

// Responses

struct ReadCoilsResponse {
    std::vector<std::uint8_t> coil_bytes; // packed, see pack_bits
    bool operator==(const ReadCoilsResponse&) const = default;
};

struct ReadHoldingRegistersResponse {
    std::vector<std::uint16_t> values;
    bool operator==(const ReadHoldingRegistersResponse&) const = default;
};

struct ReadInputRegistersResponse {
    std::vector<std::uint16_t> values;
    bool operator==(const ReadInputRegistersResponse&) const = default;
};

struct ForceSingleCoilResponse {
    std::uint16_t address = 0;
    std::uint16_t raw_value = kCoilOff;
    bool operator==(const ForceSingleCoilResponse&) const = default;
};

struct PresetSingleRegisterResponse {
    std::uint16_t address = 0;
    std::uint16_t value = 0;
    bool operator==(const PresetSingleRegisterResponse&) const = default;
};

struct ForceMultipleCoilsResponse {
    std::uint16_t start = 0;
    std::uint16_t count = 0;
    bool operator==(const ForceMultipleCoilsResponse&) const = default;
};

struct PresetMultipleRegistersResponse {
    std::uint16_t start = 0;
    std::uint16_t count = 0;
    bool operator==(const PresetMultipleRegistersResponse&) const = default;
};

// Device-defined payload following the byte count.
struct ReportSlaveIdResponse {
    std::vector<std::uint8_t> payload;
    bool operator==(const ReportSlaveIdResponse&) const = default;
};

struct ExceptionResponse {
    std::uint8_t function = 0; // request function | 0x80
    ExceptionCode code = ExceptionCode::illegal_function;
    bool operator==(const ExceptionResponse&) const = default;
};

using ResponsePdu = std::variant<ReadCoilsResponse, ReadHoldingRegistersResponse, ReadInputRegistersResponse,
                                 ForceSingleCoilResponse, PresetSingleRegisterResponse, ForceMultipleCoilsResponse,
                                 PresetMultipleRegistersResponse, ReportSlaveIdResponse, ExceptionResponse>;

struct Adu {
    MbapHeader header;
    std::variant<RequestPdu, ResponsePdu> pdu;
    bool operator==(const Adu&) const = default;
};

enum class Direction { request, response };

std::uint8_t function_of(const RequestPdu& pdu) noexcept;
std::uint8_t function_of(const ResponsePdu& pdu) noexcept;

inline bool is_exception(const ResponsePdu& pdu) noexcept {
    return std::holds_alternative<ExceptionResponse>(pdu);
}

std::vector<std::uint8_t> encode_pdu(const RequestPdu& pdu);
std::vector<std::uint8_t> encode_pdu(const ResponsePdu& pdu);

RequestPdu decode_request_pdu(std::span<const std::uint8_t> bytes);
ResponsePdu decode_response_pdu(std::span<const std::uint8_t> bytes,
                                std::optional<std::uint8_t> expected_function = std::nullopt);

/// Header length is always recomputed here; the caller's value is ignored.
std::vector<std::uint8_t> encode_frame(const Adu& adu);

/// Decodes one complete ADU (exactly length + 6 bytes).
Adu decode_frame(std::span<const std::uint8_t> bytes, Direction direction,
                 std::optional<std::uint8_t> expected_function = std::nullopt);

/// Decodes and validates the 7-byte MBAP header on its own, so a transport
/// can learn how many more bytes belong to the frame.
MbapHeader decode_header(std::span<const std::uint8_t> bytes);

/// Lowest-addressed coil goes to bit 0 of the first byte; unused high bits zero.
std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits);
std::vector<bool> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count);

/// Exception PDU for a request function (< 80H); throws DomainError otherwise.
ResponsePdu build_exception(std::uint8_t request_function, ExceptionCode code);

} // namespace vacdaq::modbus
