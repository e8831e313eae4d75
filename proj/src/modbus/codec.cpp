#include "vacdaq/modbus/codec.hpp"

#include "vacdaq/error.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <type_traits>

namespace vacdaq::modbus {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string hex8(std::uint8_t v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02XH", v);
    return buf;
}

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    void finish() const {
        if (pos_ != in_.size())
            throw FramingError("PDU has " + std::to_string(in_.size() - pos_) + " trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n)
            throw FramingError("PDU truncated");
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

void check_count(std::uint16_t count, std::uint16_t limit, const char* what) {
    if (count < 1 || count > limit)
        throw EncodeError(std::string(what) + " count " + std::to_string(count) + " outside 1.." +
                          std::to_string(limit));
}

std::size_t packed_size(std::size_t bits) { return (bits + 7) / 8; }

std::vector<std::uint16_t> read_registers(Reader& r, std::size_t byte_count) {
    if (byte_count % 2 != 0)
        throw FramingError("register byte count must be even");
    std::vector<std::uint16_t> values(byte_count / 2);
    for (auto& v : values)
        v = r.u16();
    return values;
}

} // namespace

bool is_supported_function(std::uint8_t function) noexcept {
    switch (function) {
    case 0x01:
    case 0x03:
    case 0x04:
    case 0x05:
    case 0x06:
    case 0x0F:
    case 0x10:
    case 0x11:
        return true;
    default:
        return false;
    }
}

bool is_known_exception(std::uint8_t code) noexcept {
    return (code >= 0x01 && code <= 0x08) || code == 0x0A || code == 0x0B || code == 0xFF;
}

std::string_view exception_name(ExceptionCode code) noexcept {
    switch (code) {
    case ExceptionCode::illegal_function: return "IllegalFunction";
    case ExceptionCode::illegal_data_address: return "IllegalDataAddress";
    case ExceptionCode::illegal_data_value: return "IllegalDataValue";
    case ExceptionCode::device_failure: return "DeviceFailure";
    case ExceptionCode::acknowledge: return "Acknowledge";
    case ExceptionCode::device_busy: return "DeviceBusy";
    case ExceptionCode::negative_acknowledge: return "NegativeAcknowledge";
    case ExceptionCode::memory_parity_error: return "MemoryParityError";
    case ExceptionCode::gateway_path_unavailable: return "GatewayPathUnavailable";
    case ExceptionCode::gateway_target_failed: return "GatewayTargetFailedToRespond";
    case ExceptionCode::extended_exception: return "ExtendedException";
    }
    return "Unknown";
}

std::uint8_t function_of(const RequestPdu& pdu) noexcept {
    return std::visit(overloaded{
                          [](const ReadCoilsRequest&) { return std::uint8_t{0x01}; },
                          [](const ReadHoldingRegistersRequest&) { return std::uint8_t{0x03}; },
                          [](const ReadInputRegistersRequest&) { return std::uint8_t{0x04}; },
                          [](const ForceSingleCoilRequest&) { return std::uint8_t{0x05}; },
                          [](const PresetSingleRegisterRequest&) { return std::uint8_t{0x06}; },
                          [](const ForceMultipleCoilsRequest&) { return std::uint8_t{0x0F}; },
                          [](const PresetMultipleRegistersRequest&) { return std::uint8_t{0x10}; },
                          [](const ReportSlaveIdRequest&) { return std::uint8_t{0x11}; },
                      },
                      pdu);
}

std::uint8_t function_of(const ResponsePdu& pdu) noexcept {
    return std::visit(overloaded{
                          [](const ReadCoilsResponse&) { return std::uint8_t{0x01}; },
                          [](const ReadHoldingRegistersResponse&) { return std::uint8_t{0x03}; },
                          [](const ReadInputRegistersResponse&) { return std::uint8_t{0x04}; },
                          [](const ForceSingleCoilResponse&) { return std::uint8_t{0x05}; },
                          [](const PresetSingleRegisterResponse&) { return std::uint8_t{0x06}; },
                          [](const ForceMultipleCoilsResponse&) { return std::uint8_t{0x0F}; },
                          [](const PresetMultipleRegistersResponse&) { return std::uint8_t{0x10}; },
                          [](const ReportSlaveIdResponse&) { return std::uint8_t{0x11}; },
                          [](const ExceptionResponse& e) { return e.function; },
                      },
                      pdu);
}

std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits) {
    std::vector<std::uint8_t> out(packed_size(bits.size()), 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i])
            out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return out;
}

std::vector<bool> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count) {
    if (count > bytes.size() * 8)
        throw FramingError("bit count " + std::to_string(count) + " exceeds payload of " +
                           std::to_string(bytes.size()) + " bytes");
    std::vector<bool> bits(count);
    for (std::size_t i = 0; i < count; ++i)
        bits[i] = (bytes[i / 8] >> (i % 8)) & 1u;
    return bits;
}

ResponsePdu build_exception(std::uint8_t request_function, ExceptionCode code) {
    if (request_function >= kExceptionFlag)
        throw DomainError("function " + hex8(request_function) + " already has the exception bit set");
    return ExceptionResponse{static_cast<std::uint8_t>(request_function | kExceptionFlag), code};
}

std::vector<std::uint8_t> encode_pdu(const RequestPdu& pdu) {
    Writer w;
    w.u8(function_of(pdu));
    std::visit(overloaded{
                   [&](const ReadCoilsRequest& r) {
                       check_count(r.count, kMaxCoils, "coil");
                       w.u16(r.start);
                       w.u16(r.count);
                   },
                   [&](const ReadHoldingRegistersRequest& r) {
                       check_count(r.count, kMaxRegisters, "register");
                       w.u16(r.start);
                       w.u16(r.count);
                   },
                   [&](const ReadInputRegistersRequest& r) {
                       check_count(r.count, kMaxRegisters, "register");
                       w.u16(r.start);
                       w.u16(r.count);
                   },
                   [&](const ForceSingleCoilRequest& r) {
                       if (!r.valid_value())
                           throw EncodeError("force single coil value must be FF00H or 0000H");
                       w.u16(r.address);
                       w.u16(r.raw_value);
                   },
                   [&](const PresetSingleRegisterRequest& r) {
                       w.u16(r.address);
                       w.u16(r.value);
                   },
                   [&](const ForceMultipleCoilsRequest& r) {
                       check_count(r.count, kMaxCoils, "coil");
                       if (r.bits.size() != r.count)
                           throw EncodeError("coil count does not match the number of bits");
                       const auto packed = pack_bits(r.bits);
                       w.u16(r.start);
                       w.u16(r.count);
                       w.u8(static_cast<std::uint8_t>(packed.size()));
                       w.bytes(packed);
                   },
                   [&](const PresetMultipleRegistersRequest& r) {
                       if (r.values.size() > kMaxRegisters)
                           throw EncodeError("too many registers");
                       const auto count = static_cast<std::uint16_t>(r.values.size());
                       check_count(count, kMaxRegisters, "register");
                       w.u16(r.start);
                       w.u16(count);
                       w.u8(static_cast<std::uint8_t>(2 * count));
                       for (auto v : r.values)
                           w.u16(v);
                   },
                   [&](const ReportSlaveIdRequest&) {},
               },
               pdu);
    return w.take();
}

std::vector<std::uint8_t> encode_pdu(const ResponsePdu& pdu) {
    Writer w;
    w.u8(function_of(pdu));
    std::visit(overloaded{
                   [&](const ReadCoilsResponse& r) {
                       if (r.coil_bytes.empty() || r.coil_bytes.size() > packed_size(kMaxCoils))
                           throw EncodeError("coil status byte count out of range");
                       w.u8(static_cast<std::uint8_t>(r.coil_bytes.size()));
                       w.bytes(r.coil_bytes);
                   },
                   [&](const ReadHoldingRegistersResponse& r) {
                       check_count(static_cast<std::uint16_t>(std::min<std::size_t>(r.values.size(), 0xFFFF)),
                                   kMaxRegisters, "register");
                       w.u8(static_cast<std::uint8_t>(2 * r.values.size()));
                       for (auto v : r.values)
                           w.u16(v);
                   },
                   [&](const ReadInputRegistersResponse& r) {
                       check_count(static_cast<std::uint16_t>(std::min<std::size_t>(r.values.size(), 0xFFFF)),
                                   kMaxRegisters, "register");
                       w.u8(static_cast<std::uint8_t>(2 * r.values.size()));
                       for (auto v : r.values)
                           w.u16(v);
                   },
                   [&](const ForceSingleCoilResponse& r) {
                       if (r.raw_value != kCoilOn && r.raw_value != kCoilOff)
                           throw EncodeError("force single coil value must be FF00H or 0000H");
                       w.u16(r.address);
                       w.u16(r.raw_value);
                   },
                   [&](const PresetSingleRegisterResponse& r) {
                       w.u16(r.address);
                       w.u16(r.value);
                   },
                   [&](const ForceMultipleCoilsResponse& r) {
                       w.u16(r.start);
                       w.u16(r.count);
                   },
                   [&](const PresetMultipleRegistersResponse& r) {
                       w.u16(r.start);
                       w.u16(r.count);
                   },
                   [&](const ReportSlaveIdResponse& r) {
                       if (r.payload.size() > 0xFF)
                           throw EncodeError("slave id payload exceeds 255 bytes");
                       w.u8(static_cast<std::uint8_t>(r.payload.size()));
                       w.bytes(r.payload);
                   },
                   [&](const ExceptionResponse& r) {
                       // any function may be refused, including ones this stack lacks
                       if (!(r.function & kExceptionFlag) || r.function == kExceptionFlag)
                           throw EncodeError("exception function " + hex8(r.function) + " lacks the exception bit");
                       if (!is_known_exception(static_cast<std::uint8_t>(r.code)))
                           throw EncodeError("unknown exception code");
                       w.u8(static_cast<std::uint8_t>(r.code));
                   },
               },
               pdu);
    return w.take();
}

RequestPdu decode_request_pdu(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const std::uint8_t fn = r.u8();
    RequestPdu out;
    switch (fn) {
    case 0x01: {
        ReadCoilsRequest q;
        q.start = r.u16();
        q.count = r.u16();
        out = q;
        break;
    }
    case 0x03: {
        ReadHoldingRegistersRequest q;
        q.start = r.u16();
        q.count = r.u16();
        out = q;
        break;
    }
    case 0x04: {
        ReadInputRegistersRequest q;
        q.start = r.u16();
        q.count = r.u16();
        out = q;
        break;
    }
    case 0x05: {
        ForceSingleCoilRequest q;
        q.address = r.u16();
        q.raw_value = r.u16();
        out = q;
        break;
    }
    case 0x06: {
        PresetSingleRegisterRequest q;
        q.address = r.u16();
        q.value = r.u16();
        out = q;
        break;
    }
    case 0x0F: {
        ForceMultipleCoilsRequest q;
        q.start = r.u16();
        q.count = r.u16();
        const std::uint8_t byte_count = r.u8();
        if (byte_count != packed_size(q.count))
            throw FramingError("force multiple coils byte count does not match coil count");
        q.bits = unpack_bits(r.bytes(byte_count), q.count);
        out = std::move(q);
        break;
    }
    case 0x10: {
        PresetMultipleRegistersRequest q;
        q.start = r.u16();
        const std::uint16_t count = r.u16();
        const std::uint8_t byte_count = r.u8();
        if (byte_count != 2u * count)
            throw FramingError("preset multiple registers byte count does not match register count");
        q.values = read_registers(r, byte_count);
        out = std::move(q);
        break;
    }
    case 0x11:
        out = ReportSlaveIdRequest{};
        break;
    default:
        throw UnsupportedFunctionError(fn, "unsupported function code " + hex8(fn));
    }
    r.finish();
    return out;
}

ResponsePdu decode_response_pdu(std::span<const std::uint8_t> bytes, std::optional<std::uint8_t> expected_function) {
    Reader r(bytes);
    const std::uint8_t fn = r.u8();
    const std::uint8_t base = fn & 0x7F;
    if (!(fn & kExceptionFlag) && !is_supported_function(base))
        throw UnsupportedFunctionError(fn, "unsupported function code " + hex8(fn));
    if (expected_function && base != *expected_function)
        throw ProtocolError("response function " + hex8(fn) + " does not answer request " + hex8(*expected_function));

    ResponsePdu out;
    if (fn & kExceptionFlag) {
        const std::uint8_t code = r.u8();
        if (!is_known_exception(code))
            throw ProtocolError("unknown exception code " + hex8(code));
        out = ExceptionResponse{fn, static_cast<ExceptionCode>(code)};
        r.finish();
        return out;
    }

    switch (fn) {
    case 0x01: {
        const std::uint8_t byte_count = r.u8();
        auto data = r.bytes(byte_count);
        out = ReadCoilsResponse{{data.begin(), data.end()}};
        break;
    }
    case 0x03: {
        const std::uint8_t byte_count = r.u8();
        out = ReadHoldingRegistersResponse{read_registers(r, byte_count)};
        break;
    }
    case 0x04: {
        const std::uint8_t byte_count = r.u8();
        out = ReadInputRegistersResponse{read_registers(r, byte_count)};
        break;
    }
    case 0x05: {
        ForceSingleCoilResponse a;
        a.address = r.u16();
        a.raw_value = r.u16();
        out = a;
        break;
    }
    case 0x06: {
        PresetSingleRegisterResponse a;
        a.address = r.u16();
        a.value = r.u16();
        out = a;
        break;
    }
    case 0x0F: {
        ForceMultipleCoilsResponse a;
        a.start = r.u16();
        a.count = r.u16();
        out = a;
        break;
    }
    case 0x10: {
        PresetMultipleRegistersResponse a;
        a.start = r.u16();
        a.count = r.u16();
        out = a;
        break;
    }
    case 0x11: {
        const std::uint8_t byte_count = r.u8();
        auto data = r.bytes(byte_count);
        out = ReportSlaveIdResponse{{data.begin(), data.end()}};
        break;
    }
    }
    r.finish();
    return out;
}

MbapHeader decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMbapSize)
        throw FramingError("MBAP header truncated");
    Reader r(bytes.first(kMbapSize));
    MbapHeader h;
    h.transaction_id = r.u16();
    h.protocol_id = r.u16();
    h.length = r.u16();
    h.unit_id = r.u8();
    if (h.protocol_id != 0)
        throw ProtocolError("protocol identifier " + std::to_string(h.protocol_id) + " is not Modbus (0)");
    if (h.length < 2 || h.length > kMaxLengthField)
        throw FramingError("MBAP length " + std::to_string(h.length) + " out of range");
    return h;
}

std::vector<std::uint8_t> encode_frame(const Adu& adu) {
    if (adu.header.protocol_id != 0)
        throw EncodeError("protocol identifier must be 0");
    const auto pdu = std::visit([](const auto& p) { return encode_pdu(p); }, adu.pdu);
    if (pdu.size() + 1 > kMaxLengthField)
        throw EncodeError("PDU too large for one ADU");
    Writer w;
    w.u16(adu.header.transaction_id);
    w.u16(0);
    w.u16(static_cast<std::uint16_t>(pdu.size() + 1));
    w.u8(adu.header.unit_id);
    w.bytes(pdu);
    return w.take();
}

Adu decode_frame(std::span<const std::uint8_t> bytes, Direction direction,
                 std::optional<std::uint8_t> expected_function) {
    const MbapHeader header = decode_header(bytes);
    if (bytes.size() != static_cast<std::size_t>(header.length) + 6)
        throw FramingError("frame holds " + std::to_string(bytes.size()) + " bytes but MBAP length says " +
                           std::to_string(header.length + 6));
    const auto pdu = bytes.subspan(kMbapSize);
    Adu adu{header, RequestPdu{}};
    if (direction == Direction::request)
        adu.pdu = decode_request_pdu(pdu);
    else
        adu.pdu = decode_response_pdu(pdu, expected_function);
    return adu;
}

} // namespace vacdaq::modbus
