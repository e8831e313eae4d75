#pragma once

#include "vacdaq/daq/pipeline.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace vacdaq::daq {

inline constexpr std::string_view kCsvHeader = "timestamp,channel,raw_count,voltage_V,pressure,unit,status,clamped";

/// 2024-01-01T00:00:00.000Z
std::string format_timestamp(Timestamp ts);
/// Accepts with or without milliseconds. Throws ConfigError.
Timestamp parse_timestamp(std::string_view text);

/// Four significant digits, exponent without padding: 1.010e-6.
std::string format_pressure(double p);
/// Five decimals: 3.19988.
std::string format_voltage(double v);

std::string format_row(const PressureSample& s);
/// Inverse of format_row. Throws ConfigError on a malformed row.
PressureSample parse_row(std::string_view line);

std::string format_comment(Timestamp ts, std::string_view kind, std::string_view message);

// Append-only CSV log. Each call writes its whole block with one write(2)
// on an O_APPEND descriptor, so concurrent readers only see complete rows.
class CsvLog {
public:
    explicit CsvLog(std::filesystem::path path);
    ~CsvLog();
    CsvLog(const CsvLog&) = delete;
    CsvLog& operator=(const CsvLog&) = delete;

    /// Throws IoError.
    void append(std::span<const PressureSample> samples);
    void append_comment(Timestamp ts, std::string_view kind, std::string_view message);
    void close() noexcept;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void open();
    void write_block(const std::string& block);

    std::filesystem::path path_;
    int fd_ = -1;
};

} // namespace vacdaq::daq
