#include "vacdaq/daq/csv.hpp"

#include "vacdaq/error.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <vector>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

namespace vacdaq::daq {

std::string format_timestamp(Timestamp ts) {
    const auto ms = ts.time_since_epoch().count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    ::gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

Timestamp parse_timestamp(std::string_view text) {
    std::tm tm{};
    int ms = 0;
    const std::string s(text);
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &consumed) != 6)
        throw ConfigError("bad timestamp '" + s + "'");
    std::string_view rest = std::string_view(s).substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == '.') {
        if (rest.size() < 4)
            throw ConfigError("bad timestamp '" + s + "'");
        const auto [p, ec] = std::from_chars(rest.data() + 1, rest.data() + 4, ms);
        if (ec != std::errc{} || p != rest.data() + 4)
            throw ConfigError("bad timestamp '" + s + "'");
        rest.remove_prefix(4);
    }
    if (rest != "Z")
        throw ConfigError("timestamp '" + s + "' must be UTC (Z)");
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t secs = ::timegm(&tm);
    return Timestamp(std::chrono::milliseconds(static_cast<std::int64_t>(secs) * 1000 + ms));
}

std::string format_pressure(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", p);
    // 1.010e-06 -> 1.010e-6, 1.028e+00 -> 1.028e0
    std::string s(buf);
    const auto e = s.find('e');
    if (e == std::string::npos)
        return s; // inf, nan
    std::string mant = s.substr(0, e);
    std::string exp = s.substr(e + 1);
    std::string sign;
    if (!exp.empty() && (exp[0] == '+' || exp[0] == '-')) {
        if (exp[0] == '-')
            sign = "-";
        exp.erase(0, 1);
    }
    const auto nz = exp.find_first_not_of('0');
    exp = nz == std::string::npos ? "0" : exp.substr(nz);
    if (exp == "0")
        sign.clear();
    return mant + "e" + sign + exp;
}

std::string format_voltage(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5f", v);
    return buf;
}

std::string format_row(const PressureSample& s) {
    std::string row = format_timestamp(s.timestamp);
    row += ',';
    row += std::to_string(s.channel);
    row += ',';
    row += std::to_string(s.raw_count);
    row += ',';
    row += format_voltage(s.voltage);
    row += ',';
    row += format_pressure(s.pressure);
    row += ',';
    row += vacphys::unit_name(s.unit);
    row += ',';
    row += status_name(s.status);
    row += ',';
    row += s.clamped ? "true" : "false";
    return row;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t at = 0;
    while (true) {
        const auto comma = line.find(',', at);
        out.push_back(line.substr(at, comma == std::string_view::npos ? std::string_view::npos : comma - at));
        if (comma == std::string_view::npos)
            break;
        at = comma + 1;
    }
    return out;
}

template <class T>
T parse_int(std::string_view f, std::string_view what) {
    T v{};
    const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc{} || p != f.data() + f.size())
        throw ConfigError("bad " + std::string(what) + " '" + std::string(f) + "'");
    return v;
}

double parse_double(std::string_view f, std::string_view what) {
    const std::string s(f);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw ConfigError("bad " + std::string(what) + " '" + s + "'");
    return v;
}

} // namespace

PressureSample parse_row(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
        line.remove_suffix(1);
    const auto f = split(line);
    if (f.size() != 8)
        throw ConfigError("expected 8 fields, got " + std::to_string(f.size()));
    PressureSample s;
    s.timestamp = parse_timestamp(f[0]);
    s.channel = parse_int<std::size_t>(f[1], "channel");
    s.raw_count = parse_int<std::uint16_t>(f[2], "raw_count");
    s.voltage = parse_double(f[3], "voltage");
    s.pressure = parse_double(f[4], "pressure");
    s.unit = vacphys::parse_unit(f[5]);
    s.status = parse_status(f[6]);
    if (f[7] == "true")
        s.clamped = true;
    else if (f[7] == "false")
        s.clamped = false;
    else
        throw ConfigError("bad clamped flag '" + std::string(f[7]) + "'");
    return s;
}

std::string format_comment(Timestamp ts, std::string_view kind, std::string_view message) {
    std::string line = "# " + format_timestamp(ts) + " " + std::string(kind) + " ";
    // keep it one line
    for (char c : message)
        line += (c == '\n' || c == '\r') ? ' ' : c;
    return line;
}

CsvLog::CsvLog(std::filesystem::path path) : path_(std::move(path)) { open(); }

CsvLog::~CsvLog() { close(); }

void CsvLog::open() {
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0)
        throw IoError("cannot open log " + path_.string() + ": " + std::strerror(errno));
    struct stat st {};
    if (::fstat(fd_, &st) == 0 && st.st_size == 0)
        write_block(std::string(kCsvHeader) + "\n");
}

void CsvLog::close() noexcept {
    if (fd_ >= 0) {
        ::fsync(fd_);
        ::close(fd_);
    }
    fd_ = -1;
}

void CsvLog::write_block(const std::string& block) {
    if (fd_ < 0)
        open();
    const ssize_t n = ::write(fd_, block.data(), block.size());
    if (n < 0)
        throw IoError("write to " + path_.string() + " failed: " + std::strerror(errno));
    if (static_cast<std::size_t>(n) != block.size())
        throw IoError("short write to " + path_.string());
}

void CsvLog::append(std::span<const PressureSample> samples) {
    if (samples.empty())
        return;
    std::string block;
    for (const auto& s : samples) {
        block += format_row(s);
        block += '\n';
    }
    write_block(block);
}

void CsvLog::append_comment(Timestamp ts, std::string_view kind, std::string_view message) {
    write_block(format_comment(ts, kind, message) + "\n");
}

} // namespace vacdaq::daq
