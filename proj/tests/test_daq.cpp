#include <doctest.h>

#include "support/bench.hpp"
#include "vacdaq/adc.hpp"
#include "vacdaq/daq/csv.hpp"
#include "vacdaq/daq/engine.hpp"
#include "vacdaq/daq/pipeline.hpp"
#include "vacdaq/error.hpp"
#include "vacdaq/gauge.hpp"

#include <cmath>
#include <random>
#include <set>
#include <thread>

using namespace vacdaq;
using namespace vacdaq::daq;
using namespace std::chrono_literals;
using vacdaq::testing::Bench;
using vacdaq::testing::TempDir;

namespace {

const Timestamp kT0 = parse_timestamp("2024-01-01T00:00:00Z");

ChannelConfig ch(std::size_t index, double threshold = 0.0) {
    ChannelConfig c;
    c.index = index;
    c.threshold_voltage = threshold;
    c.label = "CH" + std::to_string(index);
    return c;
}

PressureSample at_volts(double v, std::size_t channel = 1) {
    return make_sample(kT0, ch(channel), adc::volts_to_count(v));
}

// Rows only: header and comments dropped.
std::vector<PressureSample> rows_in(const std::filesystem::path& p) {
    std::vector<PressureSample> out;
    for (const auto& line : testing::lines_of(testing::slurp(p)))
        if (!line.empty() && line[0] != '#' && line != kCsvHeader)
            out.push_back(parse_row(line));
    return out;
}

template <class Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = 3000ms) {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
        if (pred())
            return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

} // namespace

TEST_CASE("convert_count examples") {
    const auto u = convert_count(15000, PressureUnit::mbar);
    CHECK(u.voltage == doctest::Approx(-5.42264).epsilon(1e-6));
    CHECK(u.range == SignalRange::underrange);

    const auto mid = convert_count(32770, PressureUnit::mbar);
    CHECK(mid.voltage == 0.0);
    CHECK(mid.pressure == doctest::Approx(std::pow(10.0, -11.33)).epsilon(1e-9));
    CHECK(mid.range == SignalRange::underrange);

    const auto hi = convert_count(55066, PressureUnit::mbar);
    CHECK(hi.voltage == doctest::Approx(6.80378).epsilon(1e-6));
    CHECK(hi.pressure == doctest::Approx(1.0278).epsilon(1e-3));
    CHECK(hi.range == SignalRange::in_range);

    const auto ch1 = convert_count(43256, PressureUnit::mbar);
    CHECK(ch1.voltage == doctest::Approx(3.19988).epsilon(1e-6));
    CHECK(ch1.pressure == doctest::Approx(1.010e-6).epsilon(0.02));

    CHECK(convert_count(65535, PressureUnit::mbar).range == SignalRange::overrange);
    // other units use their own offset
    CHECK(convert_count(55066, PressureUnit::torr).pressure ==
          doctest::Approx(gauge::extrapolated_pressure(hi.voltage, gauge::constants_for(PressureUnit::torr))));
}

TEST_CASE("convert_count is total on 16-bit input") {
    for (std::uint32_t raw = 0; raw <= 0xFFFF; raw += 7) {
        const auto c = convert_count(static_cast<std::uint16_t>(raw), PressureUnit::pascal);
        REQUIRE(std::isfinite(c.voltage));
        REQUIRE(std::isfinite(c.pressure));
        REQUIRE(c.pressure > 0.0);
    }
}

TEST_CASE("make_sample keeps the raw count and flags disabled channels") {
    auto c = ch(3);
    const auto s = make_sample(kT0, c, 43256);
    CHECK(s.channel == 3);
    CHECK(s.raw_count == 43256);
    CHECK(s.status == SampleStatus::ok);
    c.enabled = false;
    CHECK(make_sample(kT0, c, 43256).status == SampleStatus::disabled);
    CHECK(make_sample(kT0, ch(1), 15000).status == SampleStatus::underrange);
}

TEST_CASE("threshold clamp") {
    const auto cfg = ch(1, 2.0);
    const auto threshold_p = threshold_pressure(cfg);
    CHECK(threshold_p == doctest::Approx(1.00925e-8).epsilon(1e-4));

    SUBCASE("below threshold is raised to it") {
        const auto raw = adc::volts_to_count(1.5);
        CHECK(raw == 37686);
        const auto s = apply_threshold(make_sample(kT0, cfg, raw), cfg);
        CHECK(s.voltage == 2.0);
        CHECK(s.pressure == threshold_p);
        CHECK(s.status == SampleStatus::clamped);
        CHECK(s.clamped);
        CHECK(s.raw_count == 37686);
        CHECK(format_row(s) == "2024-01-01T00:00:00.000Z,1,37686,2.00000,1.009e-8,mbar,clamped,true");
    }
    SUBCASE("above threshold is untouched") {
        const auto in = at_volts(3.2);
        const auto s = apply_threshold(in, cfg);
        CHECK(s == in);
        CHECK_FALSE(s.clamped);
        CHECK(format_voltage(s.voltage) == "3.19988"); // nearest count to 3.2 V
    }
    SUBCASE("exactly at threshold clamps") {
        auto s = make_sample(kT0, cfg, adc::volts_to_count(2.0));
        s.voltage = 2.0;
        CHECK(apply_threshold(s, cfg).clamped);
    }
    SUBCASE("disabled samples pass through") {
        auto off = cfg;
        off.enabled = false;
        const auto s = make_sample(kT0, off, 37686);
        CHECK(apply_threshold(s, off) == s);
    }
}

TEST_CASE("clamp is idempotent") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> raw(0, 0xFFFF);
    std::uniform_real_distribution<double> thr(0.0, 10.0);
    for (int i = 0; i < 5000; ++i) {
        const auto cfg = ch(1 + i % 6, thr(rng));
        const auto once = apply_threshold(make_sample(kT0, cfg, static_cast<std::uint16_t>(raw(rng))), cfg);
        REQUIRE(apply_threshold(once, cfg) == once);
        if (once.clamped)
            REQUIRE(once.voltage == cfg.threshold_voltage);
    }
}

TEST_CASE("channel config validation") {
    CHECK_NOTHROW(ch(6, 10.0).validate());
    CHECK_THROWS_AS(ch(0).validate(), ConfigError);
    CHECK_THROWS_AS(ch(7).validate(), ConfigError);
    CHECK_THROWS_AS(ch(1, -0.1).validate(), RangeError);
    CHECK_THROWS_AS(ch(1, 10.5).validate(), RangeError);
}

TEST_CASE("disconnect detection") {
    DisconnectDetector det;
    auto poll = [&](double volts) {
        std::vector<PressureSample> v{at_volts(volts)};
        det.update(v);
        return v[0].status;
    };

    SUBCASE("three consecutive 0 V polls") {
        CHECK(poll(0.0) == SampleStatus::underrange);
        CHECK(poll(0.0) == SampleStatus::underrange);
        CHECK(poll(0.0) == SampleStatus::disconnected);
        CHECK(det.disconnected(1));
        CHECK(poll(0.0) == SampleStatus::disconnected);
        CHECK(poll(3.2) == SampleStatus::ok);
        CHECK_FALSE(det.disconnected(1));
    }
    SUBCASE("two then live never flags") {
        CHECK(poll(0.0) != SampleStatus::disconnected);
        CHECK(poll(0.0) != SampleStatus::disconnected);
        CHECK(poll(3.2) == SampleStatus::ok);
        CHECK(poll(0.0) != SampleStatus::disconnected);
        CHECK(poll(0.0) != SampleStatus::disconnected);
        CHECK_FALSE(det.disconnected(1));
    }
    SUBCASE("overrides the clamp") {
        const auto cfg = ch(1, 2.0);
        for (int i = 0; i < 3; ++i) {
            std::vector<PressureSample> v{apply_threshold(at_volts(0.0), cfg)};
            det.update(v);
            if (i == 2)
                CHECK(v[0].status == SampleStatus::disconnected);
            else
                CHECK(v[0].status == SampleStatus::clamped);
        }
    }
    SUBCASE("disabled channels are skipped") {
        auto off = ch(2);
        off.enabled = false;
        for (int i = 0; i < 5; ++i) {
            std::vector<PressureSample> v{make_sample(kT0, off, adc::volts_to_count(0.0))};
            det.update(v);
            CHECK(v[0].status == SampleStatus::disabled);
        }
        CHECK_FALSE(det.disconnected(2));
    }
    SUBCASE("channels are independent") {
        for (int i = 0; i < 3; ++i) {
            std::vector<PressureSample> v{at_volts(0.0, 1), at_volts(3.0, 2)};
            det.update(v);
        }
        CHECK(det.disconnected(1));
        CHECK_FALSE(det.disconnected(2));
    }
}

TEST_CASE("CSV formatting") {
    const auto s = make_sample(kT0, ch(1), 43256);
    CHECK(format_row(s) == "2024-01-01T00:00:00.000Z,1,43256,3.19988,1.010e-6,mbar,ok,false");
    CHECK(format_pressure(1.0278) == "1.028e0");
    CHECK(format_pressure(1013.25) == "1.013e3");
    CHECK(format_pressure(4.68e-12) == "4.680e-12");
    CHECK(format_timestamp(kT0 + 1234ms) == "2024-01-01T00:00:01.234Z");
    CHECK(parse_timestamp("2024-01-01T00:00:01.234Z") == kT0 + 1234ms);
    CHECK_THROWS_AS(parse_timestamp("2024-01-01 00:00:00"), ConfigError);

    const auto c = format_comment(kT0, "poll_error", "timed out\nafter 1000 ms");
    CHECK(c.rfind("# 2024-01-01T00:00:00.000Z poll_error timed out", 0) == 0);
    CHECK(c.find('\n') == std::string::npos);
}

TEST_CASE("CSV rows parse back") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> raw(0, 0xFFFF);
    for (int i = 0; i < 2000; ++i) {
        auto cfg = ch(1 + i % 6, (i % 5) * 2.0);
        const PressureUnit units[3] = {PressureUnit::mbar, PressureUnit::torr, PressureUnit::pascal};
        cfg.unit = units[i % 3];
        cfg.enabled = i % 7 != 0;
        const auto s = apply_threshold(make_sample(kT0 + std::chrono::milliseconds(i), cfg, raw(rng)), cfg);
        const auto back = parse_row(format_row(s));
        REQUIRE(back.timestamp == s.timestamp);
        REQUIRE(back.channel == s.channel);
        REQUIRE(back.raw_count == s.raw_count);
        REQUIRE(back.unit == s.unit);
        REQUIRE(back.status == s.status);
        REQUIRE(back.clamped == s.clamped);
        REQUIRE(back.voltage == doctest::Approx(s.voltage).epsilon(1e-5));
        REQUIRE(back.pressure == doctest::Approx(s.pressure).epsilon(1e-3));
        REQUIRE(format_row(back) == format_row(s));
    }
    CHECK_THROWS_AS(parse_row("2024-01-01T00:00:00Z,1,43256"), ConfigError);
    CHECK_THROWS_AS(parse_row("2024-01-01T00:00:00Z,1,43256,3.2,1e-6,mbar,fine,false"), ConfigError);
    CHECK_THROWS_AS(parse_row("2024-01-01T00:00:00Z,1,70000,3.2,1e-6,mbar,ok,false"), ConfigError);
    CHECK(parse_row("2024-01-01T00:00:00Z,1,43256,3.19987,1.010e-6,mbar,ok,false").raw_count == 43256);
}

TEST_CASE("CSV log file") {
    TempDir dir;
    const auto path = dir / "log.csv";
    {
        CsvLog log(path);
        const std::vector<PressureSample> rows{make_sample(kT0, ch(1), 43256), make_sample(kT0, ch(2), 55066)};
        log.append(rows);
        log.append_comment(kT0, "poll_error", "timeout");
    }
    {
        CsvLog again(path); // reopening does not repeat the header
        const std::vector<PressureSample> row{make_sample(kT0, ch(1), 43256)};
        again.append(row);
    }
    const auto lines = testing::lines_of(testing::slurp(path));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == kCsvHeader);
    CHECK(lines[1] == "2024-01-01T00:00:00.000Z,1,43256,3.19988,1.010e-6,mbar,ok,false");
    CHECK(lines[2].rfind("2024-01-01T00:00:00.000Z,2,55066,6.80378,1.028e0,mbar,ok,false", 0) == 0);
    CHECK(lines[3] == "# 2024-01-01T00:00:00.000Z poll_error timeout");
    CHECK(lines[4] == lines[1]);

    CHECK_THROWS_AS(CsvLog(dir / "missing" / "log.csv"), IoError);
}

TEST_CASE("engine config parsing") {
    const auto c = parse_engine_config(R"({
        "target": "172.16.4.156:502", "unit_id": 1, "timeout_ms": 1000, "poll_interval_ms": 500,
        "log_path": "/tmp/x.csv", "serve_address": "0.0.0.0:9000",
        "channels": [{"index": 1, "threshold_voltage": 2.0, "label": "chamber"},
                     {"index": 2, "unit": "torr", "enabled": false}]
    })",
                                       "e.json");
    CHECK(c.target.host == "172.16.4.156");
    CHECK(c.target.port == 502);
    CHECK(c.poll_interval == 500ms);
    CHECK(c.register_count == 2);
    CHECK(c.channels.at(0).label == "chamber");
    CHECK(c.channels.at(0).threshold_voltage == 2.0);
    CHECK(c.channels.at(1).unit == PressureUnit::torr);
    CHECK_FALSE(c.channels.at(1).enabled);
    CHECK(c.channels.at(1).label == "CH2");
    CHECK(c.serve_address.port == 9000);

    const auto d = parse_engine_config("{}");
    CHECK(d.channels.size() == 6);
    CHECK(d.unit_id == 1);
    CHECK(d.timeout == 1000ms);
    CHECK(d.poll_interval == 1000ms);
    CHECK(d.target.to_string() == "172.16.4.156:502");

    auto message = [](std::string_view text) {
        try {
            parse_engine_config(text, "e.json");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    CHECK(message(R"({"poll_interval_ms": 5})") == "e.json.poll_interval_ms: must be within 10..3600000");
    CHECK(message(R"({"channels": [{"index": 1, "threshold_voltage": 11}]})") ==
          "e.json.channels[0].threshold_voltage: must be within 0..10 V");
    CHECK(message(R"({"channels": [{"index": 1}], "register_count": 6})").find("register_count") !=
          std::string::npos);
    CHECK(message(R"({"channels": [{"index": 1}, {"index": 1}]})").find("twice") != std::string::npos);
    CHECK(message(R"({"polling": 1})") == "e.json.polling: unknown field");
    CHECK(message(R"({"target": "host:99999"})").find("e.json.target") == 0);
    CHECK(message(R"({"channels": [{"index": 1, "unit": "furlong"}]})").find("unit") != std::string::npos);
    CHECK(message("{\n  \"unit_id\": ,\n}").find("line 2") != std::string::npos);

    const auto shipped = load_engine_config(VACDAQ_SOURCE_DIR "/config/engine.json");
    CHECK(shipped.channels.size() == 6);
    CHECK_THROWS_AS(load_engine_config("/nonexistent.json"), ConfigError);
}

TEST_CASE("poll_once sends the fetch command and converts") {
    Bench bench;
    auto cfg = bench.engine_config("unused.csv");
    modbus::ClientConfig cc;
    cc.target = cfg.target;
    cc.unit_id = cfg.unit_id;
    modbus::Client client(cc);
    std::vector<std::uint8_t> wire;
    client.set_request_observer([&](std::span<const std::uint8_t> b) { wire.assign(b.begin(), b.end()); });

    const auto samples = poll_once(client, cfg, kT0);
    REQUIRE(wire.size() == 12);
    CHECK(std::vector<std::uint8_t>(wire.begin() + 2, wire.end()) ==
          std::vector<std::uint8_t>{0x00, 0x00, 0x00, 0x06, 0x01, 0x04, 0x00, 0x00, 0x00, 0x06});
    CHECK(wire[0] == 0x00);
    CHECK(wire[1] == 0x00);

    REQUIRE(samples.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(samples[i].channel == i + 1);
        CHECK(samples[i].timestamp == kT0);
    }
    CHECK(samples[0].raw_count == 43256);
    CHECK(samples[0].pressure == doctest::Approx(1e-6).epsilon(0.02));
    CHECK(samples[0].status == SampleStatus::ok);
}

TEST_CASE("end-to-end pressure round trip") {
    // ignited gauges, p in [1e-8, 1e-3]
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> decade(-8.0, -3.0);
    for (int round = 0; round < 5; ++round) {
        adam::Scenario sc;
        std::array<double, 6> truth{};
        for (std::size_t i = 0; i < 6; ++i) {
            truth[i] = std::pow(10.0, decade(rng));
            sc.channels[i].program = adam::Constant{truth[i]};
            sc.channels[i].preignited = true;
        }
        Bench bench(sc);
        auto cfg = bench.engine_config("unused.csv");
        modbus::ClientConfig cc;
        cc.target = cfg.target;
        cc.unit_id = 1;
        modbus::Client client(cc);
        const auto samples = poll_once(client, cfg, kT0);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(std::abs(std::log10(samples[i].pressure / truth[i])) <= 0.01 + 5e-4);
    }
}

TEST_CASE("poll_once surfaces device exceptions and all-disconnected devices") {
    SUBCASE("exception 02") {
        Bench bench;
        auto cfg = bench.engine_config("unused.csv");
        cfg.start_register = 4; // 4 + 6 runs past the 8-register block
        modbus::ClientConfig cc;
        cc.target = cfg.target;
        cc.unit_id = 1;
        modbus::Client client(cc);
        try {
            poll_once(client, cfg, kT0);
            FAIL("expected a poll error");
        } catch (const PollError& e) {
            REQUIRE(e.exception_code().has_value());
            CHECK(*e.exception_code() == modbus::ExceptionCode::illegal_data_address);
            CHECK(std::string(e.what()).find("IllegalDataAddress") != std::string::npos);
        }
    }
    SUBCASE("all channels disconnected") {
        Bench bench(adam::Scenario{});
        auto cfg = bench.engine_config("unused.csv");
        modbus::ClientConfig cc;
        cc.target = cfg.target;
        cc.unit_id = 1;
        modbus::Client client(cc);
        DisconnectDetector det;
        std::vector<PressureSample> samples;
        for (int i = 0; i < 3; ++i) {
            samples = poll_once(client, cfg, kT0);
            det.update(samples);
        }
        REQUIRE(samples.size() == 6);
        for (const auto& s : samples)
            CHECK(s.status == SampleStatus::disconnected);
    }
    SUBCASE("transport timeout") {
        auto cfg = EngineConfig::defaults();
        modbus::ClientConfig cc;
        cc.target = {"127.0.0.1", 1}; // nothing listens here
        cc.timeout = 200ms;
        modbus::Client client(cc);
        CHECK_THROWS_AS(poll_once(client, cfg, kT0), PollError);
    }
}

TEST_CASE("engine polls, logs and publishes") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "log.csv");
    cfg.poll_interval = 200ms;
    Engine engine(cfg);
    CHECK(engine.status().state == PollingState::stopped);
    auto sub = engine.subscribe();

    CHECK(engine.start());
    CHECK_FALSE(engine.start());
    const auto first = sub->pop(2000ms);
    REQUIRE(first);
    CHECK(first->samples.size() == 6);
    CHECK(first->samples[0].raw_count == 43256);

    // a 2 s run at 200 ms is the 10 s / 1000 ms case scaled down
    std::this_thread::sleep_for(1900ms);
    CHECK(engine.stop());
    CHECK_FALSE(engine.stop());
    const auto st = engine.status();
    CHECK(st.state == PollingState::stopped);
    CHECK(st.cycles >= 9);
    CHECK(st.cycles <= 11);
    CHECK(st.poll_errors == 0);
    REQUIRE(st.last_cycle_latency);
    CHECK(*st.last_cycle_latency < std::chrono::microseconds(200'000));
    CHECK(st.channels.at(0).last->raw_count == 43256);

    engine.shutdown();
    const auto rows = rows_in(cfg.log_path);
    CHECK(rows.size() == st.cycles * 6);
    CHECK(st.rows_logged == rows.size());
    CHECK(testing::lines_of(testing::slurp(cfg.log_path)).at(0) == kCsvHeader);
    CHECK(sub->closed());
}

TEST_CASE("stop then start leaves no duplicate or torn rows") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "log.csv");
    cfg.poll_interval = 20ms;
    Engine engine(cfg);
    for (int i = 0; i < 5; ++i) {
        engine.start();
        std::this_thread::sleep_for(60ms);
        engine.stop();
    }
    const auto cycles = engine.status().cycles;
    engine.shutdown();

    const auto rows = rows_in(cfg.log_path); // throws on a torn row
    CHECK(rows.size() == cycles * 6);
    std::set<std::pair<Timestamp, std::size_t>> seen;
    for (const auto& r : rows)
        CHECK(seen.insert({r.timestamp, r.channel}).second);
}

TEST_CASE("threshold changes apply from the next cycle") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "log.csv");
    Engine engine(cfg);
    engine.start();
    REQUIRE(eventually([&] { return engine.status().cycles >= 2; }));

    const auto cs = engine.set_threshold(1, 5.0);
    CHECK(cs.config.threshold_voltage == 5.0);
    CHECK(cs.threshold_pressure == doctest::Approx(threshold_pressure(ch(1, 5.0))));
    auto sub = engine.subscribe();
    const auto next = sub->pop(2000ms);
    REQUIRE(next);
    CHECK(next->samples[0].status == SampleStatus::clamped);
    CHECK(next->samples[0].voltage == 5.0);
    CHECK(next->samples[0].raw_count == 43256);
    CHECK(engine.channel(1)->config.threshold_voltage == 5.0);

    CHECK_THROWS_AS(engine.set_threshold(1, 12.0), RangeError);
    CHECK_THROWS_AS(engine.set_threshold(9, 1.0), ConfigError);
    CHECK_FALSE(engine.channel(9));
    engine.shutdown();

    bool saw_clamped = false;
    for (const auto& r : rows_in(cfg.log_path))
        if (r.channel == 1 && r.clamped) {
            saw_clamped = true;
            CHECK(format_voltage(r.voltage) == "5.00000");
        }
    CHECK(saw_clamped);
}

TEST_CASE("disabling a channel drops it from the log and clears the device coil") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "log.csv");
    Engine engine(cfg);
    engine.start();
    const auto cs = engine.set_enabled(2, false);
    CHECK_FALSE(cs.config.enabled);
    CHECK_FALSE(bench.emulator.snapshot()->coils[1]);
    auto sub = engine.subscribe();
    const auto b = sub->pop(2000ms);
    REQUIRE(b);
    CHECK(b->samples.at(1).status == SampleStatus::disabled);
    CHECK(b->samples.size() == 6);
    REQUIRE(eventually([&] { return engine.status().cycles >= 4; }));
    engine.set_enabled(2, true);
    CHECK(bench.emulator.snapshot()->coils[1]);
    engine.stop();
    const auto st = engine.status();
    engine.shutdown();
    const auto rows = rows_in(cfg.log_path);
    CHECK(rows.size() == st.rows_logged);
    CHECK(rows.size() < st.cycles * 6);
    for (const auto& r : rows)
        CHECK(r.status != SampleStatus::disabled);
}

TEST_CASE("failed polls are counted, logged as comments and degrade the engine") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "log.csv");
    cfg.poll_interval = 20ms;
    cfg.start_register = 4;
    Engine engine(cfg);
    engine.start();
    REQUIRE(eventually([&] { return engine.status().state == PollingState::degraded; }));
    const auto st = engine.status();
    CHECK(st.poll_errors >= 5);
    CHECK(st.consecutive_failures >= 5);
    CHECK(st.cycles == 0);
    REQUIRE(st.last_error);
    CHECK(st.last_error->find("IllegalDataAddress") != std::string::npos);
    // still retrying
    const auto before = st.poll_errors;
    REQUIRE(eventually([&] { return engine.status().poll_errors > before; }));
    const auto recent = engine.recent_log(3);
    CHECK(recent.size() == 3);
    CHECK(recent.back().find("poll_error") != std::string::npos);
    engine.shutdown();

    const auto lines = testing::lines_of(testing::slurp(cfg.log_path));
    REQUIRE(lines.size() >= 6);
    CHECK(lines[0] == kCsvHeader);
    for (std::size_t i = 1; i < lines.size(); ++i)
        CHECK(lines[i].rfind("# ", 0) == 0);
}

TEST_CASE("degraded clears on recovery") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "log.csv");
    cfg.poll_interval = 20ms;
    cfg.timeout = 100ms;
    const auto port = cfg.target.port;
    bench.server->stop();
    Engine engine(cfg);
    engine.start();
    REQUIRE(eventually([&] { return engine.status().state == PollingState::degraded; }));
    CHECK_FALSE(engine.status().connected);

    modbus::ServerConfig sc;
    sc.listen = {"127.0.0.1", port};
    sc.handler = bench.emulator.handler();
    auto again = modbus::serve(std::move(sc));
    REQUIRE(eventually([&] { return engine.status().state == PollingState::running; }));
    CHECK(engine.status().connected);
    CHECK(engine.status().consecutive_failures == 0);
}

TEST_CASE("log failures are surfaced while polling continues") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "no-such-dir" / "log.csv");
    Engine engine(cfg);
    CHECK(engine.status().log_error);
    engine.start();
    REQUIRE(eventually([&] { return engine.status().cycles >= 3; }));
    CHECK(engine.status().log_error);
    CHECK(engine.status().rows_logged == 0);
    CHECK(engine.status().state == PollingState::running);
}

TEST_CASE("a slow subscriber is dropped, others keep receiving") {
    TempDir dir;
    Bench bench;
    auto cfg = bench.engine_config(dir / "log.csv");
    cfg.poll_interval = 10ms;
    Engine engine(cfg);
    auto slow = engine.subscribe();
    auto fast = engine.subscribe();
    std::uint64_t last = 0;
    engine.start();
    while (!slow->closed()) {
        auto b = fast->pop(1000ms);
        REQUIRE(b);
        CHECK(b->seq == last + 1);
        last = b->seq;
    }
    CHECK(last >= Engine::kSubscriberQueue);
    CHECK(fast->pop(1000ms));
    CHECK_FALSE(fast->closed());
}

TEST_CASE("shutdown is idempotent and rejects later commands") {
    TempDir dir;
    Bench bench;
    Engine engine(bench.engine_config(dir / "log.csv"));
    engine.start();
    engine.shutdown();
    engine.shutdown();
    CHECK(engine.status().state == PollingState::stopped);
    CHECK_THROWS_AS(engine.start(), StateError);
    CHECK(engine.subscribe()->closed());
}
