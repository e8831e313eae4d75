#include "vacdaq/cli.hpp"

#include "vacdaq/adam/emulator.hpp"
#include "vacdaq/daq/csv.hpp"
#include "vacdaq/daq/engine.hpp"
#include "vacdaq/daq/http_api.hpp"
#include "vacdaq/error.hpp"
#include "vacdaq/vacphys.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <thread>

namespace vacdaq::cli {

using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

// Blocks until the duration (if any) elapses or a signal arrives.
void wait_until_done(std::optional<double> seconds) {
    g_interrupted = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto end = seconds ? std::chrono::steady_clock::now() +
                                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                       std::chrono::duration<double>(*seconds))
                             : std::chrono::steady_clock::time_point::max();
    while (!g_interrupted && std::chrono::steady_clock::now() < end)
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
}

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Output {
    std::string format = "text";
    bool json() const { return format == "json"; }
};

void add_format(CLI::App* cmd, Output& o) {
    cmd->add_option("--format", o.format, "output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
}

vacphys::PressureUnit unit_arg(const std::string& s) { return vacphys::parse_unit(s); }

std::string range_name(daq::SignalRange r) {
    switch (r) {
    case daq::SignalRange::in_range:
        return "in_range";
    case daq::SignalRange::underrange:
        return "underrange";
    case daq::SignalRange::overrange:
        return "overrange";
    }
    return "?";
}

// ---- convert / calc

struct ConvertArgs {
    double value = 0;
    std::string from, to;
    Output out;
};

int do_convert(const ConvertArgs& a, std::ostream& out) {
    const auto from = unit_arg(a.from);
    const auto to = unit_arg(a.to);
    const double r = vacphys::convert_pressure(a.value, from, to);
    if (a.out.json())
        out << json{{"value", a.value}, {"from", vacphys::unit_name(from)}, {"to", vacphys::unit_name(to)}, {"result", r}}
            << "\n";
    else
        out << number(r) << " " << vacphys::unit_name(to) << "\n";
    return kOk;
}

struct MfpArgs {
    double p = 0;
    std::string unit = "pa";
    std::optional<double> temperature;
    std::optional<double> length_cm;
    Output out;
};

int do_mfp(const MfpArgs& a, std::ostream& out) {
    auto gas = vacphys::GasParams::air();
    if (a.temperature)
        gas.temperature = *a.temperature;
    const double p_pa = vacphys::convert_pressure(a.p, unit_arg(a.unit), vacphys::PressureUnit::pascal);
    const double lambda = vacphys::mean_free_path(p_pa, gas);
    std::optional<vacphys::KnudsenResult> kn;
    if (a.length_cm)
        kn = vacphys::knudsen_number(lambda, *a.length_cm / 100.0);
    if (a.out.json()) {
        json j{{"pressure_pa", p_pa}, {"temperature_k", gas.temperature}, {"mean_free_path_m", lambda}};
        if (kn) {
            j["knudsen"] = kn->value;
            j["regime"] = vacphys::regime_name(kn->regime);
        }
        out << j << "\n";
    } else {
        out << number(lambda * 1000.0) << " mm\n";
        if (kn)
            out << "Kn " << number(kn->value) << " (" << vacphys::regime_name(kn->regime) << ")\n";
    }
    return kOk;
}

struct ConductanceArgs {
    std::string regime;
    double d = 0;
    std::optional<double> l, p, area;
    Output out;
};

int do_conductance(const ConductanceArgs& a, std::ostream& out) {
    vacphys::PipeSpec spec;
    if (a.regime == "viscous")
        spec.regime = vacphys::ConductanceRegime::viscous;
    else if (a.regime == "molecular")
        spec.regime = vacphys::ConductanceRegime::molecular;
    else
        spec.regime = vacphys::ConductanceRegime::aperture;
    spec.diameter_cm = a.d;
    spec.length_cm = a.l;
    spec.mean_pressure_torr = a.p;
    spec.area_cm2 = a.area;
    const double c = vacphys::pipe_conductance(spec);
    if (a.out.json())
        out << json{{"regime", a.regime}, {"conductance_lps", c}} << "\n";
    else
        out << number(c) << " L/s\n";
    return kOk;
}

struct PumpdownArgs {
    vacphys::PumpdownParams params{0, 0, 0, 0, 1.0};
    double t = 0;
    Output out;
};

int do_pumpdown(const PumpdownArgs& a, std::ostream& out) {
    const double p = vacphys::pumpdown_pressure(a.params, a.t);
    if (a.out.json())
        out << json{{"t_s", a.t}, {"pressure", p}, {"time_constant_s", a.params.time_constant()}} << "\n";
    else
        out << number(p) << "\n";
    return kOk;
}

// ---- read

struct ReadArgs {
    std::string target;
    int unit = 1;
    std::string fc = "04";
    int start = 0;
    int count = 6;
    std::string gauge_unit = "mbar";
    double midpoint = adc::kDefaultMidpoint;
    int timeout_ms = 1000;
    Output out;
};

int do_read(const ReadArgs& a, std::ostream& out, std::ostream& err) {
    using namespace modbus;
    std::size_t used = 0;
    int fc = -1;
    try {
        fc = std::stoi(a.fc, &used, 16);
    } catch (const std::exception&) {
    }
    if (used != a.fc.size() || (fc != 0x01 && fc != 0x03 && fc != 0x04))
        throw ConfigError("--fc must be 01, 03 or 04");
    if (a.unit < 0 || a.unit > 255)
        throw ConfigError("--unit must be within 0..255");
    if (a.start < 0 || a.start > 0xFFFF || a.count < 1 || a.count > 2000)
        throw ConfigError("--start/--count out of range");
    const auto gunit = unit_arg(a.gauge_unit);

    ClientConfig cc;
    cc.target = Endpoint::parse(a.target);
    cc.unit_id = static_cast<std::uint8_t>(a.unit);
    cc.timeout = std::chrono::milliseconds(a.timeout_ms);
    cc.validate();
    Client client(cc);

    const auto start = static_cast<std::uint16_t>(a.start);
    const auto count = static_cast<std::uint16_t>(a.count);
    RequestPdu req = ReadInputRegistersRequest{start, count};
    if (fc == 0x01)
        req = ReadCoilsRequest{start, count};
    else if (fc == 0x03)
        req = ReadHoldingRegistersRequest{start, count};
    const auto resp = client.transact(req);

    if (const auto* ex = std::get_if<ExceptionResponse>(&resp)) {
        if (a.out.json())
            out << json{{"target", cc.target.to_string()},
                        {"function", fc},
                        {"exception", static_cast<int>(ex->code)},
                        {"exception_name", exception_name(ex->code)}}
                << "\n";
        err << "device exception " << static_cast<int>(ex->code) << " " << exception_name(ex->code) << "\n";
        return kFailure;
    }

    if (fc == 0x01) {
        const auto bits = unpack_bits(std::get<ReadCoilsResponse>(resp).coil_bytes, count);
        if (a.out.json()) {
            out << json{{"target", cc.target.to_string()}, {"function", fc}, {"start", start}, {"coils", bits}} << "\n";
        } else {
            for (std::size_t i = 0; i < bits.size(); ++i)
                out << "coil " << start + i << " " << (bits[i] ? "on" : "off") << "\n";
        }
        return kOk;
    }

    const auto& values = fc == 0x03 ? std::get<ReadHoldingRegistersResponse>(resp).values
                                    : std::get<ReadInputRegistersResponse>(resp).values;
    if (a.out.json()) {
        json regs = json::array();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto c = daq::convert_count(values[i], gunit, a.midpoint);
            regs.push_back({{"register", start + i},
                            {"raw_count", values[i]},
                            {"voltage", c.voltage},
                            {"pressure", c.pressure},
                            {"unit", vacphys::unit_name(gunit)},
                            {"range", range_name(c.range)}});
        }
        out << json{{"target", cc.target.to_string()},
                    {"unit_id", a.unit},
                    {"function", fc},
                    {"start", start},
                    {"values", values},
                    {"registers", regs}}
            << "\n";
        return kOk;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto c = daq::convert_count(values[i], gunit, a.midpoint);
        out << "reg " << start + i << "  raw " << values[i] << "  " << daq::format_voltage(c.voltage) << " V  "
            << daq::format_pressure(c.pressure) << " " << vacphys::unit_name(gunit);
        if (c.range != daq::SignalRange::in_range)
            out << "  " << range_name(c.range);
        out << "\n";
    }
    return kOk;
}

// ---- emulate / acquire

struct EmulateArgs {
    std::string scenario;
    std::string listen = "0.0.0.0:502";
    std::optional<double> duration;
};

int do_emulate(const EmulateArgs& a, std::ostream& out) {
    adam::Emulator emu(adam::load_scenario(a.scenario));
    emu.tick(emu.scenario().tick_ms / 1000.0); // registers hold real readings before the first request
    const auto listen = modbus::Endpoint::parse(a.listen);
    modbus::ServerConfig sc;
    sc.listen = listen;
    sc.handler = emu.handler();
    auto server = modbus::serve(std::move(sc));
    emu.start_ticker();
    out << "emulating " << adam::kChannels << " channels on " << listen.host << ":" << server->port() << std::endl;
    wait_until_done(a.duration);
    emu.stop_ticker();
    server->stop();
    out << "served " << server->requests_served() << " requests" << std::endl;
    return kOk;
}

struct AcquireArgs {
    std::string config;
    std::optional<std::string> target, log, serve;
    std::optional<double> duration;
    Output out;
};

int do_acquire(const AcquireArgs& a, std::ostream& out) {
    std::string path = a.config;
    if (path.empty())
        if (const char* env = std::getenv("VACDAQ_CONFIG"))
            path = env;
    auto cfg = path.empty() ? daq::EngineConfig::defaults() : daq::load_engine_config(path);
    if (a.target)
        cfg.target = modbus::Endpoint::parse(*a.target);
    if (a.log)
        cfg.log_path = *a.log;
    if (a.serve)
        cfg.serve_address = modbus::Endpoint::parse(*a.serve, 8080);
    cfg.validate();

    daq::Engine engine(cfg);
    daq::HmiServer api(engine, cfg.serve_address, cfg.static_dir);
    out << "polling " << cfg.target.to_string() << " every " << cfg.poll_interval.count() << " ms, logging to "
        << cfg.log_path.string() << "\n"
        << "HMI API on http://" << cfg.serve_address.host << ":" << api.port() << "/api/status" << std::endl;
    if (cfg.autostart)
        engine.start();
    wait_until_done(a.duration);
    api.stop();
    engine.shutdown();
    const auto st = engine.status();
    if (a.out.json())
        out << daq::status_json(st) << "\n";
    else
        out << "cycles " << st.cycles << ", poll errors " << st.poll_errors << ", rows logged " << st.rows_logged
            << std::endl;
    return kOk;
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Vacuum gauge acquisition over Modbus TCP", "vacdaq"};
    app.require_subcommand(1);
    app.set_version_flag("--version", VACDAQ_VERSION);

    std::function<int()> action;

    EmulateArgs em;
    auto* emulate = app.add_subcommand("emulate", "serve an emulated analog-input module");
    emulate->add_option("--scenario", em.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    emulate->add_option("--listen", em.listen, "host:port to listen on")->capture_default_str();
    emulate->add_option("--duration", em.duration, "seconds to run (default: until interrupted)")
        ->check(CLI::PositiveNumber);
    emulate->callback([&] { action = [&] { return do_emulate(em, out); }; });

    AcquireArgs aq;
    auto* acquire = app.add_subcommand("acquire", "poll, log and serve the HMI API");
    acquire->add_option("--config", aq.config, "engine config JSON (default: $VACDAQ_CONFIG)");
    acquire->add_option("--target", aq.target, "override the device host:port");
    acquire->add_option("--log", aq.log, "override the CSV log path");
    acquire->add_option("--serve", aq.serve, "override the HMI API host:port");
    acquire->add_option("--duration", aq.duration, "seconds to run (default: until interrupted)")
        ->check(CLI::PositiveNumber);
    add_format(acquire, aq.out);
    acquire->callback([&] { action = [&] { return do_acquire(aq, out); }; });

    ReadArgs rd;
    auto* read = app.add_subcommand("read", "one Modbus read, decoded and converted");
    read->add_option("--target", rd.target, "device host:port")->required();
    read->add_option("--unit", rd.unit, "unit id")->capture_default_str();
    read->add_option("--fc", rd.fc, "function code in hex: 01, 03 or 04")->capture_default_str();
    read->add_option("--start", rd.start, "first address")->capture_default_str();
    read->add_option("--count", rd.count, "number of registers or coils")->capture_default_str();
    read->add_option("--gauge-unit", rd.gauge_unit, "pressure unit for converted values")->capture_default_str();
    read->add_option("--midpoint", rd.midpoint, "ADC count at 0 V")->capture_default_str();
    read->add_option("--timeout", rd.timeout_ms, "response timeout in ms")->capture_default_str();
    add_format(read, rd.out);
    read->callback([&] { action = [&] { return do_read(rd, out, err); }; });

    auto* calc = app.add_subcommand("calc", "vacuum physics calculator");
    calc->require_subcommand(1);

    MfpArgs mfp;
    auto* mfp_cmd = calc->add_subcommand("mfp", "mean free path of air");
    mfp_cmd->add_option("--p", mfp.p, "pressure")->required();
    mfp_cmd->add_option("--unit", mfp.unit, "pressure unit")->capture_default_str();
    mfp_cmd->add_option("--temperature", mfp.temperature, "gas temperature in K (default 300)");
    mfp_cmd->add_option("--length", mfp.length_cm, "characteristic length in cm, prints the Knudsen number");
    add_format(mfp_cmd, mfp.out);
    mfp_cmd->callback([&] { action = [&] { return do_mfp(mfp, out); }; });

    ConductanceArgs cd;
    auto* cond = calc->add_subcommand("conductance", "pipe or aperture conductance of air in L/s");
    cond->add_option("--regime", cd.regime, "viscous, molecular or aperture")
        ->required()
        ->check(CLI::IsMember({"viscous", "molecular", "aperture"}));
    cond->add_option("--d", cd.d, "diameter in cm")->required();
    cond->add_option("--l", cd.l, "length in cm");
    cond->add_option("--p", cd.p, "mean pressure in Torr (viscous)");
    cond->add_option("--area", cd.area, "aperture area in cm^2");
    add_format(cond, cd.out);
    cond->callback([&] { action = [&] { return do_conductance(cd, out); }; });

    PumpdownArgs pd;
    auto* pump = calc->add_subcommand("pumpdown", "pressure after t seconds of pumping");
    pump->add_option("--p1", pd.params.initial_pressure, "initial pressure")->required();
    pump->add_option("--p2", pd.params.pump_inlet_pressure, "pump inlet pressure, same unit")->required();
    pump->add_option("--c", pd.params.conductance_lps, "conductance in L/s")->required();
    pump->add_option("--v", pd.params.volume_l, "volume in L")->required();
    pump->add_option("--t", pd.t, "time in s")->required();
    pump->add_option("--factor", pd.params.exponent_factor, "exponent factor")->capture_default_str();
    add_format(pump, pd.out);
    pump->callback([&] { action = [&] { return do_pumpdown(pd, out); }; });

    ConvertArgs cv;
    auto* convert = app.add_subcommand("convert", "convert a pressure between units");
    convert->add_option("value", cv.value, "pressure")->required();
    convert->add_option("from", cv.from, "unit, e.g. torr")->required();
    convert->add_option("to", cv.to, "unit, e.g. pa")->required();
    add_format(convert, cv.out);
    convert->callback([&] { action = [&] { return do_convert(cv, out); }; });

    std::vector<std::string> argv_store{"vacdaq"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store)
        argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kFailure;
    }

    try {
        return action ? action() : kFailure;
    } catch (const TransportError& e) {
        err << "error: " << e.what() << "\n";
        return kTransport;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

} // namespace vacdaq::cli
