#include "vacdaq/adam/emulator.hpp"

#include "vacdaq/error.hpp"

#include "../json_fields.hpp"

#include <fstream>
#include <sstream>

namespace vacdaq::adam {

using nlohmann::json;

namespace {

using detail::Fields;

ChannelScenario parse_channel(Fields& f) {
    ChannelScenario ch;
    const std::string program = f.string("program");
    try {
        ch.unit = vacphys::parse_unit(f.string("unit", std::string("mbar")));
        gauge::constants_for(ch.unit);
    } catch (const ConfigError& e) {
        f.fail("unit", e.what());
    }
    ch.enabled = f.boolean("enabled", true);
    ch.preignited = f.boolean("preignited", false);
    ch.cold_cathode = f.boolean("cold_cathode", true);
    if (const json* n = f.find("noise")) {
        Fields nf(*n, f.path() + ".noise");
        gauge::NoiseOptions opts;
        opts.amplitude = nf.opt_number("amplitude").value_or(opts.amplitude);
        opts.seed = static_cast<std::uint64_t>(nf.opt_number("seed").value_or(1.0));
        nf.reject_unknown();
        ch.noise = opts;
    }

    if (program == "constant") {
        ch.program = Constant{f.number("pressure_mbar")};
    } else if (program == "ramp") {
        ch.program = Ramp{f.number("pressure_mbar"), f.number("end_mbar"), f.number("duration_s")};
    } else if (program == "pumpdown") {
        vacphys::PumpdownParams p{f.number("pressure_mbar"), f.number("inlet_mbar"), f.number("conductance_lps"),
                                  f.number("volume_l")};
        p.exponent_factor = f.opt_number("exponent_factor").value_or(1.0);
        ch.program = Pumpdown{p};
    } else if (program == "disconnected") {
        ch.program = Disconnected{};
    } else {
        f.fail("program", "'" + program + "' is not one of constant, ramp, pumpdown, disconnected");
    }
    return ch;
}

} // namespace

Scenario parse_scenario(std::string_view text, std::string_view source) {
    const json doc = detail::parse_json(text, source);

    Scenario sc;
    Fields top(doc, std::string(source));
    sc.midpoint = top.opt_number("midpoint").value_or(adc::kDefaultMidpoint);
    const double tick = top.opt_number("tick_ms").value_or(kDefaultTickMs);
    if (tick < kMinTickMs || tick > kMaxTickMs)
        top.fail("tick_ms", "must be within 10..10000");
    sc.tick_ms = static_cast<std::uint16_t>(tick);

    if (const json* chans = top.find("channels")) {
        if (!chans->is_array())
            top.fail("channels", "expected an array");
        if (chans->size() > kChannels)
            top.fail("channels", "at most 8 channels");
        std::set<int> used;
        for (std::size_t i = 0; i < chans->size(); ++i) {
            Fields f((*chans)[i], std::string(source) + ".channels[" + std::to_string(i) + "]");
            const double idx = f.number("channel");
            if (idx != std::floor(idx) || idx < 1 || idx > kChannels)
                f.fail("channel", "must be an integer 1..8");
            if (!used.insert(static_cast<int>(idx)).second)
                f.fail("channel", "duplicate channel " + std::to_string(static_cast<int>(idx)));
            sc.channels[static_cast<std::size_t>(idx) - 1] = parse_channel(f);
            f.reject_unknown();
            try {
                Scenario probe;
                probe.channels[0] = sc.channels[static_cast<std::size_t>(idx) - 1];
                probe.validate();
            } catch (const ConfigError& e) {
                std::string msg = e.what();
                // "channel 1: ..." from the probe; restate with the real path
                if (const auto colon = msg.find(": "); colon != std::string::npos)
                    msg = msg.substr(colon + 2);
                f.fail("", msg);
            }
        }
    }
    top.reject_unknown();
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

} // namespace vacdaq::adam
