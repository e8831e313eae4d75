#include "vacdaq/adam/emulator.hpp"

#include "vacdaq/error.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#ifndef VACDAQ_VERSION
#define VACDAQ_VERSION "0.0.0"
#endif

namespace vacdaq::adam {

using namespace vacdaq::modbus;

std::string identity_string() { return std::string("VACDAQ-EMU,5000TCP,5017,") + VACDAQ_VERSION; }

double program_pressure(const Program& program, double t) {
    return std::visit(
        [t](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return p.pressure_mbar;
            } else if constexpr (std::is_same_v<T, Ramp>) {
                if (p.duration_s <= 0.0)
                    return t > 0.0 ? p.end_mbar : p.start_mbar;
                const double f = std::clamp(t / p.duration_s, 0.0, 1.0);
                return p.start_mbar * std::pow(p.end_mbar / p.start_mbar, f);
            } else if constexpr (std::is_same_v<T, Pumpdown>) {
                return vacphys::pumpdown_pressure(p.params, t);
            } else {
                throw StateError("disconnected channel has no pressure");
            }
        },
        program);
}

namespace {

void check_pressure(double p, std::size_t ch, const char* what) {
    if (!(p >= gauge::kRangeMin && p <= gauge::kRangeMax))
        throw ConfigError("channel " + std::to_string(ch + 1) + ": " + what + " " + std::to_string(p) +
                          " mbar outside [5e-9, 1e3]");
}

} // namespace

void Scenario::validate() const {
    if (!(midpoint >= 32000.0 && midpoint <= 33500.0))
        throw ConfigError("midpoint " + std::to_string(midpoint) + " is not a plausible bipolar midpoint");
    if (tick_ms < kMinTickMs || tick_ms > kMaxTickMs)
        throw ConfigError("tick_ms must be within 10..10000");
    for (std::size_t i = 0; i < kChannels; ++i) {
        const auto& ch = channels[i];
        if (std::holds_alternative<Disconnected>(ch.program))
            continue;
        gauge::constants_for(ch.unit);
        if (const auto* c = std::get_if<Constant>(&ch.program)) {
            check_pressure(c->pressure_mbar, i, "pressure");
        } else if (const auto* r = std::get_if<Ramp>(&ch.program)) {
            check_pressure(r->start_mbar, i, "ramp start");
            check_pressure(r->end_mbar, i, "ramp end");
            if (!(r->duration_s >= 0.0))
                throw ConfigError("channel " + std::to_string(i + 1) + ": ramp duration must be >= 0");
        } else if (const auto* p = std::get_if<Pumpdown>(&ch.program)) {
            check_pressure(p->params.initial_pressure, i, "pump-down start");
            check_pressure(p->params.pump_inlet_pressure, i, "pump-down inlet");
            try {
                p->params.validate();
            } catch (const DomainError& e) {
                throw ConfigError("channel " + std::to_string(i + 1) + ": " + e.what());
            }
        }
        if (ch.noise && !(ch.noise->amplitude >= 0.0 && ch.noise->amplitude < 1.0))
            throw ConfigError("channel " + std::to_string(i + 1) + ": noise amplitude must be within [0, 1)");
    }
}

Emulator::Emulator(Scenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
    working_.holding_registers[0] = scenario_.tick_ms;
    working_.identity.push_back(0xFF); // run indicator: ON
    const auto id = identity_string();
    working_.identity.insert(working_.identity.end(), id.begin(), id.end());

    gauges_.resize(kChannels);
    for (std::size_t i = 0; i < kChannels; ++i) {
        const auto& ch = scenario_.channels[i];
        working_.coils[i] = ch.enabled;
        working_.input_registers[i] = adc::volts_to_count(0.0, scenario_.midpoint);
        if (std::holds_alternative<Disconnected>(ch.program))
            continue;
        gauge::ChannelOptions opts;
        opts.enabled = ch.enabled;
        opts.cold_cathode = ch.cold_cathode;
        opts.preignited = ch.preignited;
        opts.noise = ch.noise;
        gauges_[i].emplace(gauge::constants_for(ch.unit),
                           [program = ch.program](double t) { return program_pressure(program, t); }, opts);
    }
    std::lock_guard lock(state_mutex_);
    publish_locked();
}

Emulator::~Emulator() { stop_ticker(); }

void Emulator::publish_locked() {
    auto snap = std::make_shared<const RegisterMap>(working_);
    std::lock_guard lock(snapshot_mutex_);
    published_ = std::move(snap);
}

std::shared_ptr<const RegisterMap> Emulator::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return published_;
}

std::optional<gauge::GaugeReading> Emulator::last_reading(std::size_t channel) const {
    std::lock_guard lock(state_mutex_);
    return readings_.at(channel);
}

void Emulator::tick(double dt) {
    if (!(dt > 0.0))
        throw DomainError("tick dt must be positive");
    std::lock_guard lock(state_mutex_);
    for (std::size_t i = 0; i < kChannels; ++i) {
        std::uint16_t count = adc::volts_to_count(0.0, scenario_.midpoint);
        if (gauges_[i]) {
            // disabled gauges still step so simulated time stays shared
            readings_[i] = gauges_[i]->step(dt);
            count = adc::volts_to_count(readings_[i]->voltage, scenario_.midpoint);
        }
        if (working_.coils[i])
            working_.input_registers[i] = count;
    }
    working_.time += dt;
    ++working_.tick;
    publish_locked();
}

void Emulator::set_coil_locked(std::size_t channel, bool on) {
    working_.coils[channel] = on;
    if (gauges_[channel])
        gauges_[channel]->set_enabled(on);
}

namespace {

void require_block(std::uint32_t start, std::uint32_t count) {
    if (start + count > kChannels)
        throw ExceptionReply(ExceptionCode::illegal_data_address);
}

void check_holding_value(std::uint16_t address, std::uint16_t value) {
    if (address == 0 && (value < kMinTickMs || value > kMaxTickMs))
        throw ExceptionReply(ExceptionCode::illegal_data_value);
}

} // namespace

ResponsePdu Emulator::handle_request(const RequestPdu& request) {
    return std::visit(
        [this](const auto& r) -> ResponsePdu {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ReadCoilsRequest>) {
                require_block(r.start, r.count);
                const auto snap = snapshot();
                std::vector<bool> bits(snap->coils.begin() + r.start, snap->coils.begin() + r.start + r.count);
                return ReadCoilsResponse{pack_bits(bits)};
            } else if constexpr (std::is_same_v<T, ReadInputRegistersRequest>) {
                require_block(r.start, r.count);
                const auto snap = snapshot();
                return ReadInputRegistersResponse{{snap->input_registers.begin() + r.start,
                                                   snap->input_registers.begin() + r.start + r.count}};
            } else if constexpr (std::is_same_v<T, ReadHoldingRegistersRequest>) {
                require_block(r.start, r.count);
                const auto snap = snapshot();
                return ReadHoldingRegistersResponse{{snap->holding_registers.begin() + r.start,
                                                     snap->holding_registers.begin() + r.start + r.count}};
            } else if constexpr (std::is_same_v<T, ForceSingleCoilRequest>) {
                require_block(r.address, 1);
                if (!r.valid_value())
                    throw ExceptionReply(ExceptionCode::illegal_data_value);
                std::lock_guard lock(state_mutex_);
                set_coil_locked(r.address, r.on());
                publish_locked();
                return ForceSingleCoilResponse{r.address, r.raw_value};
            } else if constexpr (std::is_same_v<T, ForceMultipleCoilsRequest>) {
                require_block(r.start, r.count);
                std::lock_guard lock(state_mutex_);
                for (std::uint16_t i = 0; i < r.count; ++i)
                    set_coil_locked(r.start + i, r.bits.at(i));
                publish_locked();
                return ForceMultipleCoilsResponse{r.start, r.count};
            } else if constexpr (std::is_same_v<T, PresetSingleRegisterRequest>) {
                require_block(r.address, 1);
                check_holding_value(r.address, r.value);
                std::lock_guard lock(state_mutex_);
                working_.holding_registers[r.address] = r.value;
                publish_locked();
                return PresetSingleRegisterResponse{r.address, r.value};
            } else if constexpr (std::is_same_v<T, PresetMultipleRegistersRequest>) {
                const auto n = static_cast<std::uint16_t>(r.values.size());
                require_block(r.start, n);
                for (std::uint16_t i = 0; i < n; ++i)
                    check_holding_value(r.start + i, r.values[i]);
                std::lock_guard lock(state_mutex_);
                for (std::uint16_t i = 0; i < n; ++i)
                    working_.holding_registers[r.start + i] = r.values[i];
                publish_locked();
                return PresetMultipleRegistersResponse{r.start, n};
            } else {
                return ReportSlaveIdResponse{snapshot()->identity};
            }
        },
        request);
}

RequestHandler Emulator::handler() {
    return [this](const RequestContext&, const RequestPdu& r) { return handle_request(r); };
}

void Emulator::start_ticker() {
    std::lock_guard lock(ticker_mutex_);
    if (ticker_.joinable())
        return;
    ticker_stop_ = false;
    ticker_ = std::thread([this] {
        auto next = std::chrono::steady_clock::now();
        std::unique_lock lock(ticker_mutex_);
        while (!ticker_stop_) {
            const std::uint16_t period = snapshot()->holding_registers[0];
            next += std::chrono::milliseconds(period);
            if (ticker_cv_.wait_until(lock, next, [this] { return ticker_stop_; }))
                break;
            try {
                tick(period / 1000.0);
            } catch (const std::exception& e) {
                spdlog::error("emulator tick failed: {}", e.what());
            }
        }
    });
}

void Emulator::stop_ticker() {
    {
        std::lock_guard lock(ticker_mutex_);
        ticker_stop_ = true;
    }
    ticker_cv_.notify_all();
    if (ticker_.joinable())
        ticker_.join();
}

} // namespace vacdaq::adam
