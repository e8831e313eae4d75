#include "vacdaq/daq/engine.hpp"

#include "vacdaq/gauge.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace vacdaq::daq {

using namespace vacdaq::modbus;

Timestamp now_ms() { return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()); }

std::vector<PressureSample> poll_once(Client& client, const EngineConfig& config, Timestamp ts) {
    ResponsePdu response;
    try {
        response = client.transact(ReadInputRegistersRequest{config.start_register, config.register_count});
    } catch (const Error& e) {
        throw PollError(e.what());
    }
    if (const auto* ex = std::get_if<ExceptionResponse>(&response))
        throw PollError("device exception " + std::string(exception_name(ex->code)), ex->code);
    const auto& values = std::get<ReadInputRegistersResponse>(response).values;
    if (values.size() != config.register_count)
        throw PollError("device returned " + std::to_string(values.size()) + " registers, expected " +
                        std::to_string(config.register_count));

    std::vector<PressureSample> out;
    out.reserve(config.channels.size());
    for (const auto& ch : config.channels)
        out.push_back(apply_threshold(make_sample(ts, ch, values.at(ch.index - 1), config.midpoint), ch));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.channel < b.channel; });
    return out;
}

std::shared_ptr<const SampleBatch> Subscription::pop(std::chrono::milliseconds wait) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, wait, [this] { return !queue_.empty() || closed_; });
    if (queue_.empty())
        return nullptr;
    auto b = std::move(queue_.front());
    queue_.pop_front();
    return b;
}

bool Subscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

void Subscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool Subscription::offer(std::shared_ptr<const SampleBatch> batch) {
    {
        std::lock_guard lock(mutex_);
        if (closed_)
            return false;
        if (queue_.size() >= capacity_) {
            closed_ = true;
            queue_.clear();
        } else {
            queue_.push_back(std::move(batch));
        }
    }
    cv_.notify_all();
    return !closed();
}

std::string_view polling_state_name(PollingState s) noexcept {
    switch (s) {
    case PollingState::stopped:
        return "stopped";
    case PollingState::running:
        return "running";
    case PollingState::degraded:
        return "degraded";
    }
    return "?";
}

Engine::Engine(EngineConfig config)
    : config_(std::move(config)), detector_(config_.disconnect_polls, config_.midpoint) {
    config_.validate();
    channels_ = config_.channels;
    std::sort(channels_.begin(), channels_.end(), [](const auto& a, const auto& b) { return a.index < b.index; });

    ClientConfig cc;
    cc.target = config_.target;
    cc.unit_id = config_.unit_id;
    cc.timeout = config_.timeout;
    client_ = std::make_unique<Client>(cc);

    status_.target = config_.target.to_string();
    status_.poll_interval = config_.poll_interval;
    try {
        log_ = std::make_unique<CsvLog>(config_.log_path);
    } catch (const IoError& e) {
        // keep polling; the status API shows why nothing is being written
        spdlog::error("{}", e.what());
        status_.log_error = e.what();
    }
    update_status_locked();
    thread_ = std::thread([this] { loop(); });
}

Engine::~Engine() { shutdown(); }

void Engine::shutdown() {
    std::call_once(shutdown_once_, [this] {
        {
            std::lock_guard lock(queue_mutex_);
            quit_ = true;
        }
        queue_cv_.notify_all();
        if (thread_.joinable())
            thread_.join();
        if (log_)
            log_->close();
        client_->close();
        std::lock_guard lock(status_mutex_);
        for (auto& w : subscribers_)
            if (auto s = w.lock())
                s->close();
        subscribers_.clear();
        shut_down_ = true;
        status_.state = PollingState::stopped;
    });
}

template <class F>
auto Engine::submit(F&& f) -> decltype(f()) {
    using R = decltype(f());
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
    auto fut = task->get_future();
    {
        std::lock_guard lock(queue_mutex_);
        if (quit_)
            throw StateError("engine is shut down");
        commands_.emplace_back([task] { (*task)(); });
    }
    queue_cv_.notify_all();
    return fut.get();
}

std::size_t Engine::slot(std::size_t channel) const {
    for (std::size_t i = 0; i < channels_.size(); ++i)
        if (channels_[i].index == channel)
            return i;
    throw ConfigError("no channel " + std::to_string(channel));
}

bool Engine::start() {
    return submit([this] {
        if (polling_)
            return false;
        polling_ = true;
        std::lock_guard lock(status_mutex_);
        status_.state = PollingState::running;
        status_.consecutive_failures = 0;
        return true;
    });
}

bool Engine::stop() {
    return submit([this] {
        if (!polling_)
            return false;
        polling_ = false;
        std::lock_guard lock(status_mutex_);
        status_.state = PollingState::stopped;
        return true;
    });
}

ChannelStatus Engine::set_threshold(std::size_t channel, double volts) {
    if (!(volts >= 0.0 && volts <= 10.0))
        throw RangeError("threshold must be within 0..10 V");
    return submit([this, channel, volts] {
        auto& ch = channels_.at(slot(channel));
        ch.threshold_voltage = volts;
        std::lock_guard lock(status_mutex_);
        update_status_locked();
        return status_.channels.at(slot(channel));
    });
}

ChannelStatus Engine::set_enabled(std::size_t channel, bool enabled) {
    return submit([this, channel, enabled] {
        auto& ch = channels_.at(slot(channel));
        ch.enabled = enabled;
        // mirror onto the device's channel-enable coil; failure is reported, not fatal
        std::optional<std::string> problem;
        try {
            const auto r = client_->transact(ForceSingleCoilRequest::make(static_cast<std::uint16_t>(channel - 1), enabled));
            if (const auto* ex = std::get_if<ExceptionResponse>(&r))
                problem = "coil write refused: " + std::string(exception_name(ex->code));
        } catch (const Error& e) {
            problem = std::string("coil write failed: ") + e.what();
        }
        if (problem) {
            spdlog::warn("channel {}: {}", channel, *problem);
            remember(format_comment(now_ms(), "coil_error", *problem));
        }
        std::lock_guard lock(status_mutex_);
        if (problem)
            status_.last_error = problem;
        update_status_locked();
        return status_.channels.at(slot(channel));
    });
}

EngineStatus Engine::status() const {
    std::lock_guard lock(status_mutex_);
    return status_;
}

std::optional<ChannelStatus> Engine::channel(std::size_t index) const {
    std::lock_guard lock(status_mutex_);
    for (const auto& c : status_.channels)
        if (c.config.index == index)
            return c;
    return std::nullopt;
}

std::shared_ptr<Subscription> Engine::subscribe() {
    auto sub = std::make_shared<Subscription>(kSubscriberQueue);
    std::lock_guard lock(status_mutex_);
    if (shut_down_)
        sub->close();
    else
        subscribers_.push_back(sub);
    return sub;
}

std::vector<std::string> Engine::recent_log(std::size_t limit) const {
    std::lock_guard lock(status_mutex_);
    const std::size_t n = std::min(limit, recent_.size());
    return {recent_.end() - static_cast<std::ptrdiff_t>(n), recent_.end()};
}

void Engine::remember(std::string line) {
    std::lock_guard lock(status_mutex_);
    recent_.push_back(std::move(line));
    while (recent_.size() > kRecentLines)
        recent_.pop_front();
}

void Engine::update_status_locked() {
    std::vector<ChannelStatus> out;
    for (const auto& ch : channels_) {
        ChannelStatus cs;
        cs.config = ch;
        cs.threshold_pressure = threshold_pressure(ch);
        for (const auto& old : status_.channels)
            if (old.config.index == ch.index)
                cs.last = old.last;
        out.push_back(std::move(cs));
    }
    status_.channels = std::move(out);
}

void Engine::publish(std::shared_ptr<const SampleBatch> batch) {
    std::lock_guard lock(status_mutex_);
    auto it = subscribers_.begin();
    while (it != subscribers_.end()) {
        auto sub = it->lock();
        if (!sub || !sub->offer(batch)) {
            if (sub)
                spdlog::warn("dropping a live subscriber that fell {} batches behind", kSubscriberQueue);
            it = subscribers_.erase(it);
        } else {
            ++it;
        }
    }
}

void Engine::loop() {
    auto next = std::chrono::steady_clock::now();
    bool was_polling = false;
    std::unique_lock lock(queue_mutex_);
    while (true) {
        auto ready = [this] { return quit_ || !commands_.empty(); };
        if (polling_)
            queue_cv_.wait_until(lock, next, ready);
        else
            queue_cv_.wait(lock, ready);
        if (quit_)
            break;
        while (!commands_.empty()) {
            auto cmd = std::move(commands_.front());
            commands_.pop_front();
            lock.unlock();
            cmd();
            lock.lock();
        }
        if (polling_ && !was_polling) // first cycle right away, but never closer than one interval to the last
            next = std::max(std::chrono::steady_clock::now(), last_cycle_ + config_.poll_interval);
        was_polling = polling_;
        if (!polling_ || std::chrono::steady_clock::now() < next)
            continue;
        lock.unlock();
        cycle();
        lock.lock();
        next += config_.poll_interval;
        if (const auto now = std::chrono::steady_clock::now(); next < now)
            next = now + config_.poll_interval; // overran; do not burst to catch up
    }
}

void Engine::cycle() {
    const auto t0 = std::chrono::steady_clock::now();
    last_cycle_ = t0;
    // strictly increasing even if the wall clock steps back
    const Timestamp ts = std::max(now_ms(), last_timestamp_ + std::chrono::milliseconds(1));
    last_timestamp_ = ts;
    EngineConfig cfg = config_;
    cfg.channels = channels_;

    std::vector<PressureSample> samples;
    try {
        samples = poll_once(*client_, cfg, ts);
    } catch (const PollError& e) {
        const std::string line = format_comment(ts, "poll_error", e.what());
        std::optional<std::string> log_problem;
        try {
            if (log_)
                log_->append_comment(ts, "poll_error", e.what());
        } catch (const IoError& io) {
            log_problem = io.what();
        }
        remember(line);
        std::lock_guard lock(status_mutex_);
        ++status_.poll_errors;
        ++status_.consecutive_failures;
        status_.last_error = e.what();
        status_.connected = client_->connected();
        if (log_problem)
            status_.log_error = log_problem;
        if (status_.consecutive_failures >= config_.degraded_after && status_.state != PollingState::degraded) {
            spdlog::error("{} consecutive failed polls; engine degraded (still retrying)", status_.consecutive_failures);
            status_.state = PollingState::degraded;
        }
        return;
    }

    detector_.update(samples);
    std::vector<PressureSample> logged;
    for (const auto& s : samples)
        if (s.status != SampleStatus::disabled)
            logged.push_back(s);

    std::optional<std::string> log_problem;
    try {
        if (!log_)
            log_ = std::make_unique<CsvLog>(config_.log_path);
        log_->append(logged);
    } catch (const IoError& e) {
        spdlog::error("{}", e.what());
        log_problem = e.what();
    }
    const auto latency = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0);

    for (const auto& s : logged)
        remember(format_row(s));

    auto batch = std::make_shared<SampleBatch>();
    batch->timestamp = ts;
    batch->samples = samples;
    {
        std::lock_guard lock(status_mutex_);
        batch->seq = ++seq_;
        ++status_.cycles;
        status_.consecutive_failures = 0;
        status_.connected = true;
        status_.state = PollingState::running;
        status_.last_cycle_latency = latency;
        if (log_problem) {
            status_.log_error = log_problem;
        } else {
            status_.log_error.reset();
            status_.rows_logged += logged.size();
        }
        update_status_locked();
        for (auto& cs : status_.channels)
            for (const auto& s : samples)
                if (s.channel == cs.config.index)
                    cs.last = s;
    }
    publish(std::move(batch));
}

} // namespace vacdaq::daq
