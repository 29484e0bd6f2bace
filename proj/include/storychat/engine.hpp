#pragma once

// The running service. One pipeline thread owns all ordering state; sources,
// admin calls and participant submissions are serialized into it as tasks.
// Records go to the session log, then out to every connected client.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "storychat/broadcast.hpp"
#include "storychat/chat_message.hpp"
#include "storychat/chat_sim.hpp"
#include "storychat/control.hpp"
#include "storychat/engine_config.hpp"
#include "storychat/error.hpp"
#include "storychat/net.hpp"
#include "storychat/pipeline.hpp"
#include "storychat/session_log.hpp"

namespace storychat {

struct EngineOptions {
    std::filesystem::path log_dir = ".";
    std::optional<std::filesystem::path> replay_path;  // overrides the configured source
    double speed = 1.0;
    bool replay_configs_from_log = true;
    std::string session_id;  // generated when empty
};

inline std::string make_session_id()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    std::random_device rd;
    char suffix[8];
    std::snprintf(suffix, sizeof suffix, "%04x", static_cast<unsigned>(rd() & 0xFFFF));
    return std::string("session-") + buf + "-" + suffix;
}

/// FIFO of tasks for the pipeline thread.
class TaskQueue {
public:
    using Task = std::function<void()>;

    void push(Task t)
    {
        {
            std::lock_guard lock(mutex_);
            tasks_.push_back(std::move(t));
        }
        cv_.notify_one();
    }

    std::optional<Task> pop_until(std::chrono::steady_clock::time_point deadline)
    {
        std::unique_lock lock(mutex_);
        cv_.wait_until(lock, deadline, [&] { return !tasks_.empty() || closed_; });
        if (tasks_.empty()) return std::nullopt;
        Task t = std::move(tasks_.front());
        tasks_.pop_front();
        return t;
    }

    void close()
    {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    bool closed() const
    {
        std::lock_guard lock(mutex_);
        return closed_ && tasks_.empty();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Task> tasks_;
    bool closed_ = false;
};

class Engine final : public ControlSurface {
public:
    Engine(EngineConfig config, EngineOptions options = {})
        : config_(std::move(config))
        , options_(std::move(options))
    {
        config_.validate();
        if (options_.session_id.empty()) options_.session_id = make_session_id();
        if (options_.replay_path) {
            config_.source.mode = SourceMode::ReplayFile;
            config_.source.endpoint = options_.replay_path->string();
        }
        logical_time_ = config_.source.mode == SourceMode::ReplayFile || config_.source.mode == SourceMode::Synthetic;

        if (config_.source.mode == SourceMode::ReplayFile) {
            replay_session_ = load(config_.source.endpoint);
            if (replay_session_->corruption)
                spdlog::warn("replay log {} is corrupt at line {} ({}); replaying {} records before it",
                             config_.source.endpoint, replay_session_->corruption->line,
                             replay_session_->corruption->reason, replay_session_->records.size());
            if (options_.replay_configs_from_log)
                config_.pipeline = pipeline_config_from_manifest(replay_session_->manifest);
            if (config_.source.channel.empty()) config_.source.channel = replay_session_->manifest.channel;
        } else if (config_.source.mode == SourceMode::Synthetic) {
            std::ifstream in(config_.source.endpoint);
            if (!in) throw Error(Errc::InvalidConfig, "cannot open profile " + config_.source.endpoint);
            profile_ = nlohmann::json::parse(in).get<TrafficProfile>();
            profile_->validate();
        }
        if (config_.admin_token.empty()) {
            std::random_device rd;
            char buf[33];
            std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", rd(), rd(), rd(), rd());
            config_.admin_token = buf;
            spdlog::warn("no admin_token configured; generated {}", config_.admin_token);
        }
        participant_tokens_.insert(config_.participant_tokens.begin(), config_.participant_tokens.end());
    }

    ~Engine() override { stop(); }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Binds the listener, opens the session log and starts all threads.
    /// Startup failures throw.
    void start()
    {
        if (started_.exchange(true)) return;
        std::filesystem::create_directories(options_.log_dir);
        log_path_ = options_.log_dir / (options_.session_id + ".jsonl");

        SessionManifest manifest;
        manifest.session_id = options_.session_id;
        manifest.started_at = rfc3339_now();
        manifest.mode = config_.pipeline.mode;
        manifest.configs = config_.pipeline.configs_json();
        manifest.channel = config_.source.channel;
        manifest.nominal_viewers = config_.pipeline.nominal_viewers;
        writer_ = std::make_unique<SessionWriter>(log_path_, manifest);

        pipeline_ = std::make_unique<Pipeline>(
            config_.pipeline, [this](const LogRecord& r) { on_record(r); },
            [](std::string_view w) { spdlog::warn("{}", w); });

        http_ = std::make_shared<net::Listener>(io_, net::resolve_listen(io_, config_.listen_address),
                                                [this](net::tcp::socket&& s) {
                                                    std::make_shared<net::HttpSession>(std::move(s), *this)->run();
                                                });
        http_->start();
        if (!config_.local_room_address.empty()) {
            room_ = std::make_shared<net::Listener>(io_, net::resolve_listen(io_, config_.local_room_address),
                                                    [this](net::tcp::socket&& s) {
                                                        std::make_shared<net::RoomSession>(std::move(s), *this)->run();
                                                    });
            room_->start();
        }
        if (config_.source.mode == SourceMode::IrcLive) {
            irc_ = std::make_shared<net::IrcClient>(io_, config_.source, clock_, [this](ChatMessage m) {
                ingest(std::move(m));
            });
            irc_->start();
        }

        pipeline_thread_ = std::thread([this] { pipeline_loop(); });
        io_thread_ = std::thread([this] {
            auto guard = net::asio::make_work_guard(io_);
            io_.run();
        });
        if (replay_session_ || profile_) source_thread_ = std::jthread([this](std::stop_token st) { source_loop(st); });
        spdlog::info("storychat listening on port {} (session {}, log {})", http_port(), options_.session_id,
                     log_path_.string());
    }

    void stop()
    {
        if (!started_ || stopped_.exchange(true)) return;
        if (source_thread_.joinable()) {
            source_thread_.request_stop();
            source_thread_.join();
        }
        if (irc_) irc_->stop();
        if (http_) net::asio::post(io_, [l = http_] { l->stop(); });
        if (room_) net::asio::post(io_, [l = room_] { l->stop(); });
        if (!logical_time_) tasks_.push([this] { pipeline_->set_time(clock_.now_ms()); });
        tasks_.close();
        if (pipeline_thread_.joinable()) pipeline_thread_.join();
        io_.stop();
        if (io_thread_.joinable()) io_thread_.join();
    }

    /// External chat entering the merge point. Live messages are stamped
    /// with the session clock when the pipeline takes them.
    void ingest(ChatMessage m)
    {
        tasks_.push([this, m = std::move(m)]() mutable {
            if (!logical_time_) m.timestamp_ms = clock_.now_ms();
            pipeline_->on_message(std::move(m));
        });
    }

    std::uint64_t set_threshold(double v) override
    {
        return call([=](Pipeline& p) { return p.set_threshold(v); });
    }

    std::uint64_t set_filter(const nlohmann::json& delta) override
    {
        return call([delta](Pipeline& p) { return p.set_filter(delta); });
    }

    std::uint64_t set_mode(StoryMode mode) override
    {
        return call([=](Pipeline& p) { return p.set_mode(mode); });
    }

    std::uint64_t set_viewers(std::int64_t count) override
    {
        return call([=](Pipeline& p) { return p.set_viewers(count); });
    }

    std::uint64_t broadcast_notice(const std::string& text) override
    {
        return call([text](Pipeline& p) { return p.notice(text); });
    }

    std::uint64_t submit_comment(std::string_view token, const std::string& author, const std::string& body) override
    {
        if (!participant_tokens_.count(std::string(token)))
            throw Error(Errc::Unauthenticated, "unknown participant token");
        std::string text = irc::normalize_body(body);
        if (text.empty()) throw Error(Errc::EmptyBody, "comment body is empty");
        ChatMessage m;
        m.id = clock_.next_id("room");
        m.channel = config_.source.channel;
        m.author = author.empty() ? "participant" : author;
        m.body = std::move(text);
        m.source = Source::Participant;
        return call([this, m = std::move(m)](Pipeline& p) mutable {
            m.timestamp_ms = logical_time_ ? p.now_ms() : clock_.now_ms();
            p.set_time(m.timestamp_ms);
            const auto seq = p.last_seq() + 1;
            p.on_message(std::move(m));
            return seq;
        });
    }

    nlohmann::json get_state() override
    {
        return call([](Pipeline& p) { return nlohmann::json(p.snapshot()); });
    }

    bool admin_authorized(std::string_view token) const override
    {
        return !token.empty() && token == config_.admin_token;
    }

    BroadcastHub& hub() override { return hub_; }
    std::size_t client_buffer() const override { return config_.client_buffer; }

    /// Blocks until the replay/synthetic source is exhausted and the final
    /// window boundaries have been evaluated.
    bool wait_source_done(std::chrono::milliseconds timeout)
    {
        std::unique_lock lock(done_mutex_);
        return done_cv_.wait_for(lock, timeout, [&] { return source_done_; });
    }

    /// Returns once every task queued before the call has run.
    void sync() { call([](Pipeline&) { return 0; }); }

    std::uint16_t http_port() const { return http_ ? http_->port() : 0; }
    std::uint16_t room_port() const { return room_ ? room_->port() : 0; }
    const std::filesystem::path& log_path() const { return log_path_; }
    const std::string& session_id() const { return options_.session_id; }
    const EngineConfig& config() const { return config_; }
    bool logical_time() const { return logical_time_; }
    std::shared_ptr<net::IrcClient> irc() const { return irc_; }

private:
    template <typename F>
    auto call(F f) -> decltype(f(std::declval<Pipeline&>()))
    {
        using R = decltype(f(std::declval<Pipeline&>()));
        if (!started_ || stopped_) throw Error(Errc::InvalidValue, "engine is not running");
        auto promise = std::make_shared<std::promise<R>>();
        auto future = promise->get_future();
        tasks_.push([this, promise, f = std::move(f)]() mutable {
            try {
                if (!logical_time_) pipeline_->set_time(clock_.now_ms());
                promise->set_value(f(*pipeline_));
            } catch (...) {
                promise->set_exception(std::current_exception());
            }
        });
        return future.get();
    }

    void on_record(const LogRecord& r)
    {
        writer_->append(r);
        if (auto u = client_update(r, pipeline_->config().mode))
            hub_.publish(std::make_shared<const std::string>(u->dump()));
    }

    void pipeline_loop()
    {
        using namespace std::chrono;
        for (;;) {
            const auto deadline = steady_clock::now() + milliseconds(logical_time_ ? 200 : next_boundary_wait_ms());
            auto task = tasks_.pop_until(deadline);
            try {
                if (task) (*task)();
                if (!logical_time_) pipeline_->set_time(clock_.now_ms());
                writer_->maybe_flush();
            } catch (const Error& e) {
                if (e.code() == Errc::StorageFull) spdlog::critical("{}", e.what());
                else spdlog::error("pipeline: {}", e.what());
            } catch (const std::exception& e) {
                spdlog::error("pipeline: {}", e.what());
            }
            if (!task && tasks_.closed()) break;
        }
        try {
            writer_->flush();
        } catch (const std::exception& e) {
            spdlog::critical("{}", e.what());
        }
    }

    std::int64_t next_boundary_wait_ms()
    {
        // Tick granularity bounds how late a boundary is noticed.
        return std::max<std::int64_t>(1, std::min<std::int64_t>(config_.pipeline.tick_ms, 50));
    }

    void source_loop(std::stop_token st)
    {
        std::int64_t end_ms = 0;
        bool completed = false;
        if (replay_session_) {
            end_ms = replay_session_->end_ms();
            completed = replay(
                replay_session_->records, ReplayOptions{options_.speed, true},
                [this](const LogRecord& r) {
                    if (r.kind == RecordKind::Comment) {
                        auto m = read_comment(r).message;
                        m.source = Source::Replay;
                        ingest(std::move(m));
                    } else if (r.kind == RecordKind::Admin) {
                        tasks_.push([this, r] {
                            pipeline_->set_time(r.timestamp_ms);
                            pipeline_->apply_admin(r.payload);
                        });
                    }
                },
                st);
        } else if (profile_) {
            end_ms = profile_->duration_ms;
            const auto messages = generate(*profile_, profile_->duration_ms);
            completed = paced_for_each(
                messages, [](const ChatMessage& m) -> std::optional<std::int64_t> { return m.timestamp_ms; },
                options_.speed, [this](const ChatMessage& m) { ingest(m); }, st);
        }
        if (!completed) return;
        tasks_.push([this, end_ms] {
            pipeline_->finish(std::max(end_ms, pipeline_->now_ms()));
            writer_->flush();
            {
                std::lock_guard lock(done_mutex_);
                source_done_ = true;
            }
            done_cv_.notify_all();
            spdlog::info("source exhausted at logical t={} ms", end_ms);
        });
    }

    EngineConfig config_;
    EngineOptions options_;
    bool logical_time_ = false;
    std::optional<LoadedSession> replay_session_;
    std::optional<TrafficProfile> profile_;
    std::set<std::string> participant_tokens_;

    SteadySessionClock clock_;
    std::filesystem::path log_path_;
    std::unique_ptr<SessionWriter> writer_;
    std::unique_ptr<Pipeline> pipeline_;
    BroadcastHub hub_;
    TaskQueue tasks_;

    net::asio::io_context io_;
    std::shared_ptr<net::Listener> http_;
    std::shared_ptr<net::Listener> room_;
    std::shared_ptr<net::IrcClient> irc_;

    std::thread pipeline_thread_;
    std::thread io_thread_;
    std::jthread source_thread_;
    std::atomic<bool> started_{false};
    std::atomic<bool> stopped_{false};

    std::mutex done_mutex_;
    std::condition_variable done_cv_;
    bool source_done_ = false;
};

}  // namespace storychat
