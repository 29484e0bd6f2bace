#pragma once

// Single-owner ordering domain: classify -> record -> evaluate on window
// boundaries -> narrative step -> log record. Runs on logical time only, so
// the same inputs always yield the same record sequence.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

#include "storychat/chat_message.hpp"
#include "storychat/classifier.hpp"
#include "storychat/detector.hpp"
#include "storychat/error.hpp"
#include "storychat/narrative.hpp"
#include "storychat/session_log.hpp"

namespace storychat {

inline constexpr std::size_t kMaxNoticeLength = 500;

struct PipelineConfig {
    ClassifierConfig classifier;
    DetectorConfig detector;
    FsmConfig fsm;
    StoryMode mode = StoryMode::WithStory;
    std::int64_t nominal_viewers = 10000;
    std::int64_t tick_ms = 500;  // narrative clock granularity

    void validate() const
    {
        classifier.validate();
        detector.validate();
        fsm.validate();
        if (nominal_viewers < 0) throw Error(Errc::InvalidConfig, "nominal_viewers must be >= 0");
        if (tick_ms <= 0) throw Error(Errc::InvalidConfig, "tick_ms must be > 0");
    }

    /// Snapshot stored in the session manifest.
    nlohmann::json configs_json() const
    {
        return nlohmann::json{{"classifier", classifier}, {"detector", detector}, {"fsm", fsm}, {"tick_ms", tick_ms}};
    }

    bool operator==(const PipelineConfig&) const = default;
};

/// Rebuilds the pipeline configuration recorded in a session manifest.
inline PipelineConfig pipeline_config_from_manifest(const SessionManifest& manifest)
{
    PipelineConfig c;
    const auto& j = manifest.configs;
    if (j.contains("classifier")) c.classifier = j.at("classifier").get<ClassifierConfig>();
    if (j.contains("detector")) c.detector = j.at("detector").get<DetectorConfig>();
    if (j.contains("fsm")) c.fsm = j.at("fsm").get<FsmConfig>();
    if (j.contains("tick_ms")) j.at("tick_ms").get_to(c.tick_ms);
    c.mode = manifest.mode;
    c.nominal_viewers = manifest.nominal_viewers;
    c.validate();
    return c;
}

struct PipelineSnapshot {
    std::optional<PlotState> plot;  // absent without the story
    WindowVerdict window;
    StoryMode mode;
    PipelineConfig config;
    std::int64_t now_ms;
    std::uint64_t last_seq;
};

inline void to_json(nlohmann::json& j, const PipelineSnapshot& s)
{
    j = nlohmann::json{{"plot", s.plot ? nlohmann::json(to_string(*s.plot)) : nlohmann::json(nullptr)},
                       {"window", s.window},
                       {"mode", to_string(s.mode)},
                       {"configs", s.config.configs_json()},
                       {"nominal_viewers", s.config.nominal_viewers},
                       {"t", s.now_ms},
                       {"seq", s.last_seq}};
}

class Pipeline {
public:
    using Emit = std::function<void(const LogRecord&)>;
    using Warn = std::function<void(std::string_view)>;

    Pipeline(PipelineConfig config, Emit emit, Warn warn = {})
        : config_(std::move(config))
        , emit_(std::move(emit))
        , warn_(std::move(warn))
        , detector_(config_.detector)
        , fsm_(config_.fsm)
    {
        config_.validate();
        next_window_ms_ = config_.detector.window_ms;
        next_tick_ms_ = config_.tick_ms;
        last_verdict_.viewer_count = config_.nominal_viewers;
        last_verdict_.effective_threshold = effective_threshold(config_.nominal_viewers, config_.detector);
    }

    /// Messages earlier than the pipeline clock are clamped to it.
    ClassificationResult on_message(ChatMessage message)
    {
        if (message.timestamp_ms < now_ms_) {
            if (warn_)
                warn_("timestamp regression on " + message.id + ": " + std::to_string(message.timestamp_ms) +
                      " < " + std::to_string(now_ms_) + ", clamped");
            message.timestamp_ms = now_ms_;
        }
        advance_to(message.timestamp_ms);
        now_ms_ = message.timestamp_ms;

        auto result = classify(message, config_.classifier);
        detector_.record(message, result);
        emit(comment_record(next_seq(), message, result));
        if (story() && !result.negative())
            feed(FsmSignal{SignalKind::NonNegativeComment, message.timestamp_ms});
        return result;
    }

    /// Moves the logical clock to `t`, firing boundaries strictly before it.
    void set_time(std::int64_t t)
    {
        advance_to(t);
        now_ms_ = std::max(now_ms_, t);
    }

    /// Fires every window/tick boundary strictly before `t`.
    void advance_to(std::int64_t t) { fire_boundaries(t, false); }

    /// Fires every boundary up to and including `t`.
    void finish(std::int64_t t) { fire_boundaries(t, true); }

    /// Validates and applies a config delta, logging it as an Admin record.
    /// Returns the record's seq; the change affects only later records.
    std::uint64_t apply_admin(const nlohmann::json& delta)
    {
        const std::string op = delta.value("op", "");
        PipelineConfig next = config_;
        try {
            if (op == "threshold") {
                const double v = delta.at("threshold_per_10k").get<double>();
                if (!(v >= 0.0)) throw Error(Errc::InvalidValue, "threshold must be >= 0");
                next.detector.threshold_per_10k = v;
            } else if (op == "filter") {
                if (delta.contains("enabled_rules")) {
                    next.classifier.enabled_rules.clear();
                    for (const auto& r : delta.at("enabled_rules"))
                        next.classifier.enabled_rules.insert(rule_from_string(r.get<std::string>()));
                }
                if (delta.contains("caps_ratio_max")) delta.at("caps_ratio_max").get_to(next.classifier.caps_ratio_max);
                if (delta.contains("caps_min_length")) delta.at("caps_min_length").get_to(next.classifier.caps_min_length);
                if (delta.contains("emote_count_max")) delta.at("emote_count_max").get_to(next.classifier.emote_count_max);
                if (delta.contains("symbol_ratio_max")) delta.at("symbol_ratio_max").get_to(next.classifier.symbol_ratio_max);
            } else if (op == "mode") {
                next.mode = story_mode_from_string(delta.at("mode").get<std::string>());
            } else if (op == "viewers") {
                const auto n = delta.at("count").get<std::int64_t>();
                if (n < 0) throw Error(Errc::InvalidValue, "viewer count must be >= 0");
                next.nominal_viewers = n;
            } else {
                throw Error(Errc::InvalidValue, "unknown admin op '" + op + "'");
            }
            next.validate();
        } catch (const Error& e) {
            if (e.code() == Errc::InvalidConfig) throw Error(Errc::InvalidValue, e.what());
            throw;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::InvalidValue, e.what());
        }

        const auto seq = next_seq();
        emit(LogRecord{seq, now_ms_, RecordKind::Admin, delta});

        const bool story_was_on = story();
        config_ = std::move(next);
        detector_.set_config(config_.detector);
        fsm_.set_config(config_.fsm);
        if (story_was_on != story()) {
            // Narrative restarts from stable; nothing is logged for the hidden story.
            FsmState fresh;
            fresh.next_seq = fsm_.state().next_seq;
            fresh.entered_at_ms = now_ms_;
            fsm_ = NarrativeMachine(config_.fsm, fresh);
        }
        return seq;
    }

    std::uint64_t set_threshold(double threshold_per_10k)
    {
        return apply_admin({{"op", "threshold"}, {"threshold_per_10k", threshold_per_10k}});
    }

    std::uint64_t set_mode(StoryMode mode) { return apply_admin({{"op", "mode"}, {"mode", to_string(mode)}}); }

    std::uint64_t set_viewers(std::int64_t count) { return apply_admin({{"op", "viewers"}, {"count", count}}); }

    std::uint64_t set_filter(nlohmann::json delta)
    {
        delta["op"] = "filter";
        return apply_admin(delta);
    }

    std::uint64_t notice(std::string_view text)
    {
        const auto length = text::decode_utf8(text).size();
        if (length == 0) throw Error(Errc::EmptyNotice, "notice text is empty");
        if (length > kMaxNoticeLength)
            throw Error(Errc::EmptyNotice, "notice exceeds " + std::to_string(kMaxNoticeLength) + " characters");
        const auto seq = next_seq();
        emit(LogRecord{seq, now_ms_, RecordKind::Notice, {{"text", std::string(text)}}});
        return seq;
    }

    PipelineSnapshot snapshot() const
    {
        PipelineSnapshot s{std::nullopt, last_verdict_, config_.mode, config_, now_ms_, seq_};
        if (story()) s.plot = fsm_.plot();
        return s;
    }

    const PipelineConfig& config() const { return config_; }
    std::int64_t now_ms() const { return now_ms_; }
    std::uint64_t last_seq() const { return seq_; }
    PlotState plot() const { return fsm_.plot(); }

private:
    bool story() const { return config_.mode == StoryMode::WithStory; }

    std::uint64_t next_seq() { return ++seq_; }

    void emit(const LogRecord& r)
    {
        if (emit_) emit_(r);
    }

    void feed(const FsmSignal& signal)
    {
        for (const auto& e : fsm_.feed(signal)) emit(transition_record(next_seq(), e));
    }

    void fire_boundaries(std::int64_t t, bool inclusive)
    {
        auto due = [&](std::int64_t b) { return inclusive ? b <= t : b < t; };
        for (;;) {
            const bool window_due = due(next_window_ms_);
            const bool tick_due = due(next_tick_ms_);
            if (!window_due && !tick_due) break;
            if (window_due && (!tick_due || next_window_ms_ <= next_tick_ms_)) {
                const auto b = next_window_ms_;
                next_window_ms_ += config_.detector.window_ms;
                now_ms_ = std::max(now_ms_, b);
                evaluate_window(b);
            } else {
                const auto b = next_tick_ms_;
                next_tick_ms_ += config_.tick_ms;
                now_ms_ = std::max(now_ms_, b);
                if (story()) feed(FsmSignal{SignalKind::Tick, b});
            }
        }
    }

    void evaluate_window(std::int64_t boundary)
    {
        last_verdict_ = detector_.evaluate(boundary, config_.nominal_viewers);
        emit(verdict_record(next_seq(), last_verdict_));
        if (story())
            feed(FsmSignal{last_verdict_.exceeded ? SignalKind::WindowExceeded : SignalKind::WindowBelow, boundary});
    }

    PipelineConfig config_;
    Emit emit_;
    Warn warn_;
    NegativityDetector detector_;
    NarrativeMachine fsm_;
    std::uint64_t seq_ = 0;
    std::int64_t now_ms_ = 0;
    std::int64_t next_window_ms_ = 0;
    std::int64_t next_tick_ms_ = 0;
    WindowVerdict last_verdict_;
};

/// WebSocket update derived from a log record; nullopt for records that are
/// not broadcast. `seq` is the record's log seq.
inline std::optional<nlohmann::json> client_update(const LogRecord& r, StoryMode mode)
{
    nlohmann::json u{{"seq", r.seq}, {"t", r.timestamp_ms}};
    switch (r.kind) {
    case RecordKind::Comment: {
        const auto& m = r.payload.at("message");
        u["type"] = "chat";
        u["id"] = m.at("id");
        u["author"] = m.at("author");
        u["body"] = m.at("body");
        u["source"] = m.at("source");
        u["negative"] = r.payload.at("result").at("label") == "negative";
        return u;
    }
    case RecordKind::Transition:
        if (mode != StoryMode::WithStory) return std::nullopt;
        u["type"] = "state";
        u["plot"] = r.payload.at("state");
        u["event"] = r.payload.at("event");
        return u;
    case RecordKind::Verdict:
        u["type"] = "stats";
        u["window"] = r.payload;
        u["mode"] = to_string(mode);
        return u;
    case RecordKind::Admin:
        u["type"] = "stats";
        u["admin"] = r.payload;
        u["mode"] = r.payload.value("op", "") == "mode" ? r.payload.at("mode").get<std::string>()
                                                       : std::string(to_string(mode));
        return u;
    case RecordKind::Notice:
        u["type"] = "notice";
        u["text"] = r.payload.at("text");
        return u;
    }
    return std::nullopt;
}

}  // namespace storychat
