#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>

#include <json.hpp>

#include "storychat/chat_message.hpp"
#include "storychat/classifier.hpp"
#include "storychat/error.hpp"

namespace storychat {

struct DetectorConfig {
    std::int64_t window_ms = 10000;
    double threshold_per_10k = 1.12;  // negative comments per 10k viewers per window
    double min_effective_threshold = 1.0;
    int deescalate_windows = 2;

    void validate() const
    {
        if (window_ms <= 0) throw Error(Errc::InvalidConfig, "window_ms must be > 0");
        if (!(threshold_per_10k >= 0.0)) throw Error(Errc::InvalidConfig, "threshold_per_10k must be >= 0");
        if (!(min_effective_threshold > 0.0))
            throw Error(Errc::InvalidConfig, "min_effective_threshold must be > 0");
        if (deescalate_windows < 1) throw Error(Errc::InvalidConfig, "deescalate_windows must be >= 1");
    }

    bool operator==(const DetectorConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const DetectorConfig& c)
{
    j = nlohmann::json{{"window_ms", c.window_ms},
                       {"threshold_per_10k", c.threshold_per_10k},
                       {"min_effective_threshold", c.min_effective_threshold},
                       {"deescalate_windows", c.deescalate_windows}};
}

inline void from_json(const nlohmann::json& j, DetectorConfig& c)
{
    c = DetectorConfig{};
    try {
        if (j.contains("window_ms")) j.at("window_ms").get_to(c.window_ms);
        if (j.contains("threshold_per_10k")) j.at("threshold_per_10k").get_to(c.threshold_per_10k);
        if (j.contains("min_effective_threshold")) j.at("min_effective_threshold").get_to(c.min_effective_threshold);
        if (j.contains("deescalate_windows")) j.at("deescalate_windows").get_to(c.deescalate_windows);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("detector config: ") + e.what());
    }
}

struct WindowVerdict {
    std::int64_t window_end_ms = 0;
    std::int64_t negative_count = 0;
    std::int64_t message_count = 0;
    std::int64_t viewer_count = 0;
    double effective_threshold = 0.0;
    bool exceeded = false;

    bool operator==(const WindowVerdict&) const = default;
};

inline void to_json(nlohmann::json& j, const WindowVerdict& v)
{
    j = nlohmann::json{{"window_end_ms", v.window_end_ms},
                       {"negative_count", v.negative_count},
                       {"message_count", v.message_count},
                       {"viewer_count", v.viewer_count},
                       {"effective_threshold", v.effective_threshold},
                       {"exceeded", v.exceeded}};
}

inline void from_json(const nlohmann::json& j, WindowVerdict& v)
{
    j.at("window_end_ms").get_to(v.window_end_ms);
    j.at("negative_count").get_to(v.negative_count);
    v.message_count = j.value("message_count", std::int64_t{0});
    j.at("viewer_count").get_to(v.viewer_count);
    j.at("effective_threshold").get_to(v.effective_threshold);
    j.at("exceeded").get_to(v.exceeded);
}

/// Viewer-normalized threshold, floored at min_effective_threshold.
inline double effective_threshold(std::int64_t viewers, const DetectorConfig& config)
{
    const double scaled = config.threshold_per_10k * static_cast<double>(std::max<std::int64_t>(viewers, 0)) / 10000.0;
    return std::max(config.min_effective_threshold, scaled);
}

/// Sliding buffer of classified messages. Single writer.
class NegativityDetector {
public:
    struct RecordOutcome {
        std::int64_t timestamp_ms;  // after clamping
        bool clamped;               // input regressed behind the newest entry
    };

    explicit NegativityDetector(DetectorConfig config = {})
        : config_(config)
    {
        config_.validate();
    }

    const DetectorConfig& config() const { return config_; }

    void set_config(const DetectorConfig& config)
    {
        config.validate();
        config_ = config;
    }

    RecordOutcome record(std::int64_t timestamp_ms, bool negative)
    {
        bool clamped = false;
        if (!entries_.empty() && timestamp_ms < entries_.back().timestamp_ms) {
            timestamp_ms = entries_.back().timestamp_ms;
            clamped = true;
        }
        entries_.push_back(Entry{timestamp_ms, negative});
        evict(timestamp_ms);
        return {timestamp_ms, clamped};
    }

    RecordOutcome record(const ChatMessage& message, const ClassificationResult& result)
    {
        return record(message.timestamp_ms, result.negative());
    }

    /// Counts messages in (now_ms - window_ms, now_ms].
    WindowVerdict evaluate(std::int64_t now_ms, std::int64_t viewers) const
    {
        WindowVerdict v;
        v.window_end_ms = now_ms;
        v.viewer_count = viewers;
        const std::int64_t lo = now_ms - config_.window_ms;
        for (const auto& e : entries_) {
            if (e.timestamp_ms <= lo || e.timestamp_ms > now_ms) continue;
            ++v.message_count;
            if (e.negative) ++v.negative_count;
        }
        v.effective_threshold = effective_threshold(viewers, config_);
        v.exceeded = static_cast<double>(v.negative_count) > v.effective_threshold;
        return v;
    }

    std::size_t size() const { return entries_.size(); }

    std::int64_t newest_ms() const { return entries_.empty() ? 0 : entries_.back().timestamp_ms; }

private:
    struct Entry {
        std::int64_t timestamp_ms;
        bool negative;
    };

    void evict(std::int64_t newest)
    {
        while (!entries_.empty() && entries_.front().timestamp_ms <= newest - config_.window_ms)
            entries_.pop_front();
    }

    DetectorConfig config_;
    std::deque<Entry> entries_;
};

}  // namespace storychat
