#pragma once

// Batch measurements over loaded session logs: label counts, plot timeline,
// and the prosocial surge around a plot-state entry.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "storychat/error.hpp"
#include "storychat/narrative.hpp"
#include "storychat/session_log.hpp"

namespace storychat {

enum class ManualLabel { Prosocial, Negative, Neutral };

inline ManualLabel manual_label_from_string(std::string_view s)
{
    if (s == "prosocial") return ManualLabel::Prosocial;
    if (s == "negative") return ManualLabel::Negative;
    if (s == "neutral") return ManualLabel::Neutral;
    throw Error(Errc::InvalidValue, "unknown label '" + std::string(s) + "'");
}

/// Post-hoc manual coding keyed by message id. Never feeds back into the engine.
using LabelOverlay = std::map<std::string, ManualLabel>;

/// Reads `<session>.labels.jsonl`: one {"id": ..., "label": ...} per line.
inline LabelOverlay load_overlay(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::MissingOverlay, "cannot open " + path.string());
    LabelOverlay overlay;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line == "\r") continue;
        try {
            const auto j = nlohmann::json::parse(line);
            overlay[j.at("id").get<std::string>()] = manual_label_from_string(j.at("label").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::InvalidValue, path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    return overlay;
}

struct LabelCounts {
    std::int64_t total = 0;
    std::int64_t negative = 0;
    std::int64_t neutral = 0;
    std::int64_t prosocial = 0;

    bool operator==(const LabelCounts&) const = default;
};

inline void to_json(nlohmann::json& j, const LabelCounts& c)
{
    j = nlohmann::json{{"total", c.total}, {"negative", c.negative}, {"neutral", c.neutral}, {"prosocial", c.prosocial}};
}

struct MinuteBucket {
    std::int64_t minute = 0;
    LabelCounts counts;
};

struct SessionStats {
    LabelCounts overall;
    std::map<std::string, LabelCounts> per_source;
    std::vector<MinuteBucket> per_minute;  // contiguous from minute 0
    bool overlay_applied = false;
};

inline void to_json(nlohmann::json& j, const SessionStats& s)
{
    nlohmann::json minutes = nlohmann::json::array();
    for (const auto& b : s.per_minute) {
        nlohmann::json m = b.counts;
        m["minute"] = b.minute;
        minutes.push_back(std::move(m));
    }
    j = s.overall;
    j["per_source"] = s.per_source;
    j["per_minute"] = minutes;
    j["overlay_applied"] = s.overlay_applied;
}

/// Negative comes from the logged classification. Without an overlay every
/// other comment is neutral; with one, non-negative comments coded prosocial
/// move from neutral to prosocial.
inline SessionStats session_stats(const LoadedSession& session, const LabelOverlay* overlay = nullptr)
{
    SessionStats stats;
    stats.overlay_applied = overlay != nullptr;
    std::set<std::string> seen;
    std::map<std::int64_t, LabelCounts> minutes;

    for (const auto& rec : session.records) {
        if (rec.kind != RecordKind::Comment) continue;
        const auto c = read_comment(rec);
        seen.insert(c.message.id);
        LabelCounts delta;
        delta.total = 1;
        if (c.result.negative()) {
            delta.negative = 1;
        } else if (overlay) {
            auto it = overlay->find(c.message.id);
            if (it != overlay->end() && it->second == ManualLabel::Prosocial)
                delta.prosocial = 1;
            else
                delta.neutral = 1;
        } else {
            delta.neutral = 1;
        }
        auto add = [&](LabelCounts& into) {
            into.total += delta.total;
            into.negative += delta.negative;
            into.neutral += delta.neutral;
            into.prosocial += delta.prosocial;
        };
        add(stats.overall);
        add(stats.per_source[std::string(to_string(c.message.source))]);
        add(minutes[c.message.timestamp_ms / 60000]);
    }
    if (overlay) {
        for (const auto& [id, label] : *overlay)
            if (!seen.count(id)) throw Error(Errc::OverlayIdMismatch, "overlay id '" + id + "' not in log");
    }
    if (!minutes.empty()) {
        const auto last = minutes.rbegin()->first;
        for (std::int64_t m = 0; m <= last; ++m) {
            auto it = minutes.find(m);
            stats.per_minute.push_back({m, it == minutes.end() ? LabelCounts{} : it->second});
        }
    }
    return stats;
}

struct PlotInterval {
    PlotState state;
    std::int64_t enter_ms;
    std::int64_t exit_ms;

    bool operator==(const PlotInterval&) const = default;
};

inline void to_json(nlohmann::json& j, const PlotInterval& i)
{
    j = nlohmann::json{{"state", to_string(i.state)}, {"enter_ms", i.enter_ms}, {"exit_ms", i.exit_ms}};
}

/// Contiguous intervals covering [0, session end], starting at stable.
inline std::vector<PlotInterval> transition_timeline(const LoadedSession& session)
{
    if (session.manifest.mode != StoryMode::WithStory)
        throw Error(Errc::NotWithStory, "session " + session.manifest.session_id + " ran without the story");
    std::vector<PlotInterval> out;
    PlotInterval current{PlotState::Stable, 0, 0};
    for (const auto& rec : session.records) {
        if (rec.kind != RecordKind::Transition) continue;
        const auto e = rec.payload.get<NarrativeEvent>();
        if (e.kind != EventKind::StateChanged) continue;
        current.exit_ms = rec.timestamp_ms;
        out.push_back(current);
        current = PlotInterval{e.state, rec.timestamp_ms, rec.timestamp_ms};
    }
    current.exit_ms = std::max(current.enter_ms, session.end_ms());
    out.push_back(current);
    return out;
}

struct SurgeResult {
    std::size_t entries = 0;
    double mean_before = 0.0;
    double mean_after = 0.0;
    std::optional<double> percent_change;  // empty when before is 0 and after is not
};

inline void to_json(nlohmann::json& j, const SurgeResult& s)
{
    j = nlohmann::json{{"entries", s.entries},
                       {"mean_before", s.mean_before},
                       {"mean_after", s.mean_after},
                       {"percent_change", s.percent_change ? nlohmann::json(*s.percent_change) : nlohmann::json(nullptr)}};
}

/// Prosocial comments in [t - horizon, t) logged before each entry into
/// `state`, against those in [t, t + horizon] logged after it. Counts are
/// averaged over entries; the result is (after - before) / before * 100,
/// and 0 when both sides are 0.
inline SurgeResult post_event_surge(const LoadedSession& session, const LabelOverlay* overlay, PlotState state,
                                    std::int64_t horizon_ms = 10000)
{
    if (!overlay) throw Error(Errc::MissingOverlay, "surge needs a label overlay");

    struct Entry {
        std::uint64_t seq;
        std::int64_t t;
    };
    struct Prosocial {
        std::uint64_t seq;
        std::int64_t t;
    };
    std::vector<Entry> entries;
    std::vector<Prosocial> prosocial;
    for (const auto& rec : session.records) {
        if (rec.kind == RecordKind::Transition) {
            const auto e = rec.payload.get<NarrativeEvent>();
            if (e.kind == EventKind::StateChanged && e.state == state) entries.push_back({rec.seq, rec.timestamp_ms});
        } else if (rec.kind == RecordKind::Comment) {
            const auto& id = rec.payload.at("message").at("id").get_ref<const std::string&>();
            auto it = overlay->find(id);
            if (it != overlay->end() && it->second == ManualLabel::Prosocial)
                prosocial.push_back({rec.seq, rec.timestamp_ms});
        }
    }
    if (entries.empty())
        throw Error(Errc::NoSuchEvent, "no entry into " + std::string(to_string(state)) + " in session");

    SurgeResult r;
    r.entries = entries.size();
    std::int64_t before = 0;
    std::int64_t after = 0;
    for (const auto& e : entries) {
        for (const auto& p : prosocial) {
            if (p.seq < e.seq && p.t >= e.t - horizon_ms) ++before;
            if (p.seq > e.seq && p.t <= e.t + horizon_ms) ++after;
        }
    }
    r.mean_before = static_cast<double>(before) / static_cast<double>(entries.size());
    r.mean_after = static_cast<double>(after) / static_cast<double>(entries.size());
    if (before == 0 && after == 0)
        r.percent_change = 0.0;
    else if (before > 0)
        r.percent_change = (r.mean_after - r.mean_before) / r.mean_before * 100.0;
    return r;
}

}  // namespace storychat
