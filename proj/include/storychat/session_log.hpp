#pragma once

// Append-only JSON Lines session log. Line 1 is the manifest, every following
// line one LogRecord. Replay re-emits the recorded inputs on their original
// timing, scaled by a speed factor.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "storychat/chat_message.hpp"
#include "storychat/classifier.hpp"
#include "storychat/detector.hpp"
#include "storychat/error.hpp"
#include "storychat/narrative.hpp"

namespace storychat {

enum class StoryMode { WithStory, WithoutStory };

constexpr std::string_view to_string(StoryMode m) noexcept
{
    return m == StoryMode::WithStory ? "with_story" : "without_story";
}

inline StoryMode story_mode_from_string(std::string_view s)
{
    if (s == "with_story") return StoryMode::WithStory;
    if (s == "without_story") return StoryMode::WithoutStory;
    throw Error(Errc::InvalidValue, "unknown mode '" + std::string(s) + "'");
}

enum class RecordKind { Comment, Verdict, Transition, Admin, Notice };

constexpr std::string_view to_string(RecordKind k) noexcept
{
    switch (k) {
    case RecordKind::Comment: return "comment";
    case RecordKind::Verdict: return "verdict";
    case RecordKind::Transition: return "transition";
    case RecordKind::Admin: return "admin";
    case RecordKind::Notice: return "notice";
    }
    return "comment";
}

inline RecordKind record_kind_from_string(std::string_view s)
{
    if (s == "comment") return RecordKind::Comment;
    if (s == "verdict") return RecordKind::Verdict;
    if (s == "transition") return RecordKind::Transition;
    if (s == "admin") return RecordKind::Admin;
    if (s == "notice") return RecordKind::Notice;
    throw Error(Errc::InvalidValue, "unknown record kind '" + std::string(s) + "'");
}

/// Payload shapes by kind:
///   comment:    {"message": ChatMessage, "result": ClassificationResult}
///   verdict:    WindowVerdict
///   transition: NarrativeEvent
///   admin:      {"op": ..., op-specific fields}
///   notice:     {"text": ...}
struct LogRecord {
    std::uint64_t seq = 0;
    std::int64_t timestamp_ms = 0;
    RecordKind kind = RecordKind::Comment;
    nlohmann::json payload = nlohmann::json::object();

    bool operator==(const LogRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const LogRecord& r)
{
    j = nlohmann::json{{"seq", r.seq}, {"t", r.timestamp_ms}, {"kind", to_string(r.kind)}, {"payload", r.payload}};
}

inline void from_json(const nlohmann::json& j, LogRecord& r)
{
    j.at("seq").get_to(r.seq);
    j.at("t").get_to(r.timestamp_ms);
    r.kind = record_kind_from_string(j.at("kind").get<std::string>());
    r.payload = j.at("payload");
    if (!r.payload.is_object()) throw Error(Errc::InvalidValue, "payload must be an object");
}

inline LogRecord comment_record(std::uint64_t seq, const ChatMessage& m, const ClassificationResult& r)
{
    return {seq, m.timestamp_ms, RecordKind::Comment, nlohmann::json{{"message", m}, {"result", r}}};
}

inline LogRecord verdict_record(std::uint64_t seq, const WindowVerdict& v)
{
    return {seq, v.window_end_ms, RecordKind::Verdict, nlohmann::json(v)};
}

inline LogRecord transition_record(std::uint64_t seq, const NarrativeEvent& e)
{
    return {seq, e.at_ms, RecordKind::Transition, nlohmann::json(e)};
}

struct CommentView {
    ChatMessage message;
    ClassificationResult result;
};

inline CommentView read_comment(const LogRecord& r)
{
    return {r.payload.at("message").get<ChatMessage>(), r.payload.at("result").get<ClassificationResult>()};
}

struct SessionManifest {
    std::string session_id;
    std::string started_at;  // RFC 3339
    StoryMode mode = StoryMode::WithStory;
    nlohmann::json configs = nlohmann::json::object();  // {classifier, detector, fsm}
    std::string channel;
    std::int64_t nominal_viewers = 0;

    bool operator==(const SessionManifest&) const = default;
};

inline void to_json(nlohmann::json& j, const SessionManifest& m)
{
    j = nlohmann::json{{"type", "manifest"},
                       {"session_id", m.session_id},
                       {"started_at", m.started_at},
                       {"mode", to_string(m.mode)},
                       {"configs", m.configs},
                       {"stream_meta", {{"channel", m.channel}, {"nominal_viewers", m.nominal_viewers}}}};
}

inline void from_json(const nlohmann::json& j, SessionManifest& m)
{
    if (j.value("type", "") != "manifest") throw Error(Errc::MissingManifest, "first line is not a manifest");
    j.at("session_id").get_to(m.session_id);
    j.at("started_at").get_to(m.started_at);
    m.mode = story_mode_from_string(j.at("mode").get<std::string>());
    m.configs = j.at("configs");
    j.at("stream_meta").at("channel").get_to(m.channel);
    j.at("stream_meta").at("nominal_viewers").get_to(m.nominal_viewers);
}

inline std::string rfc3339_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Single writer per session file. Flushes at least every 100 records or 1 s.
class SessionWriter {
public:
    static constexpr std::size_t kFlushEvery = 100;
    static constexpr std::chrono::seconds kFlushInterval{1};

    SessionWriter(const std::filesystem::path& path, const SessionManifest& manifest)
        : path_(path)
        , out_(path, std::ios::out | std::ios::trunc | std::ios::binary)
    {
        if (!out_) throw Error(Errc::StorageFull, "cannot open " + path.string());
        write_line(nlohmann::json(manifest).dump());
        flush();
    }

    SessionWriter(const SessionWriter&) = delete;
    SessionWriter& operator=(const SessionWriter&) = delete;

    ~SessionWriter()
    {
        try {
            flush();
        } catch (...) {
        }
    }

    void append(const LogRecord& record)
    {
        if (record.seq != last_seq_ + 1)
            throw Error(Errc::SequenceGap,
                        "expected seq " + std::to_string(last_seq_ + 1) + ", got " + std::to_string(record.seq));
        if (record.timestamp_ms < last_ts_)
            throw Error(Errc::InvalidValue, "timestamp regressed at seq " + std::to_string(record.seq));
        write_line(nlohmann::json(record).dump());
        last_seq_ = record.seq;
        last_ts_ = record.timestamp_ms;
        if (++unflushed_ >= kFlushEvery) flush();
        else maybe_flush();
    }

    /// Flushes if the interval elapsed; call from idle loops.
    void maybe_flush()
    {
        if (unflushed_ > 0 && std::chrono::steady_clock::now() - last_flush_ >= kFlushInterval) flush();
    }

    void flush()
    {
        out_.flush();
        if (!out_) throw Error(Errc::StorageFull, "flush failed on " + path_.string());
        unflushed_ = 0;
        last_flush_ = std::chrono::steady_clock::now();
    }

    std::uint64_t last_seq() const { return last_seq_; }
    const std::filesystem::path& path() const { return path_; }

private:
    void write_line(const std::string& line)
    {
        out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        out_.put('\n');
        if (!out_) throw Error(Errc::StorageFull, "write failed on " + path_.string());
    }

    std::filesystem::path path_;
    std::ofstream out_;
    std::uint64_t last_seq_ = 0;
    std::int64_t last_ts_ = 0;
    std::size_t unflushed_ = 0;
    std::chrono::steady_clock::time_point last_flush_ = std::chrono::steady_clock::now();
};

struct Corruption {
    std::size_t line = 0;  // 1-based; line 1 is the manifest
    std::string reason;
};

struct LoadedSession {
    SessionManifest manifest;
    std::vector<LogRecord> records;
    std::optional<Corruption> corruption;  // records stop before this line

    /// Timestamp of the last record, 0 for an empty session.
    std::int64_t end_ms() const { return records.empty() ? 0 : records.back().timestamp_ms; }
};

/// Throws MissingManifest when the manifest line is absent or unreadable.
/// A bad record line stops loading; everything before it is returned.
inline LoadedSession load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::MissingManifest, "cannot open " + path.string());

    LoadedSession session;
    std::string line;
    std::size_t line_no = 0;
    bool have_manifest = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_manifest) {
            try {
                session.manifest = nlohmann::json::parse(line).get<SessionManifest>();
            } catch (const std::exception& e) {
                throw Error(Errc::MissingManifest, "line 1: " + std::string(e.what()));
            }
            have_manifest = true;
            continue;
        }
        if (line.empty()) continue;
        LogRecord rec;
        try {
            rec = nlohmann::json::parse(line).get<LogRecord>();
        } catch (const std::exception& e) {
            session.corruption = Corruption{line_no, e.what()};
            break;
        }
        if (!session.records.empty()) {
            const auto& prev = session.records.back();
            if (rec.seq <= prev.seq) {
                session.corruption = Corruption{line_no, "seq not strictly increasing"};
                break;
            }
            if (rec.timestamp_ms < prev.timestamp_ms) {
                session.corruption = Corruption{line_no, "timestamp decreased"};
                break;
            }
        }
        session.records.push_back(std::move(rec));
    }
    if (!have_manifest) throw Error(Errc::MissingManifest, path.string() + " is empty");
    return session;
}

/// Like load(), but a corrupt line is an error.
inline LoadedSession load_strict(const std::filesystem::path& path)
{
    auto s = load(path);
    if (s.corruption)
        throw Error(Errc::CorruptRecord, path.string() + " line " + std::to_string(s.corruption->line) + ": " +
                                             s.corruption->reason);
    return s;
}

/// Calls `sink` for each item at start + (ts - first ts) / speed of wall time.
/// Returns false when stopped early.
template <typename Range, typename TimestampOf, typename Sink>
bool paced_for_each(const Range& items, TimestampOf timestamp_of, double speed, Sink&& sink,
                    std::stop_token stop = {})
{
    if (!(speed > 0.0)) throw Error(Errc::InvalidValue, "replay speed must be > 0");
    using clock = std::chrono::steady_clock;
    std::mutex m;
    std::condition_variable_any cv;
    const auto start = clock::now();
    std::optional<std::int64_t> first_ts;
    for (const auto& item : items) {
        const std::optional<std::int64_t> ts = timestamp_of(item);
        if (!ts) continue;
        if (!first_ts) first_ts = *ts;
        const double offset_ms = static_cast<double>(*ts - *first_ts) / speed;
        const auto due = start + std::chrono::duration_cast<clock::duration>(
                                     std::chrono::duration<double, std::milli>(offset_ms));
        if (clock::now() < due) {
            std::unique_lock lock(m);
            cv.wait_until(lock, stop, due, [] { return false; });
        }
        if (stop.stop_requested()) return false;
        sink(item);
    }
    return true;
}

struct ReplayOptions {
    double speed = 1.0;
    bool include_admin = true;  // re-apply recorded admin changes
};

/// Re-emits Comment (and optionally Admin) records to `sink`, paced by their
/// original timestamp deltas divided by `speed`. Verdicts and transitions
/// are not re-emitted; downstream recomputes them.
inline bool replay(const std::vector<LogRecord>& records, const ReplayOptions& options,
                   const std::function<void(const LogRecord&)>& sink, std::stop_token stop = {})
{
    return paced_for_each(
        records,
        [&](const LogRecord& r) -> std::optional<std::int64_t> {
            if (r.kind == RecordKind::Comment || (options.include_admin && r.kind == RecordKind::Admin))
                return r.timestamp_ms;
            return std::nullopt;
        },
        options.speed, sink, stop);
}

}  // namespace storychat
