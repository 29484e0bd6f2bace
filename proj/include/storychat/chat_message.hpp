#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "storychat/error.hpp"

namespace storychat {

enum class Source { External, Participant, Replay, Synthetic };

/// Tie-break rank used when two sources deliver at the same millisecond.
constexpr int source_rank(Source s) noexcept
{
    switch (s) {
    case Source::Participant: return 0;
    case Source::External: return 1;
    case Source::Replay: return 2;
    case Source::Synthetic: return 3;
    }
    return 4;
}

constexpr std::string_view to_string(Source s) noexcept
{
    switch (s) {
    case Source::External: return "external";
    case Source::Participant: return "participant";
    case Source::Replay: return "replay";
    case Source::Synthetic: return "synthetic";
    }
    return "external";
}

inline Source source_from_string(std::string_view s)
{
    if (s == "external") return Source::External;
    if (s == "participant") return Source::Participant;
    if (s == "replay") return Source::Replay;
    if (s == "synthetic") return Source::Synthetic;
    throw Error(Errc::InvalidValue, "unknown source '" + std::string(s) + "'");
}

struct ChatMessage {
    std::string id;
    std::string channel;
    std::string author;
    std::string body;
    std::int64_t timestamp_ms = 0;
    Source source = Source::External;

    bool operator==(const ChatMessage&) const = default;
};

inline void to_json(nlohmann::json& j, const ChatMessage& m)
{
    j = nlohmann::json{{"id", m.id},
                       {"channel", m.channel},
                       {"author", m.author},
                       {"body", m.body},
                       {"timestamp_ms", m.timestamp_ms},
                       {"source", to_string(m.source)}};
}

inline void from_json(const nlohmann::json& j, ChatMessage& m)
{
    j.at("id").get_to(m.id);
    j.at("channel").get_to(m.channel);
    j.at("author").get_to(m.author);
    j.at("body").get_to(m.body);
    j.at("timestamp_ms").get_to(m.timestamp_ms);
    m.source = source_from_string(j.at("source").get<std::string>());
}

/// Milliseconds since session start plus a per-session id counter.
class SessionClock {
public:
    virtual ~SessionClock() = default;
    virtual std::int64_t now_ms() = 0;

    std::string next_id(std::string_view prefix)
    {
        return std::string(prefix) + "-" + std::to_string(++counter_);
    }

private:
    std::atomic<std::uint64_t> counter_{0};
};

class SteadySessionClock final : public SessionClock {
public:
    SteadySessionClock()
        : start_(std::chrono::steady_clock::now())
    {
    }

    std::int64_t now_ms() override
    {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

    std::chrono::steady_clock::time_point start() const { return start_; }

private:
    std::chrono::steady_clock::time_point start_;
};

class ManualSessionClock final : public SessionClock {
public:
    explicit ManualSessionClock(std::int64_t start_ms = 0)
        : now_(start_ms)
    {
    }

    std::int64_t now_ms() override { return now_; }
    void set(std::int64_t ms) { now_ = ms; }
    void advance(std::int64_t ms) { now_ += ms; }

private:
    std::int64_t now_;
};

}  // namespace storychat
