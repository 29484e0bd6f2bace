#pragma once

#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "storychat/chat_message.hpp"
#include "storychat/error.hpp"

namespace storychat {

enum class SourceMode { IrcLive, LocalRoom, ReplayFile, Synthetic };

constexpr std::string_view to_string(SourceMode m) noexcept
{
    switch (m) {
    case SourceMode::IrcLive: return "irc_live";
    case SourceMode::LocalRoom: return "local_room";
    case SourceMode::ReplayFile: return "replay_file";
    case SourceMode::Synthetic: return "synthetic";
    }
    return "local_room";
}

inline SourceMode source_mode_from_string(std::string_view s)
{
    if (s == "irc_live") return SourceMode::IrcLive;
    if (s == "local_room") return SourceMode::LocalRoom;
    if (s == "replay_file") return SourceMode::ReplayFile;
    if (s == "synthetic") return SourceMode::Synthetic;
    throw Error(Errc::InvalidConfig, "unknown source mode '" + std::string(s) + "'");
}

struct SourceConfig {
    SourceMode mode = SourceMode::LocalRoom;
    std::string endpoint;  // host:port, or a file path for replay/synthetic
    std::string channel;
    std::optional<std::string> credentials;
    std::string nick = "justinfan31415";

    void validate() const
    {
        if ((mode == SourceMode::IrcLive || mode == SourceMode::ReplayFile ||
             mode == SourceMode::Synthetic) &&
            endpoint.empty())
            throw Error(Errc::InvalidConfig,
                        "source endpoint required for mode " + std::string(to_string(mode)));
    }
};

inline void to_json(nlohmann::json& j, const SourceConfig& c)
{
    j = nlohmann::json{{"mode", to_string(c.mode)},
                       {"endpoint", c.endpoint},
                       {"channel", c.channel},
                       {"nick", c.nick}};
    if (c.credentials) j["credentials"] = *c.credentials;
}

inline void from_json(const nlohmann::json& j, SourceConfig& c)
{
    c = SourceConfig{};
    if (j.contains("mode")) c.mode = source_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("endpoint")) j.at("endpoint").get_to(c.endpoint);
    if (j.contains("channel")) j.at("channel").get_to(c.channel);
    if (j.contains("nick")) j.at("nick").get_to(c.nick);
    if (j.contains("credentials") && !j.at("credentials").is_null())
        c.credentials = j.at("credentials").get<std::string>();
}

/// Pull-based message source. Returning nullopt (or throwing SourceClosed)
/// ends this source.
class MessageStream {
public:
    virtual ~MessageStream() = default;
    virtual std::optional<ChatMessage> next() = 0;
};

class VectorStream final : public MessageStream {
public:
    explicit VectorStream(std::vector<ChatMessage> messages)
        : messages_(std::move(messages))
    {
    }

    std::optional<ChatMessage> next() override
    {
        if (pos_ >= messages_.size()) return std::nullopt;
        return messages_[pos_++];
    }

private:
    std::vector<ChatMessage> messages_;
    std::size_t pos_ = 0;
};

/// Merge order: timestamp, then source rank, then id.
inline bool merge_before(const ChatMessage& a, const ChatMessage& b)
{
    return std::forward_as_tuple(a.timestamp_ms, source_rank(a.source), a.id) <
           std::forward_as_tuple(b.timestamp_ms, source_rank(b.source), b.id);
}

class MergedStream final : public MessageStream {
public:
    explicit MergedStream(std::vector<std::unique_ptr<MessageStream>> sources)
        : sources_(std::move(sources))
    {
        for (std::size_t i = 0; i < sources_.size(); ++i) pull(i);
    }

    std::optional<ChatMessage> next() override
    {
        if (heads_.empty()) return std::nullopt;
        Head top = heads_.top();
        heads_.pop();
        pull(top.index);
        return std::move(top.message);
    }

private:
    struct Head {
        ChatMessage message;
        std::size_t index;
    };
    struct Later {
        bool operator()(const Head& a, const Head& b) const
        {
            return merge_before(b.message, a.message);
        }
    };

    void pull(std::size_t index)
    {
        auto& src = sources_[index];
        if (!src) return;
        try {
            if (auto m = src->next()) {
                heads_.push(Head{std::move(*m), index});
                return;
            }
        } catch (const Error& e) {
            if (e.code() != Errc::SourceClosed) throw;
        }
        src.reset();
    }

    std::vector<std::unique_ptr<MessageStream>> sources_;
    std::priority_queue<Head, std::vector<Head>, Later> heads_;
};

inline std::unique_ptr<MessageStream> merge_sources(std::vector<std::unique_ptr<MessageStream>> sources)
{
    if (sources.empty()) throw Error(Errc::InvalidValue, "merge_sources needs at least one source");
    if (sources.size() == 1) return std::move(sources.front());
    return std::make_unique<MergedStream>(std::move(sources));
}

/// Drains a stream into a vector.
inline std::vector<ChatMessage> drain(MessageStream& stream)
{
    std::vector<ChatMessage> out;
    while (auto m = stream.next()) out.push_back(std::move(*m));
    return out;
}

inline std::vector<ChatMessage> merge_vectors(std::vector<std::vector<ChatMessage>> sources)
{
    std::vector<std::unique_ptr<MessageStream>> streams;
    streams.reserve(sources.size());
    for (auto& s : sources) streams.push_back(std::make_unique<VectorStream>(std::move(s)));
    return drain(*merge_sources(std::move(streams)));
}

}  // namespace storychat
