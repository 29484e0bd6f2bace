#pragma once

// IRC wire subset used by Twitch chat: line grammar, PRIVMSG mapping,
// keepalive and the login sequence.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "storychat/chat_message.hpp"
#include "storychat/error.hpp"

namespace storychat::irc {

inline constexpr std::size_t kMaxLineLength = 4096;

struct Frame {
    std::string raw;
    std::map<std::string, std::string> tags;
    std::optional<std::string> prefix;
    std::string command;
    std::vector<std::string> params;
    std::optional<std::string> trailing;
};

/// Same command, params, trailing, prefix and tag set; `raw` is ignored.
inline bool equivalent(const Frame& a, const Frame& b)
{
    return a.tags == b.tags && a.prefix == b.prefix && a.command == b.command &&
           a.params == b.params && a.trailing == b.trailing;
}

namespace detail {

inline std::string unescape_tag_value(std::string_view v)
{
    std::string out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != '\\') {
            out.push_back(v[i]);
            continue;
        }
        if (++i == v.size()) break;  // lone trailing backslash is dropped
        switch (v[i]) {
        case ':': out.push_back(';'); break;
        case 's': out.push_back(' '); break;
        case '\\': out.push_back('\\'); break;
        case 'r': out.push_back('\r'); break;
        case 'n': out.push_back('\n'); break;
        default: out.push_back(v[i]); break;
        }
    }
    return out;
}

inline std::string escape_tag_value(std::string_view v)
{
    std::string out;
    out.reserve(v.size());
    for (char c : v) {
        switch (c) {
        case ';': out += "\\:"; break;
        case ' ': out += "\\s"; break;
        case '\\': out += "\\\\"; break;
        case '\r': out += "\\r"; break;
        case '\n': out += "\\n"; break;
        default: out.push_back(c); break;
        }
    }
    return out;
}

inline std::string_view next_token(std::string_view& rest)
{
    const auto end = rest.find(' ');
    std::string_view tok = rest.substr(0, end);
    rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end + 1);
    return tok;
}

inline void skip_spaces(std::string_view& rest)
{
    const auto n = rest.find_first_not_of(' ');
    rest = n == std::string_view::npos ? std::string_view{} : rest.substr(n);
}

}  // namespace detail

/// Parse one line (without CR/LF) per the IRC message grammar.
inline Frame parse_line(std::string_view raw)
{
    if (raw.size() > kMaxLineLength)
        throw Error(Errc::OversizedLine, std::to_string(raw.size()) + " bytes");
    while (!raw.empty() && (raw.back() == '\n' || raw.back() == '\r'))
        raw.remove_suffix(1);

    Frame frame;
    frame.raw = std::string(raw);
    std::string_view rest = raw;
    detail::skip_spaces(rest);

    if (!rest.empty() && rest.front() == '@') {
        rest.remove_prefix(1);
        std::string_view tags = detail::next_token(rest);
        while (!tags.empty()) {
            const auto semi = tags.find(';');
            std::string_view kv = tags.substr(0, semi);
            tags = semi == std::string_view::npos ? std::string_view{} : tags.substr(semi + 1);
            if (kv.empty()) continue;
            const auto eq = kv.find('=');
            std::string key(kv.substr(0, eq));
            std::string value = eq == std::string_view::npos
                                    ? std::string{}
                                    : detail::unescape_tag_value(kv.substr(eq + 1));
            frame.tags.insert_or_assign(std::move(key), std::move(value));
        }
        detail::skip_spaces(rest);
    }

    if (!rest.empty() && rest.front() == ':') {
        rest.remove_prefix(1);
        frame.prefix = std::string(detail::next_token(rest));
        detail::skip_spaces(rest);
    }

    frame.command = std::string(detail::next_token(rest));
    if (frame.command.empty()) throw Error(Errc::MalformedFrame, "no command token");

    for (;;) {
        detail::skip_spaces(rest);
        if (rest.empty()) break;
        if (rest.front() == ':') {
            frame.trailing = std::string(rest.substr(1));
            break;
        }
        frame.params.emplace_back(detail::next_token(rest));
    }
    return frame;
}

/// Canonical wire form of a frame (no CR/LF).
inline std::string serialize(const Frame& frame)
{
    std::string out;
    if (!frame.tags.empty()) {
        out.push_back('@');
        bool first = true;
        for (const auto& [key, value] : frame.tags) {
            if (!first) out.push_back(';');
            first = false;
            out += key;
            if (!value.empty()) {
                out.push_back('=');
                out += detail::escape_tag_value(value);
            }
        }
        out.push_back(' ');
    }
    if (frame.prefix) {
        out.push_back(':');
        out += *frame.prefix;
        out.push_back(' ');
    }
    out += frame.command;
    for (const auto& p : frame.params) {
        out.push_back(' ');
        out += p;
    }
    if (frame.trailing) {
        out += " :";
        out += *frame.trailing;
    }
    return out;
}

/// Nick portion of a `nick!user@host` prefix.
inline std::string nick_of(std::string_view prefix)
{
    const auto cut = prefix.find_first_of("!@");
    return std::string(prefix.substr(0, cut));
}

/// Trims ASCII whitespace and unwraps CTCP ACTION (`/me`) bodies.
inline std::string normalize_body(std::string_view body)
{
    constexpr std::string_view kWs = " \t\r\n\v\f";
    constexpr std::string_view kAction = "\x01" "ACTION ";
    if (body.starts_with(kAction)) {
        body.remove_prefix(kAction.size());
        if (!body.empty() && body.back() == '\x01') body.remove_suffix(1);
    }
    const auto b = body.find_first_not_of(kWs);
    if (b == std::string_view::npos) return {};
    const auto e = body.find_last_not_of(kWs);
    return std::string(body.substr(b, e - b + 1));
}

inline std::optional<ChatMessage> frame_to_message(const Frame& frame, Source source,
                                                   SessionClock& clock)
{
    if (frame.command != "PRIVMSG" || frame.params.empty()) return std::nullopt;
    std::string_view text;
    if (frame.trailing)
        text = *frame.trailing;
    else if (frame.params.size() >= 2)
        text = frame.params[1];
    std::string body = normalize_body(text);
    if (body.empty()) return std::nullopt;

    ChatMessage msg;
    msg.id = clock.next_id("irc");
    msg.channel = frame.params.front();
    msg.author = frame.prefix ? nick_of(*frame.prefix) : std::string{};
    msg.body = std::move(body);
    msg.timestamp_ms = clock.now_ms();
    msg.source = source;
    return msg;
}

inline std::optional<std::string> keepalive_response(const Frame& frame)
{
    if (frame.command != "PING") return std::nullopt;
    return "PONG :" + frame.trailing.value_or(std::string{});
}

inline std::string channel_name(std::string_view channel)
{
    if (channel.starts_with('#')) return std::string(channel);
    return "#" + std::string(channel);
}

/// Login lines in send order. PASS is omitted for anonymous (no token) logins.
inline std::vector<std::string> login_lines(const std::optional<std::string>& token,
                                            std::string_view nick, std::string_view channel)
{
    std::vector<std::string> lines;
    lines.emplace_back("CAP REQ :twitch.tv/tags");
    if (token) lines.push_back("PASS " + *token);
    lines.push_back("NICK " + std::string(nick));
    lines.push_back("JOIN " + channel_name(channel));
    return lines;
}

inline std::string privmsg_line(std::string_view channel, std::string_view text)
{
    return "PRIVMSG " + channel_name(channel) + " :" + std::string(text);
}

/// Exponential reconnect delay: 1 s doubling to a 60 s cap.
class ReconnectBackoff {
public:
    using duration = std::chrono::milliseconds;

    explicit ReconnectBackoff(duration initial = std::chrono::seconds(1),
                              duration cap = std::chrono::seconds(60))
        : initial_(initial)
        , cap_(cap)
        , next_(initial)
    {
    }

    duration next()
    {
        const duration d = next_;
        next_ = std::min(cap_, next_ * 2);
        return d;
    }

    void reset() { next_ = initial_; }

private:
    duration initial_;
    duration cap_;
    duration next_;
};

}  // namespace storychat::irc
