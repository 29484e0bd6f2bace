#pragma once

// Admin/participant HTTP surface, independent of the transport.
//
//   GET  /state
//   POST /admin/threshold {value}
//   POST /admin/filter    {enabled_rules, caps_ratio_max, ...}
//   POST /admin/mode      {mode}
//   POST /admin/notice    {text}
//   POST /admin/viewers   {count}
//   POST /room/comment    {author, body}     (X-Participant-Token)

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "storychat/broadcast.hpp"
#include "storychat/error.hpp"
#include "storychat/session_log.hpp"

namespace storychat {

inline constexpr std::string_view kAdminTokenHeader = "X-Admin-Token";
inline constexpr std::string_view kParticipantTokenHeader = "X-Participant-Token";

class ControlSurface {
public:
    virtual ~ControlSurface() = default;

    // Each mutating call returns the seq of the log record it produced.
    virtual std::uint64_t set_threshold(double threshold_per_10k) = 0;
    virtual std::uint64_t set_filter(const nlohmann::json& delta) = 0;
    virtual std::uint64_t set_mode(StoryMode mode) = 0;
    virtual std::uint64_t set_viewers(std::int64_t count) = 0;
    virtual std::uint64_t broadcast_notice(const std::string& text) = 0;
    virtual std::uint64_t submit_comment(std::string_view token, const std::string& author, const std::string& body) = 0;
    virtual nlohmann::json get_state() = 0;

    virtual bool admin_authorized(std::string_view token) const = 0;
    virtual BroadcastHub& hub() = 0;
    virtual std::size_t client_buffer() const = 0;
};

struct HttpReply {
    unsigned status = 200;
    nlohmann::json body;
};

inline unsigned http_status_for(Errc code)
{
    switch (code) {
    case Errc::Unauthenticated: return 401;
    case Errc::InvalidValue:
    case Errc::InvalidConfig:
    case Errc::EmptyNotice:
    case Errc::EmptyBody: return 400;
    default: return 500;
    }
}

inline HttpReply error_reply(unsigned status, std::string_view code, std::string_view message)
{
    return {status, {{"ok", false}, {"error", code}, {"message", message}}};
}

inline HttpReply route(ControlSurface& control, std::string_view method, std::string_view target,
                       std::string_view admin_token, std::string_view participant_token, std::string_view body)
{
    if (const auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
    const bool get = method == "GET";
    const bool post = method == "POST";
    auto ack = [](std::uint64_t seq) { return HttpReply{200, {{"ok", true}, {"seq", seq}}}; };

    try {
        if (target == "/state") {
            if (!get) return error_reply(405, "MethodNotAllowed", "use GET");
            return {200, control.get_state()};
        }
        if (target == "/healthz") return {200, {{"ok", true}}};

        const bool admin = target.starts_with("/admin/");
        const bool room = target == "/room/comment";
        if (!admin && !room) return error_reply(404, "NotFound", target);
        if (!post) return error_reply(405, "MethodNotAllowed", "use POST");
        if (admin && !control.admin_authorized(admin_token))
            return error_reply(401, "Unauthenticated", "missing or wrong admin token");

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body.empty() ? std::string_view("{}") : body);
        } catch (const nlohmann::json::exception& e) {
            return error_reply(400, "InvalidValue", e.what());
        }
        if (!j.is_object()) return error_reply(400, "InvalidValue", "body must be a JSON object");

        try {
            if (target == "/admin/threshold") return ack(control.set_threshold(j.at("value").get<double>()));
            if (target == "/admin/filter") return ack(control.set_filter(j));
            if (target == "/admin/mode") return ack(control.set_mode(story_mode_from_string(j.at("mode").get<std::string>())));
            if (target == "/admin/viewers") return ack(control.set_viewers(j.at("count").get<std::int64_t>()));
            if (target == "/admin/notice") return ack(control.broadcast_notice(j.at("text").get<std::string>()));
            if (room)
                return ack(control.submit_comment(participant_token, j.value("author", std::string{}),
                                                  j.value("body", std::string{})));
        } catch (const nlohmann::json::exception& e) {
            return error_reply(400, "InvalidValue", e.what());
        }
        return error_reply(404, "NotFound", target);
    } catch (const Error& e) {
        return error_reply(http_status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_reply(500, "Internal", e.what());
    }
}

}  // namespace storychat
