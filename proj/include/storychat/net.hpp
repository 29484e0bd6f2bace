#pragma once

// Transports on one Asio io_context: HTTP + WebSocket listener (Beast),
// the Twitch IRC client, and the NDJSON participant room socket.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "storychat/broadcast.hpp"
#include "storychat/chat_message.hpp"
#include "storychat/control.hpp"
#include "storychat/error.hpp"
#include "storychat/irc.hpp"
#include "storychat/ingest.hpp"

namespace storychat::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct HostPort {
    std::string host;
    std::string port;
};

/// "host:port", ":port" or "port". An empty host binds/connects to 127.0.0.1.
inline HostPort split_host_port(std::string_view address)
{
    const auto colon = address.rfind(':');
    HostPort hp;
    if (colon == std::string_view::npos) {
        hp.port = std::string(address);
    } else {
        hp.host = std::string(address.substr(0, colon));
        hp.port = std::string(address.substr(colon + 1));
    }
    if (hp.host.empty()) hp.host = "127.0.0.1";
    if (hp.port.empty()) throw Error(Errc::InvalidConfig, "no port in address '" + std::string(address) + "'");
    return hp;
}

inline tcp::endpoint resolve_listen(asio::io_context& io, std::string_view address)
{
    const auto hp = split_host_port(address);
    tcp::resolver resolver(io);
    auto results = resolver.resolve(hp.host, hp.port, tcp::resolver::passive);
    if (results.empty()) throw Error(Errc::InvalidConfig, "cannot resolve " + std::string(address));
    return results.begin()->endpoint();
}

/// WebSocket client connection. Holds at most `limit` pending updates; a
/// client that falls further behind is disconnected.
class WsSession final : public Subscriber, public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, BroadcastHub& hub, std::size_t limit)
        : ws_(std::move(socket))
        , hub_(hub)
        , limit_(limit)
    {
    }

    template <class Body, class Allocator>
    void run(http::request<Body, http::basic_fields<Allocator>> req)
    {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

    void deliver(const Payload& payload) override
    {
        asio::post(ws_.get_executor(), [self = shared_from_this(), payload] { self->enqueue(payload); });
    }

    std::uint64_t dropped() const { return dropped_; }

private:
    void on_accept(beast::error_code ec)
    {
        if (ec) return;
        ws_.text(true);
        hub_.add(shared_from_this());
        do_read();
    }

    // Inbound frames are ignored; reading detects the close handshake.
    void do_read()
    {
        ws_.async_read(inbound_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->shutdown();
            self->inbound_.consume(self->inbound_.size());
            self->do_read();
        });
    }

    void enqueue(const Payload& payload)
    {
        if (closed_) return;
        if (queue_.size() >= limit_) {
            spdlog::warn("dropping slow websocket client ({} updates pending)", queue_.size());
            ++dropped_;
            return shutdown();
        }
        queue_.push_back(payload);
        if (!writing_) do_write();
    }

    void do_write()
    {
        writing_ = true;
        ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->shutdown();
            self->queue_.pop_front();
            if (self->queue_.empty())
                self->writing_ = false;
            else
                self->do_write();
        });
    }

    void shutdown()
    {
        if (closed_) return;
        closed_ = true;
        hub_.remove(this);
        // queue_ stays: an in-flight write still points into its front
        beast::error_code ignored;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
        beast::get_lowest_layer(ws_).socket().close(ignored);
    }

    websocket::stream<beast::tcp_stream> ws_;
    BroadcastHub& hub_;
    std::size_t limit_;
    beast::flat_buffer inbound_;
    std::deque<Payload> queue_;
    bool writing_ = false;
    bool closed_ = false;
    std::uint64_t dropped_ = 0;
};

class HttpSession final : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, ControlSurface& control)
        : stream_(std::move(socket))
        , control_(control)
    {
    }

    void run() { do_read(); }

private:
    void do_read()
    {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t)
    {
        if (ec) return close();
        if (websocket::is_upgrade(req_)) {
            if (req_.target() != "/ws") return close();
            stream_.expires_never();
            std::make_shared<WsSession>(stream_.release_socket(), control_.hub(), control_.client_buffer())
                ->run(std::move(req_));
            return;
        }

        const auto field = [&](std::string_view name) {
            auto it = req_.find(beast::string_view(name.data(), name.size()));
            return it == req_.end() ? std::string_view{} : std::string_view(it->value().data(), it->value().size());
        };
        const auto method = std::string_view(req_.method_string().data(), req_.method_string().size());
        const auto target = std::string_view(req_.target().data(), req_.target().size());
        HttpReply reply = route(control_, method, target, field(kAdminTokenHeader), field(kParticipantTokenHeader),
                                req_.body());

        auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(reply.status),
                                                                       req_.version());
        res->set(http::field::content_type, "application/json");
        res->set(http::field::access_control_allow_origin, "*");
        res->keep_alive(req_.keep_alive());
        res->body() = reply.body.dump();
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
            if (wec || !res->keep_alive()) return self->close();
            self->do_read();
        });
    }

    void close()
    {
        beast::error_code ignored;
        stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    ControlSurface& control_;
};

/// Accept loop handing each connection to `on_socket`.
class Listener final : public std::enable_shared_from_this<Listener> {
public:
    Listener(asio::io_context& io, const tcp::endpoint& endpoint, std::function<void(tcp::socket&&)> on_socket)
        : acceptor_(io)
        , on_socket_(std::move(on_socket))
    {
        acceptor_.open(endpoint.protocol());
        acceptor_.set_option(asio::socket_base::reuse_address(true));
        acceptor_.bind(endpoint);
        acceptor_.listen(asio::socket_base::max_listen_connections);
    }

    void start() { do_accept(); }

    void stop()
    {
        beast::error_code ignored;
        acceptor_.close(ignored);
    }

    std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

private:
    void do_accept()
    {
        acceptor_.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
            if (ec == asio::error::operation_aborted) return;
            if (!ec) self->on_socket_(std::move(socket));
            if (self->acceptor_.is_open()) self->do_accept();
        });
    }

    tcp::acceptor acceptor_;
    std::function<void(tcp::socket&&)> on_socket_;
};

/// Participant room over a plain socket: one JSON object per line in,
/// {"token","author","body"}; one JSON ack per line out.
class RoomSession final : public std::enable_shared_from_this<RoomSession> {
public:
    RoomSession(tcp::socket&& socket, ControlSurface& control)
        : socket_(std::move(socket))
        , control_(control)
    {
    }

    void run() { do_read(); }

private:
    void do_read()
    {
        asio::async_read_until(socket_, asio::dynamic_buffer(buffer_, 64 * 1024), '\n',
                               [self = shared_from_this()](beast::error_code ec, std::size_t n) {
                                   if (ec) return;
                                   std::string line = self->buffer_.substr(0, n - 1);
                                   self->buffer_.erase(0, n);
                                   self->handle(line);
                               });
    }

    void handle(std::string line)
    {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        nlohmann::json reply;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto seq = control_.submit_comment(j.value("token", std::string{}), j.value("author", std::string{}),
                                                     j.value("body", std::string{}));
            reply = {{"ok", true}, {"seq", seq}};
        } catch (const Error& e) {
            reply = {{"ok", false}, {"error", to_string(e.code())}, {"message", e.what()}};
        } catch (const std::exception& e) {
            reply = {{"ok", false}, {"error", "InvalidValue"}, {"message", e.what()}};
        }
        auto out = std::make_shared<std::string>(reply.dump() + "\n");
        asio::async_write(socket_, asio::buffer(*out), [self = shared_from_this(), out](beast::error_code ec, std::size_t) {
            if (!ec) self->do_read();
        });
    }

    tcp::socket socket_;
    ControlSurface& control_;
    std::string buffer_;
};

/// Twitch-compatible IRC reader with exponential-backoff reconnect.
class IrcClient final : public std::enable_shared_from_this<IrcClient> {
public:
    using OnMessage = std::function<void(ChatMessage)>;

    IrcClient(asio::io_context& io, SourceConfig config, SessionClock& clock, OnMessage on_message,
              irc::ReconnectBackoff backoff = irc::ReconnectBackoff{})
        : io_(io)
        , socket_(io)
        , resolver_(io)
        , timer_(io)
        , config_(std::move(config))
        , clock_(clock)
        , on_message_(std::move(on_message))
        , backoff_(backoff)
    {
    }

    void start()
    {
        asio::post(io_, [self = shared_from_this()] { self->connect(); });
    }

    void stop()
    {
        asio::post(io_, [self = shared_from_this()] {
            self->stopped_ = true;
            self->timer_.cancel();
            beast::error_code ignored;
            self->socket_.close(ignored);
        });
    }

    void send_privmsg(std::string_view text) { send(irc::privmsg_line(config_.channel, text)); }

    void send(std::string line)
    {
        asio::post(io_, [self = shared_from_this(), line = std::move(line)]() mutable {
            self->enqueue(std::move(line));
        });
    }

    std::uint64_t connections() const { return connections_; }

private:
    void connect()
    {
        if (stopped_) return;
        const auto hp = split_host_port(config_.endpoint);
        resolver_.async_resolve(hp.host, hp.port, [self = shared_from_this()](beast::error_code ec, tcp::resolver::results_type results) {
            if (ec) return self->schedule_reconnect(ec);
            asio::async_connect(self->socket_, results, [self](beast::error_code cec, const tcp::endpoint&) {
                if (cec) return self->schedule_reconnect(cec);
                self->on_connected();
            });
        });
    }

    void on_connected()
    {
        ++connections_;
        backoff_.reset();
        spdlog::info("irc connected to {}", config_.endpoint);
        for (auto& line : irc::login_lines(config_.credentials, config_.nick, config_.channel)) enqueue(std::move(line));
        do_read();
    }

    void do_read()
    {
        asio::async_read_until(socket_, asio::dynamic_buffer(buffer_, irc::kMaxLineLength + 2), '\n',
                               [self = shared_from_this()](beast::error_code ec, std::size_t n) {
                                   if (ec == asio::error::not_found) {
                                       // over-long frame: drop it up to its newline
                                       spdlog::warn("irc: skipping frame: longer than {} bytes", irc::kMaxLineLength);
                                       self->buffer_.clear();
                                       self->discarding_ = true;
                                       return self->do_read();
                                   }
                                   if (ec) return self->schedule_reconnect(ec);
                                   std::string line = self->buffer_.substr(0, n - 1);
                                   self->buffer_.erase(0, n);
                                   if (self->discarding_)
                                       self->discarding_ = false;
                                   else
                                       self->handle_line(line);
                                   self->do_read();
                               });
    }

    void handle_line(std::string_view line)
    {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) return;
        irc::Frame frame;
        try {
            frame = irc::parse_line(line);
        } catch (const Error& e) {
            spdlog::warn("irc: skipping frame: {}", e.what());
            return;
        }
        if (auto pong = irc::keepalive_response(frame)) {
            enqueue(std::move(*pong));
            return;
        }
        if (auto msg = irc::frame_to_message(frame, Source::External, clock_)) on_message_(std::move(*msg));
    }

    void enqueue(std::string line)
    {
        outbox_.push_back(std::move(line) + "\r\n");
        if (outbox_.size() == 1) do_write();
    }

    void do_write()
    {
        asio::async_write(socket_, asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->outbox_.clear();
                return;
            }
            self->outbox_.pop_front();
            if (!self->outbox_.empty()) self->do_write();
        });
    }

    void schedule_reconnect(beast::error_code ec)
    {
        if (stopped_) return;
        beast::error_code ignored;
        socket_.close(ignored);
        buffer_.clear();
        discarding_ = false;
        outbox_.clear();
        const auto delay = backoff_.next();
        spdlog::warn("irc connection lost ({}), reconnecting in {} ms", ec.message(), delay.count());
        timer_.expires_after(delay);
        timer_.async_wait([self = shared_from_this()](beast::error_code tec) {
            if (!tec) self->connect();
        });
    }

    asio::io_context& io_;
    tcp::socket socket_;
    tcp::resolver resolver_;
    asio::steady_timer timer_;
    SourceConfig config_;
    SessionClock& clock_;
    OnMessage on_message_;
    irc::ReconnectBackoff backoff_;
    std::string buffer_;
    std::deque<std::string> outbox_;
    bool stopped_ = false;
    bool discarding_ = false;
    std::atomic<std::uint64_t> connections_{0};
};

}  // namespace storychat::net
