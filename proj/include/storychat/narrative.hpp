#pragma once

// "Berry and the Ghost" storyline as a deterministic state machine over
// window verdicts, non-negative comments and clock ticks.
//
//   stable --exceeded--> darkening --exceeded (armed)--> ghost_present
//      ^                     |                              | non-negative comment
//      +---- below xN -------+                              v
//      |                                              hearts_battle
//      |                                                    | below xN (from either ghost state)
//      +------- tick after expel duration ---- ghost_expelled <-+

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storychat/error.hpp"

namespace storychat {

enum class PlotState { Stable, Darkening, GhostPresent, HeartsBattle, GhostExpelled };

inline constexpr PlotState kAllPlotStates[] = {PlotState::Stable, PlotState::Darkening, PlotState::GhostPresent,
                                               PlotState::HeartsBattle, PlotState::GhostExpelled};

constexpr std::string_view to_string(PlotState s) noexcept
{
    switch (s) {
    case PlotState::Stable: return "stable";
    case PlotState::Darkening: return "darkening";
    case PlotState::GhostPresent: return "ghost_present";
    case PlotState::HeartsBattle: return "hearts_battle";
    case PlotState::GhostExpelled: return "ghost_expelled";
    }
    return "stable";
}

inline PlotState plot_state_from_string(std::string_view s)
{
    for (PlotState p : kAllPlotStates)
        if (to_string(p) == s) return p;
    throw Error(Errc::InvalidValue, "unknown plot state '" + std::string(s) + "'");
}

constexpr bool ghost_on_stage(PlotState s) noexcept
{
    return s == PlotState::GhostPresent || s == PlotState::HeartsBattle;
}

enum class SignalKind { WindowExceeded, WindowBelow, NonNegativeComment, Tick };

inline constexpr SignalKind kAllSignalKinds[] = {SignalKind::WindowExceeded, SignalKind::WindowBelow,
                                                 SignalKind::NonNegativeComment, SignalKind::Tick};

constexpr std::string_view to_string(SignalKind k) noexcept
{
    switch (k) {
    case SignalKind::WindowExceeded: return "window_exceeded";
    case SignalKind::WindowBelow: return "window_below";
    case SignalKind::NonNegativeComment: return "non_negative_comment";
    case SignalKind::Tick: return "tick";
    }
    return "tick";
}

struct FsmSignal {
    SignalKind kind;
    std::int64_t at_ms = 0;
};

enum class EventKind { StateChanged, HeartBurst, RedMaskOn, RedMaskOff, ReturnToBase };

inline constexpr EventKind kAllEventKinds[] = {EventKind::StateChanged, EventKind::HeartBurst, EventKind::RedMaskOn,
                                               EventKind::RedMaskOff, EventKind::ReturnToBase};

constexpr std::string_view to_string(EventKind k) noexcept
{
    switch (k) {
    case EventKind::StateChanged: return "state_changed";
    case EventKind::HeartBurst: return "heart_burst";
    case EventKind::RedMaskOn: return "red_mask_on";
    case EventKind::RedMaskOff: return "red_mask_off";
    case EventKind::ReturnToBase: return "return_to_base";
    }
    return "state_changed";
}

inline EventKind event_kind_from_string(std::string_view s)
{
    for (EventKind k : kAllEventKinds)
        if (to_string(k) == s) return k;
    throw Error(Errc::InvalidValue, "unknown narrative event '" + std::string(s) + "'");
}

struct NarrativeEvent {
    EventKind kind;
    PlotState state;  // state after the transition
    std::uint64_t seq = 0;
    std::int64_t at_ms = 0;

    bool operator==(const NarrativeEvent&) const = default;
};

inline void to_json(nlohmann::json& j, const NarrativeEvent& e)
{
    j = nlohmann::json{{"event", to_string(e.kind)},
                       {"state", to_string(e.state)},
                       {"event_seq", e.seq},
                       {"at_ms", e.at_ms}};
}

inline void from_json(const nlohmann::json& j, NarrativeEvent& e)
{
    e.kind = event_kind_from_string(j.at("event").get<std::string>());
    e.state = plot_state_from_string(j.at("state").get<std::string>());
    j.at("event_seq").get_to(e.seq);
    j.at("at_ms").get_to(e.at_ms);
}

struct FsmConfig {
    int escalate_windows = 1;
    int deescalate_windows = 2;
    std::int64_t expel_duration_ms = 3000;

    void validate() const
    {
        if (escalate_windows < 1) throw Error(Errc::InvalidConfig, "escalate_windows must be >= 1");
        if (deescalate_windows < 1) throw Error(Errc::InvalidConfig, "deescalate_windows must be >= 1");
        if (expel_duration_ms <= 0) throw Error(Errc::InvalidConfig, "expel_duration_ms must be > 0");
    }

    bool operator==(const FsmConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const FsmConfig& c)
{
    j = nlohmann::json{{"escalate_windows", c.escalate_windows},
                       {"deescalate_windows", c.deescalate_windows},
                       {"expel_duration_ms", c.expel_duration_ms}};
}

inline void from_json(const nlohmann::json& j, FsmConfig& c)
{
    c = FsmConfig{};
    try {
        if (j.contains("escalate_windows")) j.at("escalate_windows").get_to(c.escalate_windows);
        if (j.contains("deescalate_windows")) j.at("deescalate_windows").get_to(c.deescalate_windows);
        if (j.contains("expel_duration_ms")) j.at("expel_duration_ms").get_to(c.expel_duration_ms);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("fsm config: ") + e.what());
    }
}

struct FsmState {
    PlotState plot = PlotState::Stable;
    int exceeded_windows = 0;   // cumulative while darkening, includes the window that entered it
    int below_windows = 0;      // consecutive
    std::int64_t entered_at_ms = 0;
    std::uint64_t next_seq = 1;

    bool operator==(const FsmState&) const = default;
};

struct StepResult {
    FsmState state;
    std::vector<NarrativeEvent> events;
};

namespace detail {

struct Emitter {
    FsmState& state;
    std::vector<NarrativeEvent>& events;
    std::int64_t at_ms;

    void emit(EventKind kind) { events.push_back(NarrativeEvent{kind, state.plot, state.next_seq++, at_ms}); }

    void enter(PlotState next)
    {
        state.plot = next;
        state.exceeded_windows = 0;
        state.below_windows = 0;
        state.entered_at_ms = at_ms;
        emit(EventKind::StateChanged);
    }
};

}  // namespace detail

/// Pure transition function; total over (state, signal).
inline StepResult step(FsmState state, const FsmSignal& signal, const FsmConfig& config)
{
    StepResult out;
    detail::Emitter em{state, out.events, signal.at_ms};

    switch (signal.kind) {
    case SignalKind::WindowExceeded:
        state.below_windows = 0;
        if (state.plot == PlotState::Stable) {
            em.enter(PlotState::Darkening);
            state.exceeded_windows = 1;
        } else if (state.plot == PlotState::Darkening) {
            if (state.exceeded_windows >= config.escalate_windows) {
                em.enter(PlotState::GhostPresent);
                em.emit(EventKind::RedMaskOn);
            } else {
                ++state.exceeded_windows;
            }
        }
        break;

    case SignalKind::WindowBelow:
        // saturating; only the comparison against deescalate_windows matters
        state.below_windows = std::min(state.below_windows + 1, config.deescalate_windows);
        if (state.below_windows >= config.deescalate_windows) {
            if (state.plot == PlotState::Darkening) {
                em.enter(PlotState::Stable);
            } else if (ghost_on_stage(state.plot)) {
                em.enter(PlotState::GhostExpelled);
                em.emit(EventKind::RedMaskOff);
            }
        }
        break;

    case SignalKind::NonNegativeComment:
        if (state.plot == PlotState::GhostPresent) {
            em.enter(PlotState::HeartsBattle);
            em.emit(EventKind::HeartBurst);
        } else if (state.plot == PlotState::HeartsBattle) {
            em.emit(EventKind::HeartBurst);
        }
        break;

    case SignalKind::Tick:
        if (state.plot == PlotState::GhostExpelled && signal.at_ms >= state.entered_at_ms + config.expel_duration_ms) {
            em.enter(PlotState::Stable);
            em.emit(EventKind::ReturnToBase);
        }
        break;
    }
    out.state = state;
    return out;
}

/// Back to stable with counters cleared; the mask is lifted if it was on.
inline StepResult reset(FsmState state, std::int64_t at_ms)
{
    StepResult out;
    detail::Emitter em{state, out.events, at_ms};
    const bool mask_on = ghost_on_stage(state.plot);
    if (state.plot != PlotState::Stable) {
        em.enter(PlotState::Stable);
        if (mask_on) em.emit(EventKind::RedMaskOff);
    }
    state.exceeded_windows = 0;
    state.below_windows = 0;
    out.state = state;
    return out;
}

/// Owns one FsmState and feeds it in order.
class NarrativeMachine {
public:
    explicit NarrativeMachine(FsmConfig config = {}, FsmState initial = {})
        : config_(config)
        , state_(initial)
    {
        config_.validate();
    }

    std::vector<NarrativeEvent> feed(const FsmSignal& signal)
    {
        auto r = step(state_, signal, config_);
        state_ = r.state;
        return std::move(r.events);
    }

    std::vector<NarrativeEvent> reset(std::int64_t at_ms)
    {
        auto r = storychat::reset(state_, at_ms);
        state_ = r.state;
        return std::move(r.events);
    }

    void set_config(const FsmConfig& config)
    {
        config.validate();
        config_ = config;
    }

    const FsmConfig& config() const { return config_; }
    const FsmState& state() const { return state_; }
    PlotState plot() const { return state_.plot; }

private:
    FsmConfig config_;
    FsmState state_;
};

}  // namespace storychat
