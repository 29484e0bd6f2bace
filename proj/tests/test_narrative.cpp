#include <map>
#include <queue>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "storychat/narrative.hpp"

using namespace storychat;

namespace {

using Events = std::vector<std::pair<EventKind, PlotState>>;

Events kinds(const std::vector<NarrativeEvent>& events)
{
    Events out;
    for (const auto& e : events) out.emplace_back(e.kind, e.state);
    return out;
}

FsmState at(PlotState p)
{
    FsmState s;
    s.plot = p;
    return s;
}

}  // namespace

TEST(Fsm, TableExamples)
{
    FsmConfig c;
    auto r = step(at(PlotState::Stable), {SignalKind::WindowExceeded, 10000}, c);
    EXPECT_EQ(r.state.plot, PlotState::Darkening);
    EXPECT_EQ(kinds(r.events), (Events{{EventKind::StateChanged, PlotState::Darkening}}));

    r = step(at(PlotState::Stable), {SignalKind::WindowBelow, 10000}, c);
    EXPECT_EQ(r.state.plot, PlotState::Stable);
    EXPECT_TRUE(r.events.empty());

    NarrativeMachine m(c, at(PlotState::HeartsBattle));
    EXPECT_TRUE(m.feed({SignalKind::WindowBelow, 10000}).empty());
    EXPECT_EQ(kinds(m.feed({SignalKind::WindowBelow, 20000})),
              (Events{{EventKind::StateChanged, PlotState::GhostExpelled}, {EventKind::RedMaskOff, PlotState::GhostExpelled}}));
}

TEST(Fsm, FullStoryline)
{
    NarrativeMachine m;
    std::vector<NarrativeEvent> all;
    auto feed = [&](SignalKind k, std::int64_t t) {
        for (auto& e : m.feed({k, t})) all.push_back(e);
    };
    feed(SignalKind::WindowExceeded, 10000);
    feed(SignalKind::WindowExceeded, 20000);
    feed(SignalKind::NonNegativeComment, 21000);
    feed(SignalKind::NonNegativeComment, 22000);
    feed(SignalKind::WindowBelow, 30000);
    feed(SignalKind::WindowBelow, 40000);
    feed(SignalKind::Tick, 42500);
    feed(SignalKind::Tick, 43000);
    EXPECT_EQ(kinds(all), (Events{{EventKind::StateChanged, PlotState::Darkening},
                                  {EventKind::StateChanged, PlotState::GhostPresent},
                                  {EventKind::RedMaskOn, PlotState::GhostPresent},
                                  {EventKind::StateChanged, PlotState::HeartsBattle},
                                  {EventKind::HeartBurst, PlotState::HeartsBattle},
                                  {EventKind::HeartBurst, PlotState::HeartsBattle},
                                  {EventKind::StateChanged, PlotState::GhostExpelled},
                                  {EventKind::RedMaskOff, PlotState::GhostExpelled},
                                  {EventKind::StateChanged, PlotState::Stable},
                                  {EventKind::ReturnToBase, PlotState::Stable}}));
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i].seq, i + 1);
}

TEST(Fsm, EscalateWindowsCountsTheDarkeningWindow)
{
    FsmConfig c;
    c.escalate_windows = 3;
    NarrativeMachine m(c);
    m.feed({SignalKind::WindowExceeded, 1});
    m.feed({SignalKind::WindowExceeded, 2});
    EXPECT_EQ(m.plot(), PlotState::Darkening);
    m.feed({SignalKind::WindowExceeded, 3});
    EXPECT_EQ(m.plot(), PlotState::Darkening);
    m.feed({SignalKind::WindowExceeded, 4});
    EXPECT_EQ(m.plot(), PlotState::GhostPresent);
}

TEST(Fsm, ExceededResetsBelowCounter)
{
    NarrativeMachine m(FsmConfig{}, at(PlotState::GhostPresent));
    m.feed({SignalKind::WindowBelow, 1});
    m.feed({SignalKind::WindowExceeded, 2});
    m.feed({SignalKind::WindowBelow, 3});
    EXPECT_EQ(m.plot(), PlotState::GhostPresent);
    m.feed({SignalKind::WindowBelow, 4});
    EXPECT_EQ(m.plot(), PlotState::GhostExpelled);
}

TEST(Fsm, Reset)
{
    NarrativeMachine m;
    EXPECT_TRUE(m.reset(0).empty());
    EXPECT_EQ(m.plot(), PlotState::Stable);

    NarrativeMachine g(FsmConfig{}, at(PlotState::GhostPresent));
    EXPECT_EQ(kinds(g.reset(5)), (Events{{EventKind::StateChanged, PlotState::Stable}, {EventKind::RedMaskOff, PlotState::Stable}}));
    const auto once = g.state();
    EXPECT_TRUE(g.reset(6).empty());
    EXPECT_EQ(g.state(), once);
}

TEST(Fsm, ConfigValidation)
{
    for (auto bad : {FsmConfig{0, 2, 3000}, FsmConfig{1, 0, 3000}, FsmConfig{1, 2, 0}}) {
        try {
            bad.validate();
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::InvalidConfig);
        }
    }
}

// Independent statement of the transition table, applied to every
// (state, signal) pair at several counter values.
TEST(FsmExhaustive, EveryPairMatchesTable)
{
    FsmConfig c;
    c.escalate_windows = 2;
    c.deescalate_windows = 2;
    c.expel_duration_ms = 3000;
    int checked = 0;
    for (PlotState p : kAllPlotStates) {
        for (int exceeded = 0; exceeded <= 2; ++exceeded) {
            for (int below = 0; below <= 1; ++below) {
                for (SignalKind k : kAllSignalKinds) {
                    for (std::int64_t t : {1000, 4000}) {
                        FsmState s;
                        s.plot = p;
                        s.exceeded_windows = p == PlotState::Darkening ? exceeded : 0;
                        s.below_windows = below;
                        s.entered_at_ms = 1000;
                        const auto r = step(s, {k, t}, c);

                        PlotState want = p;
                        Events ev;
                        const bool below_full = below + 1 >= c.deescalate_windows;
                        switch (k) {
                        case SignalKind::WindowExceeded:
                            if (p == PlotState::Stable) want = PlotState::Darkening;
                            if (p == PlotState::Darkening && s.exceeded_windows >= c.escalate_windows) want = PlotState::GhostPresent;
                            break;
                        case SignalKind::WindowBelow:
                            if (below_full && p == PlotState::Darkening) want = PlotState::Stable;
                            if (below_full && (p == PlotState::GhostPresent || p == PlotState::HeartsBattle))
                                want = PlotState::GhostExpelled;
                            break;
                        case SignalKind::NonNegativeComment:
                            if (p == PlotState::GhostPresent) want = PlotState::HeartsBattle;
                            if (p == PlotState::HeartsBattle) ev = {{EventKind::HeartBurst, p}};
                            break;
                        case SignalKind::Tick:
                            if (p == PlotState::GhostExpelled && t >= 1000 + c.expel_duration_ms) want = PlotState::Stable;
                            break;
                        }
                        if (want != p) {
                            ev = {{EventKind::StateChanged, want}};
                            if (want == PlotState::GhostPresent) ev.emplace_back(EventKind::RedMaskOn, want);
                            if (want == PlotState::HeartsBattle) ev.emplace_back(EventKind::HeartBurst, want);
                            if (want == PlotState::GhostExpelled) ev.emplace_back(EventKind::RedMaskOff, want);
                            if (p == PlotState::GhostExpelled && want == PlotState::Stable)
                                ev.emplace_back(EventKind::ReturnToBase, want);
                        }
                        ASSERT_EQ(r.state.plot, want) << to_string(p) << " + " << to_string(k);
                        ASSERT_EQ(kinds(r.events), ev) << to_string(p) << " + " << to_string(k);
                        if (k == SignalKind::WindowExceeded) ASSERT_EQ(r.state.below_windows, 0);
                        if (want != p) {
                            ASSERT_EQ(r.state.below_windows, 0);
                            ASSERT_EQ(r.state.entered_at_ms, t);
                        }
                        ++checked;
                    }
                }
            }
        }
    }
    EXPECT_EQ(checked, 5 * 3 * 2 * 4 * 2);
}

TEST(FsmExhaustive, EveryStateReachableAndReturns)
{
    FsmConfig c;
    // Search over abstract states with a bounded signal alphabet.
    auto key = [](const FsmState& s) { return std::tuple(s.plot, s.exceeded_windows, s.below_windows, s.entered_at_ms); };
    std::map<std::tuple<PlotState, int, int, std::int64_t>, FsmState> seen;
    std::queue<FsmState> frontier;
    FsmState start;
    frontier.push(start);
    seen[key(start)] = start;
    std::set<PlotState> reached{PlotState::Stable};
    while (!frontier.empty()) {
        const auto s = frontier.front();
        frontier.pop();
        for (SignalKind k : kAllSignalKinds) {
            auto n = step(s, {k, 0}, c).state;
            n.entered_at_ms = 0;
            n.next_seq = 1;
            if (k == SignalKind::Tick) {
                n = step(s, {k, s.entered_at_ms + c.expel_duration_ms}, c).state;
                n.entered_at_ms = 0;
                n.next_seq = 1;
            }
            reached.insert(n.plot);
            if (!seen.count(key(n))) {
                seen[key(n)] = n;
                frontier.push(n);
            }
        }
    }
    EXPECT_EQ(reached.size(), 5u);
    // From every discovered state, Stable is reachable using only belows and ticks.
    for (const auto& [k, s] : seen) {
        FsmState cur = s;
        std::int64_t t = 0;
        for (int i = 0; i < 10 && cur.plot != PlotState::Stable; ++i) {
            t += 10000;
            cur = step(cur, {SignalKind::WindowBelow, t}, c).state;
            cur = step(cur, {SignalKind::Tick, t + c.expel_duration_ms}, c).state;
        }
        EXPECT_EQ(cur.plot, PlotState::Stable);
    }
}

TEST(FsmProperty, RandomSequences)
{
    std::mt19937_64 rng(31337);
    for (int seqn = 0; seqn < 100000; ++seqn) {
        FsmConfig c;
        c.escalate_windows = 1 + static_cast<int>(rng() % 3);
        c.deescalate_windows = 1 + static_cast<int>(rng() % 3);
        c.expel_duration_ms = 500 + static_cast<std::int64_t>(rng() % 5000);
        NarrativeMachine m(c);
        bool mask = false;
        PlotState prev = PlotState::Stable;
        std::uint64_t last_seq = 0;
        std::int64_t t = 0;
        const auto len = 1 + rng() % 40;
        for (std::size_t i = 0; i < len; ++i) {
            t += static_cast<std::int64_t>(rng() % 2000);
            const auto k = kAllSignalKinds[rng() % 4];
            for (const auto& e : m.feed({k, t})) {
                ASSERT_GT(e.seq, last_seq);
                last_seq = e.seq;
                if (e.kind == EventKind::RedMaskOn) {
                    ASSERT_FALSE(mask);
                    mask = true;
                    ASSERT_EQ(e.state, PlotState::GhostPresent);
                }
                if (e.kind == EventKind::RedMaskOff) {
                    ASSERT_TRUE(mask);
                    mask = false;
                }
                if (e.kind == EventKind::StateChanged) {
                    if (e.state == PlotState::GhostPresent) ASSERT_EQ(prev, PlotState::Darkening);
                    prev = e.state;
                }
            }
            ASSERT_EQ(mask, ghost_on_stage(m.plot()));
        }
        // A tail of belows and ticks brings the story home in bounded time.
        const auto start = t;
        for (int w = 0; w < c.deescalate_windows; ++w) {
            t += 10000;
            m.feed({SignalKind::WindowBelow, t});
        }
        for (std::int64_t tick = t; tick <= t + c.expel_duration_ms; tick += 500) m.feed({SignalKind::Tick, tick});
        m.feed({SignalKind::Tick, t + c.expel_duration_ms});
        ASSERT_EQ(m.plot(), PlotState::Stable) << "from t=" << start;
    }
}

TEST(FsmProperty, Deterministic)
{
    std::mt19937_64 rng(8);
    std::vector<FsmSignal> signals;
    std::int64_t t = 0;
    for (int i = 0; i < 1000; ++i) signals.push_back({kAllSignalKinds[rng() % 4], t += static_cast<std::int64_t>(rng() % 3000)});
    NarrativeMachine a, b;
    for (const auto& s : signals) ASSERT_EQ(kinds(a.feed(s)), kinds(b.feed(s)));
}
