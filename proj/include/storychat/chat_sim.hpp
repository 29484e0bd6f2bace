#pragma once

// Seeded synthetic chat traffic and an offline scenario runner on logical time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "storychat/chat_message.hpp"
#include "storychat/error.hpp"
#include "storychat/ingest.hpp"
#include "storychat/pipeline.hpp"

namespace storychat {

struct BurstSpec {
    std::int64_t start_ms = 0;
    std::int64_t duration_ms = 0;
    double negative_rate_per_s = 0.0;

    bool operator==(const BurstSpec&) const = default;
};

struct Vocabulary {
    std::vector<std::string> neutral_bodies;
    std::vector<std::string> negative_bodies;

    bool operator==(const Vocabulary&) const = default;
};

/// Bodies that pass the default filter, and bodies that trip it through the
/// shipped placeholder term list or the caps/symbol rules.
inline Vocabulary default_vocabulary()
{
    return {{"hello chat", "nice play", "gg", "that was close", "what game is this", "love this stream",
             "lol", "good luck on the next round", "hi from brazil", "first time here", "wow", "clean",
             "how long have you been streaming", "that jump was sick", "Kappa", "brb getting snacks"},
            {"this stream is trash", "you are such an idiot", "what a loser move", "STOP PLAYING SO BADLY",
             "uninstall the game noob trash", "!!!!!!!!", "ugh this streamer is garbage", "crap gameplay"}};
}

struct TrafficProfile {
    double base_rate_per_s = 1.67;
    std::vector<BurstSpec> bursts;
    std::uint64_t seed = 42;
    Vocabulary vocabulary = default_vocabulary();
    std::string channel = "#staging";
    std::int64_t duration_ms = 15 * 60 * 1000;  // used by the CLI and run_scenario

    void validate() const
    {
        if (!(base_rate_per_s >= 0.0)) throw Error(Errc::InvalidConfig, "base_rate_per_s must be >= 0");
        if (duration_ms <= 0) throw Error(Errc::InvalidConfig, "duration_ms must be > 0");
        for (const auto& b : bursts) {
            if (!(b.negative_rate_per_s >= 0.0)) throw Error(Errc::InvalidConfig, "burst rate must be >= 0");
            if (b.start_ms < 0 || b.duration_ms < 0 || b.start_ms + b.duration_ms > duration_ms)
                throw Error(Errc::InvalidConfig, "burst outside session duration");
        }
    }
};

inline void to_json(nlohmann::json& j, const TrafficProfile& p)
{
    nlohmann::json bursts = nlohmann::json::array();
    for (const auto& b : p.bursts)
        bursts.push_back({{"start_ms", b.start_ms}, {"duration_ms", b.duration_ms}, {"negative_rate_per_s", b.negative_rate_per_s}});
    j = nlohmann::json{{"base_rate_per_s", p.base_rate_per_s},
                       {"burst_specs", bursts},
                       {"seed", p.seed},
                       {"vocabulary", {{"neutral_bodies", p.vocabulary.neutral_bodies},
                                       {"negative_bodies", p.vocabulary.negative_bodies}}},
                       {"channel", p.channel},
                       {"duration_ms", p.duration_ms}};
}

inline void from_json(const nlohmann::json& j, TrafficProfile& p)
{
    p = TrafficProfile{};
    try {
        if (j.contains("base_rate_per_s")) j.at("base_rate_per_s").get_to(p.base_rate_per_s);
        if (j.contains("burst_specs"))
            for (const auto& b : j.at("burst_specs"))
                p.bursts.push_back(BurstSpec{b.at("start_ms").get<std::int64_t>(), b.at("duration_ms").get<std::int64_t>(),
                                             b.at("negative_rate_per_s").get<double>()});
        if (j.contains("seed")) j.at("seed").get_to(p.seed);
        if (j.contains("vocabulary")) {
            const auto& v = j.at("vocabulary");
            if (v.contains("neutral_bodies")) v.at("neutral_bodies").get_to(p.vocabulary.neutral_bodies);
            if (v.contains("negative_bodies")) v.at("negative_bodies").get_to(p.vocabulary.negative_bodies);
        }
        if (j.contains("channel")) j.at("channel").get_to(p.channel);
        if (j.contains("duration_ms")) j.at("duration_ms").get_to(p.duration_ms);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("traffic profile: ") + e.what());
    }
}

namespace sim_detail {

inline std::uint64_t splitmix64(std::uint64_t& x)
{
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// splitmix64-seeded xoshiro256** stream; output is identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
    {
        for (auto& s : s_) s = splitmix64(seed);
    }

    std::uint64_t next()
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Exponential inter-arrival gap in ms for a rate in events/s.
    double exponential_ms(double rate_per_s) { return -std::log1p(-uniform()) / rate_per_s * 1000.0; }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline std::vector<ChatMessage> poisson_stream(Rng& rng, double rate_per_s, std::int64_t from_ms, std::int64_t to_ms,
                                               const std::vector<std::string>& bodies, const std::string& channel,
                                               const std::string& id_prefix)
{
    std::vector<ChatMessage> out;
    if (rate_per_s <= 0.0 || to_ms <= from_ms) return out;
    double t = static_cast<double>(from_ms);
    for (;;) {
        t += rng.exponential_ms(rate_per_s);
        if (t >= static_cast<double>(to_ms)) break;
        ChatMessage m;
        char id[48];
        std::snprintf(id, sizeof id, "%s-%06zu", id_prefix.c_str(), out.size() + 1);
        m.id = id;
        m.channel = channel;
        m.author = "viewer" + std::to_string(rng.index(500) + 1);
        m.body = bodies[rng.index(bodies.size())];
        m.timestamp_ms = static_cast<std::int64_t>(std::floor(t));
        m.source = Source::Synthetic;
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace sim_detail

/// Neutral arrivals at base rate over the whole session plus negative
/// arrivals during each burst, merged by timestamp.
inline std::vector<ChatMessage> generate(const TrafficProfile& profile, std::int64_t duration_ms)
{
    if (duration_ms <= 0) throw Error(Errc::InvalidValue, "duration must be > 0");
    if (profile.vocabulary.neutral_bodies.empty() && profile.base_rate_per_s > 0.0)
        throw Error(Errc::EmptyVocabulary, "no neutral bodies");
    for (const auto& b : profile.bursts)
        if (b.negative_rate_per_s > 0.0 && profile.vocabulary.negative_bodies.empty())
            throw Error(Errc::EmptyVocabulary, "no negative bodies");

    std::uint64_t seeder = profile.seed;
    std::vector<std::vector<ChatMessage>> streams;
    sim_detail::Rng base(sim_detail::splitmix64(seeder));
    streams.push_back(sim_detail::poisson_stream(base, profile.base_rate_per_s, 0, duration_ms,
                                                 profile.vocabulary.neutral_bodies, profile.channel, "syn-n"));
    for (std::size_t i = 0; i < profile.bursts.size(); ++i) {
        const auto& b = profile.bursts[i];
        sim_detail::Rng rng(sim_detail::splitmix64(seeder));
        const auto end = std::min(duration_ms, b.start_ms + b.duration_ms);
        streams.push_back(sim_detail::poisson_stream(rng, b.negative_rate_per_s, b.start_ms, end,
                                                     profile.vocabulary.negative_bodies, profile.channel,
                                                     "syn-b" + std::to_string(i + 1)));
    }
    return merge_vectors(std::move(streams));
}

struct ScenarioReport {
    std::vector<NarrativeEvent> transitions;
    std::vector<WindowVerdict> verdicts;
    std::vector<PlotState> timeline;  // visited states, starting at stable
    std::int64_t messages = 0;
    std::int64_t negative = 0;
    std::int64_t duration_ms = 0;
};

inline void to_json(nlohmann::json& j, const ScenarioReport& r)
{
    std::vector<std::string> timeline;
    for (auto s : r.timeline) timeline.emplace_back(to_string(s));
    j = nlohmann::json{{"timeline", timeline},
                       {"transitions", r.transitions},
                       {"verdicts", r.verdicts},
                       {"counts", {{"messages", r.messages},
                                   {"negative", r.negative},
                                   {"not_negative", r.messages - r.negative},
                                   {"windows", r.verdicts.size()},
                                   {"exceeded_windows", std::count_if(r.verdicts.begin(), r.verdicts.end(),
                                                                      [](const auto& v) { return v.exceeded; })}}},
                       {"duration_ms", r.duration_ms}};
}

/// Runs the full pipeline offline on logical time. `records`, when given,
/// receives every log record produced.
inline ScenarioReport run_scenario(const TrafficProfile& profile, const PipelineConfig& config,
                                   std::vector<LogRecord>* records = nullptr)
{
    profile.validate();
    config.validate();
    ScenarioReport report;
    report.duration_ms = profile.duration_ms;
    report.timeline.push_back(PlotState::Stable);

    Pipeline pipeline(config, [&](const LogRecord& r) {
        if (records) records->push_back(r);
        if (r.kind == RecordKind::Verdict) {
            report.verdicts.push_back(r.payload.get<WindowVerdict>());
        } else if (r.kind == RecordKind::Transition) {
            auto e = r.payload.get<NarrativeEvent>();
            if (e.kind == EventKind::StateChanged) report.timeline.push_back(e.state);
            report.transitions.push_back(e);
        }
    });
    for (auto& m : generate(profile, profile.duration_ms)) {
        ++report.messages;
        if (pipeline.on_message(std::move(m)).negative()) ++report.negative;
    }
    pipeline.finish(profile.duration_ms);
    return report;
}

/// Byte-stable serialization used for report comparison.
inline std::string report_bytes(const ScenarioReport& r) { return nlohmann::json(r).dump(2) + "\n"; }

}  // namespace storychat
