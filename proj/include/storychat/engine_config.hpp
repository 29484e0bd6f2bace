#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "storychat/error.hpp"
#include "storychat/ingest.hpp"
#include "storychat/pipeline.hpp"

namespace storychat {

struct EngineConfig {
    SourceConfig source;
    PipelineConfig pipeline;
    std::string listen_address = "127.0.0.1:8080";
    std::string local_room_address;  // NDJSON participant socket; empty disables
    std::string admin_token;
    std::vector<std::string> participant_tokens;
    std::size_t client_buffer = 1000;  // queued updates before a slow client is dropped

    void validate() const
    {
        source.validate();
        pipeline.validate();
        if (listen_address.empty()) throw Error(Errc::InvalidConfig, "listen_address is empty");
        if (client_buffer == 0) throw Error(Errc::InvalidConfig, "client_buffer must be > 0");
    }
};

/// Both the detector and the narrative sections may carry
/// `deescalate_windows`; a value given in only one is copied to the other.
inline void from_json(const nlohmann::json& j, EngineConfig& c)
{
    c = EngineConfig{};
    const auto empty = nlohmann::json::object();
    try {
        if (j.contains("source")) c.source = j.at("source").get<SourceConfig>();
        c.pipeline.classifier = j.value("classifier", empty).get<ClassifierConfig>();
        c.pipeline.detector = j.value("detector", empty).get<DetectorConfig>();
        c.pipeline.fsm = j.value("fsm", empty).get<FsmConfig>();

        const bool det_has = j.contains("detector") && j.at("detector").contains("deescalate_windows");
        const bool fsm_has = j.contains("fsm") && j.at("fsm").contains("deescalate_windows");
        if (det_has && !fsm_has) c.pipeline.fsm.deescalate_windows = c.pipeline.detector.deescalate_windows;
        if (fsm_has && !det_has) c.pipeline.detector.deescalate_windows = c.pipeline.fsm.deescalate_windows;
        if (c.pipeline.fsm.deescalate_windows != c.pipeline.detector.deescalate_windows)
            throw Error(Errc::InvalidConfig, "detector.deescalate_windows and fsm.deescalate_windows disagree");

        if (j.contains("mode")) c.pipeline.mode = story_mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("nominal_viewers")) j.at("nominal_viewers").get_to(c.pipeline.nominal_viewers);
        if (j.contains("tick_ms")) j.at("tick_ms").get_to(c.pipeline.tick_ms);
        if (j.contains("listen_address")) j.at("listen_address").get_to(c.listen_address);
        if (j.contains("local_room_address")) j.at("local_room_address").get_to(c.local_room_address);
        if (j.contains("admin_token")) j.at("admin_token").get_to(c.admin_token);
        if (j.contains("participant_tokens")) j.at("participant_tokens").get_to(c.participant_tokens);
        if (j.contains("client_buffer")) j.at("client_buffer").get_to(c.client_buffer);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("engine config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::InvalidValue) throw Error(Errc::InvalidConfig, e.what());
        throw;
    }
    c.validate();
}

inline EngineConfig load_engine_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::InvalidConfig, "cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
    // Relative file references are taken relative to the config file.
    const auto base = path.parent_path();
    auto rebase = [&](nlohmann::json& v) {
        if (!v.is_string()) return;
        const std::filesystem::path p = v.get<std::string>();
        if (p.is_relative() && !base.empty()) v = (base / p).lexically_normal().string();
    };
    if (j.is_object()) {
        if (j.contains("classifier") && j["classifier"].is_object() && j["classifier"].contains("profanity_file"))
            rebase(j["classifier"]["profanity_file"]);
        if (j.contains("source") && j["source"].is_object()) {
            const auto mode = j["source"].value("mode", std::string{});
            if ((mode == "replay_file" || mode == "synthetic") && j["source"].contains("endpoint"))
                rebase(j["source"]["endpoint"]);
        }
    }
    return j.get<EngineConfig>();
}

/// Pipeline-only view of an engine config file (used by the simulator).
inline PipelineConfig load_pipeline_config(const std::filesystem::path& path)
{
    return load_engine_config(path).pipeline;
}

}  // namespace storychat
