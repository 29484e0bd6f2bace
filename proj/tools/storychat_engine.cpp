// storychat: live or replayed chat -> classifier -> detector -> narrative -> clients.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "storychat/engine.hpp"

namespace {
std::atomic<bool> g_interrupted{false};
void on_signal(int) { g_interrupted = true; }
}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"storychat engine"};
    std::string config_path;
    std::string replay_path;
    double speed = 1.0;
    std::string listen;
    std::string log_dir = "logs";
    bool exit_after_replay = false;
    bool use_file_configs = false;
    app.add_option("--config", config_path, "engine config JSON")->required()->check(CLI::ExistingFile);
    app.add_option("--replay", replay_path, "replay a session log instead of the configured source")
        ->check(CLI::ExistingFile);
    app.add_option("--speed", speed, "replay speed multiplier")->check(CLI::PositiveNumber);
    app.add_option("--listen", listen, "HTTP/WebSocket listen address (host:port)");
    app.add_option("--log-dir", log_dir, "directory for session logs");
    app.add_flag("--exit-after-replay", exit_after_replay, "stop once a replay or synthetic source is exhausted");
    app.add_flag("--use-config-pipeline", use_file_configs,
                 "replay with the pipeline settings from --config rather than the log manifest");
    CLI11_PARSE(app, argc, argv);

    try {
        auto config = storychat::load_engine_config(config_path);
        if (!listen.empty()) config.listen_address = listen;

        storychat::EngineOptions options;
        options.log_dir = log_dir;
        options.speed = speed;
        options.replay_configs_from_log = !use_file_configs;
        if (!replay_path.empty()) options.replay_path = replay_path;

        storychat::Engine engine(std::move(config), options);
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        engine.start();
        spdlog::info("http/ws on port {}", engine.http_port());

        while (!g_interrupted) {
            if (exit_after_replay && engine.logical_time() &&
                engine.wait_source_done(std::chrono::milliseconds(100)))
                break;
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        engine.stop();
        spdlog::info("session log written to {}", engine.log_path().string());
    } catch (const storychat::Error& e) {
        spdlog::error("{}: {}", storychat::to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
