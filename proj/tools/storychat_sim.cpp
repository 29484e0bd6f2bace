// storychat-sim: run a synthetic traffic profile through the pipeline offline.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "storychat/chat_sim.hpp"
#include "storychat/engine_config.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"storychat scenario runner"};
    std::string profile_path;
    std::string config_path;
    std::string out_path;
    std::string log_path;
    app.add_option("--profile", profile_path, "traffic profile JSON")->required()->check(CLI::ExistingFile);
    app.add_option("--engine-config", config_path, "engine config JSON")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_path, "report path ('-' for stdout)")->required();
    app.add_option("--log", log_path, "also write the scenario as a session log");
    CLI11_PARSE(app, argc, argv);

    try {
        std::ifstream in(profile_path);
        if (!in) throw storychat::Error(storychat::Errc::InvalidConfig, "cannot open " + profile_path);
        nlohmann::json pj;
        try {
            pj = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw storychat::Error(storychat::Errc::InvalidConfig, profile_path + ": " + e.what());
        }
        const auto profile = pj.get<storychat::TrafficProfile>();
        const auto config = storychat::load_pipeline_config(config_path);

        std::vector<storychat::LogRecord> records;
        const auto report = storychat::run_scenario(profile, config, log_path.empty() ? nullptr : &records);
        const auto bytes = storychat::report_bytes(report);

        if (!log_path.empty()) {
            storychat::SessionManifest m;
            m.session_id = "sim-" + std::to_string(profile.seed);
            m.started_at = "1970-01-01T00:00:00Z";
            m.mode = config.mode;
            m.configs = config.configs_json();
            m.channel = profile.channel;
            m.nominal_viewers = config.nominal_viewers;
            storychat::SessionWriter writer(log_path, m);
            for (const auto& r : records) writer.append(r);
            writer.flush();
        }

        if (out_path == "-") {
            std::cout << bytes;
        } else {
            std::ofstream out(out_path, std::ios::binary);
            out << bytes;
            if (!out) throw storychat::Error(storychat::Errc::StorageFull, "cannot write " + out_path);
        }
    } catch (const storychat::Error& e) {
        std::cerr << "storychat-sim: " << storychat::to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
