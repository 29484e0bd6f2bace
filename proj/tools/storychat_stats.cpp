// storychat-stats: label counts, plot timeline and post-event surge from a session log.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "storychat/analytics.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"storychat session statistics"};
    std::string session_path;
    std::string labels_path;
    std::string surge_state;
    std::int64_t horizon_ms = 10000;
    std::string out_path;
    app.add_option("session", session_path, "session log (.jsonl)")->required()->check(CLI::ExistingFile);
    app.add_option("--labels", labels_path, "manual label overlay (.labels.jsonl)");
    app.add_option("--surge", surge_state, "plot state whose entries anchor the surge metric");
    app.add_option("--horizon-ms", horizon_ms, "surge horizon")->check(CLI::PositiveNumber);
    app.add_option("--out", out_path, "output path ('-' for stdout)")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        const auto session = storychat::load(session_path);
        if (session.corruption)
            std::cerr << "storychat-stats: warning: " << session_path << " corrupt at line " << session.corruption->line
                      << " (" << session.corruption->reason << "); using " << session.records.size()
                      << " records before it\n";

        std::optional<storychat::LabelOverlay> overlay;
        if (!labels_path.empty()) overlay = storychat::load_overlay(labels_path);
        const storychat::LabelOverlay* ov = overlay ? &*overlay : nullptr;

        nlohmann::json out;
        out["session_id"] = session.manifest.session_id;
        out["mode"] = storychat::to_string(session.manifest.mode);
        out["records"] = session.records.size();
        out["truncated"] = session.corruption.has_value();
        out["stats"] = storychat::session_stats(session, ov);
        if (session.manifest.mode == storychat::StoryMode::WithStory)
            out["timeline"] = storychat::transition_timeline(session);
        else
            out["timeline"] = nullptr;
        if (!surge_state.empty()) {
            const auto state = storychat::plot_state_from_string(surge_state);
            auto s = nlohmann::json(storychat::post_event_surge(session, ov, state, horizon_ms));
            s["state"] = surge_state;
            s["horizon_ms"] = horizon_ms;
            out["surge"] = s;
        }

        const auto text = out.dump(2) + "\n";
        if (out_path == "-") {
            std::cout << text;
        } else {
            std::ofstream f(out_path, std::ios::binary);
            f << text;
            if (!f) throw storychat::Error(storychat::Errc::StorageFull, "cannot write " + out_path);
        }
    } catch (const storychat::Error& e) {
        std::cerr << "storychat-stats: " << storychat::to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
