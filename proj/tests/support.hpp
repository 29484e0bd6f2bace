#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "storychat/chat_message.hpp"
#include "storychat/classifier.hpp"

namespace storychat::testing {

inline std::filesystem::path source_dir() { return STORYCHAT_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(STORYCHAT_FIXTURE_DIR) / name; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> n{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("storychat-test-" + std::to_string(rd()) + "-" + std::to_string(n++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// The shipped term list plus the default emote lexicon.
inline ClassifierConfig shipped_classifier()
{
    ClassifierConfig c;
    c.profanity_terms = load_term_file((source_dir() / "data" / "profanity.txt").string());
    c.emote_lexicon = default_emote_lexicon();
    return c;
}

inline ChatMessage msg(std::string id, std::int64_t t, std::string body = "hello", Source source = Source::External)
{
    ChatMessage m;
    m.id = std::move(id);
    m.channel = "#test";
    m.author = "viewer";
    m.body = std::move(body);
    m.timestamp_ms = t;
    m.source = source;
    return m;
}

}  // namespace storychat::testing
