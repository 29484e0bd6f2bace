#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "storychat/session_log.hpp"
#include "support.hpp"

using namespace storychat;
using storychat::testing::TempDir;
using storychat::testing::msg;

namespace {

SessionManifest manifest(StoryMode mode = StoryMode::WithStory)
{
    SessionManifest m;
    m.session_id = "s1";
    m.started_at = "2024-01-01T00:00:00Z";
    m.mode = mode;
    m.configs = {{"detector", {{"window_ms", 10000}}}};
    m.channel = "#test";
    m.nominal_viewers = 10000;
    return m;
}

std::vector<LogRecord> random_records(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<LogRecord> out;
    std::int64_t t = 0;
    const ClassifierConfig c;
    for (std::size_t i = 1; i <= n; ++i) {
        t += static_cast<std::int64_t>(rng() % 700);
        switch (rng() % 5) {
        case 0: {
            auto m = msg("m" + std::to_string(i), t, rng() % 2 ? "hello \"there\" ✓" : "STOP IT NOW");
            out.push_back(comment_record(i, m, classify(m, c)));
            break;
        }
        case 1: {
            WindowVerdict v{t, static_cast<int>(rng() % 5), static_cast<int>(rng() % 50), 10000, 1.12, rng() % 2 == 0};
            out.push_back(verdict_record(i, v));
            break;
        }
        case 2:
            out.push_back(transition_record(i, NarrativeEvent{EventKind::StateChanged, PlotState::Darkening, i, t}));
            break;
        case 3: out.push_back(LogRecord{i, t, RecordKind::Admin, {{"op", "threshold"}, {"value", 2.5}}}); break;
        default: out.push_back(LogRecord{i, t, RecordKind::Notice, {{"text", "line\nbreak"}}}); break;
        }
    }
    return out;
}

}  // namespace

TEST(SessionLog, AppendTwoRecords)
{
    TempDir dir;
    {
        SessionWriter w(dir / "s.jsonl", manifest());
        w.append(LogRecord{1, 0, RecordKind::Notice, {{"text", "a"}}});
        w.append(LogRecord{2, 5, RecordKind::Notice, {{"text", "b"}}});
    }
    const auto s = load_strict(dir / "s.jsonl");
    EXPECT_EQ(s.records.size(), 2u);
    EXPECT_EQ(s.manifest.session_id, "s1");
    EXPECT_EQ(s.manifest.channel, "#test");
}

TEST(SessionLog, SequenceGap)
{
    TempDir dir;
    SessionWriter w(dir / "s.jsonl", manifest());
    w.append(LogRecord{1, 0, RecordKind::Notice, {{"text", "a"}}});
    try {
        w.append(LogRecord{3, 0, RecordKind::Notice, {{"text", "c"}}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SequenceGap);
    }
}

TEST(SessionLog, TimestampRegressionRejected)
{
    TempDir dir;
    SessionWriter w(dir / "s.jsonl", manifest());
    w.append(LogRecord{1, 100, RecordKind::Notice, {{"text", "a"}}});
    try {
        w.append(LogRecord{2, 99, RecordKind::Notice, {{"text", "b"}}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidValue);
    }
}

TEST(SessionLog, ManifestFirstAndFlushedOnOpen)
{
    TempDir dir;
    SessionWriter w(dir / "s.jsonl", manifest(StoryMode::WithoutStory));
    std::ifstream in(dir / "s.jsonl");
    std::string first;
    std::getline(in, first);
    const auto j = nlohmann::json::parse(first);
    EXPECT_EQ(j.at("type"), "manifest");
    EXPECT_EQ(j.at("mode"), "without_story");
    EXPECT_EQ(j.at("stream_meta").at("nominal_viewers"), 10000);
}

TEST(SessionLog, FlushesEveryHundredRecords)
{
    TempDir dir;
    SessionWriter w(dir / "s.jsonl", manifest());
    for (std::uint64_t i = 1; i <= 100; ++i) w.append(LogRecord{i, 0, RecordKind::Notice, {{"text", "x"}}});
    // readable from another handle without an explicit flush
    EXPECT_EQ(load(dir / "s.jsonl").records.size(), 100u);
}

TEST(SessionLog, EmptyFileIsMissingManifest)
{
    TempDir dir;
    std::ofstream(dir / "empty.jsonl").close();
    try {
        load(dir / "empty.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingManifest);
    }
    std::ofstream(dir / "bad.jsonl") << "{\"seq\":1}\n";
    try {
        load(dir / "bad.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingManifest);
    }
}

TEST(SessionLog, RoundTripTenThousand)
{
    TempDir dir;
    const auto records = random_records(10000, 3);
    {
        SessionWriter w(dir / "s.jsonl", manifest());
        for (const auto& r : records) w.append(r);
    }
    const auto s = load_strict(dir / "s.jsonl");
    ASSERT_EQ(s.records.size(), records.size());
    EXPECT_TRUE(s.records == records);
}

TEST(SessionLog, TruncatedFinalLine)
{
    TempDir dir;
    const auto records = random_records(50, 4);
    {
        SessionWriter w(dir / "s.jsonl", manifest());
        for (const auto& r : records) w.append(r);
    }
    const auto size = std::filesystem::file_size(dir / "s.jsonl");
    std::filesystem::resize_file(dir / "s.jsonl", size - 7);
    const auto s = load(dir / "s.jsonl");
    ASSERT_TRUE(s.corruption);
    EXPECT_EQ(s.corruption->line, 51u);  // manifest + 50 records
    ASSERT_EQ(s.records.size(), 49u);
    EXPECT_TRUE(std::equal(s.records.begin(), s.records.end(), records.begin()));
    try {
        load_strict(dir / "s.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CorruptRecord);
        EXPECT_NE(std::string(e.what()).find("line 51"), std::string::npos);
    }
}

TEST(SessionLog, OutOfOrderSeqIsCorruption)
{
    TempDir dir;
    {
        std::ofstream f(dir / "s.jsonl");
        f << nlohmann::json(manifest()).dump() << "\n";
        f << nlohmann::json(LogRecord{2, 0, RecordKind::Notice, {{"text", "a"}}}).dump() << "\n";
        f << nlohmann::json(LogRecord{1, 0, RecordKind::Notice, {{"text", "b"}}}).dump() << "\n";
    }
    const auto s = load(dir / "s.jsonl");
    ASSERT_TRUE(s.corruption);
    EXPECT_EQ(s.corruption->line, 3u);
    EXPECT_EQ(s.records.size(), 1u);
}

TEST(Replay, EmitsOnlyCommentsAndAdminPaced)
{
    std::vector<LogRecord> records;
    const ClassifierConfig c;
    std::uint64_t seq = 0;
    for (int i = 0; i < 5; ++i) {
        auto m = msg("m" + std::to_string(i), i * 100);
        records.push_back(comment_record(++seq, m, classify(m, c)));
        records.push_back(verdict_record(++seq, WindowVerdict{i * 100}));
    }
    records.push_back(LogRecord{++seq, 500, RecordKind::Admin, {{"op", "viewers"}, {"count", 5}}});

    std::vector<RecordKind> kinds;
    std::vector<double> offsets;
    const auto start = std::chrono::steady_clock::now();
    replay(records, ReplayOptions{1.0, true}, [&](const LogRecord& r) {
        kinds.push_back(r.kind);
        offsets.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    });
    ASSERT_EQ(kinds.size(), 6u);
    EXPECT_EQ(kinds.back(), RecordKind::Admin);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_GE(offsets[i], static_cast<double>(i) * 100.0 - 1.0);
        EXPECT_LT(offsets[i], static_cast<double>(i) * 100.0 + 50.0);
    }

    std::size_t n = 0;
    replay(records, ReplayOptions{1.0, false}, [&](const LogRecord&) { ++n; });
    EXPECT_EQ(n, 5u);
}

TEST(Replay, SpeedScalesWallTime)
{
    std::vector<LogRecord> records;
    for (std::uint64_t i = 1; i <= 11; ++i)
        records.push_back(LogRecord{i, static_cast<std::int64_t>(i - 1) * 1000, RecordKind::Comment, {}});
    const auto start = std::chrono::steady_clock::now();
    replay(records, ReplayOptions{100.0, false}, [](const LogRecord&) {});
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    EXPECT_GE(ms, 99.0);
    EXPECT_LT(ms, 200.0);
}

TEST(Replay, StopsEarly)
{
    std::vector<LogRecord> records;
    for (std::uint64_t i = 1; i <= 3; ++i)
        records.push_back(LogRecord{i, static_cast<std::int64_t>(i - 1) * 60000, RecordKind::Comment, {}});
    std::stop_source stop;
    std::size_t n = 0;
    std::thread t([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        stop.request_stop();
    });
    const bool done = replay(records, ReplayOptions{}, [&](const LogRecord&) { ++n; }, stop.get_token());
    t.join();
    EXPECT_FALSE(done);
    EXPECT_EQ(n, 1u);
}

TEST(Replay, RejectsNonPositiveSpeed)
{
    try {
        replay({}, ReplayOptions{0.0, true}, [](const LogRecord&) {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidValue);
    }
}
