#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "storychat/classifier.hpp"
#include "support.hpp"

using namespace storychat;
using storychat::testing::fixture;
using storychat::testing::shipped_classifier;

TEST(CapsRatio, Examples)
{
    EXPECT_DOUBLE_EQ(caps_ratio("HELLO"), 1.0);
    EXPECT_DOUBLE_EQ(caps_ratio("hello"), 0.0);
    EXPECT_DOUBLE_EQ(caps_ratio("HeLLo world12"), 0.3);
    EXPECT_DOUBLE_EQ(caps_ratio("1234 !!"), 0.0);
    EXPECT_DOUBLE_EQ(caps_ratio(""), 0.0);
}

TEST(SymbolRatio, Examples)
{
    EXPECT_DOUBLE_EQ(symbol_ratio("!!!!"), 1.0);
    EXPECT_DOUBLE_EQ(symbol_ratio("hi there"), 0.0);
    EXPECT_DOUBLE_EQ(symbol_ratio("hi!!"), 0.5);
    EXPECT_DOUBLE_EQ(symbol_ratio(""), 0.0);
    EXPECT_DOUBLE_EQ(symbol_ratio("   "), 0.0);
}

TEST(CountEmotes, Examples)
{
    const std::set<std::string> lex{"Kappa"};
    EXPECT_EQ(count_emotes("Kappa Kappa Kappa", lex), 3);
    EXPECT_EQ(count_emotes("hello", lex), 0);
    EXPECT_EQ(count_emotes("", lex), 0);
    EXPECT_EQ(count_emotes("kappa KappaKappa Kappa!", lex), 0);
}

TEST(Classify, Examples)
{
    ClassifierConfig defaults;
    auto r = classify("hello world", defaults);
    EXPECT_FALSE(r.negative());
    EXPECT_TRUE(r.fired.empty());

    auto terms = shipped_classifier();
    r = classify("what a loser", terms);
    EXPECT_TRUE(r.negative());
    EXPECT_EQ(r.fired, RuleSet{Rule::Profanity});
    EXPECT_EQ(r.metrics.profanity_hits, std::vector<std::string>{"loser"});

    r = classify("AAAAAAAAAA", defaults);
    EXPECT_TRUE(r.negative());
    EXPECT_EQ(r.fired, RuleSet{Rule::Caps});
    EXPECT_DOUBLE_EQ(r.metrics.caps_ratio, 1.0);
}

TEST(Classify, DisabledRuleNeverFires)
{
    ClassifierConfig c;
    c.enabled_rules = {Rule::Profanity};
    EXPECT_FALSE(classify("AAAAAAAAAA", c).negative());
    // metrics are still reported
    EXPECT_DOUBLE_EQ(classify("AAAAAAAAAA", c).metrics.caps_ratio, 1.0);
}

TEST(Classify, CapsNeedsMinimumLetters)
{
    ClassifierConfig c;
    EXPECT_FALSE(classify("LOL", c).negative());
    EXPECT_FALSE(classify("ABCDE", c).negative());
    EXPECT_TRUE(classify("ABCDEF", c).negative());
}

TEST(Classify, ResultJsonRoundTrip)
{
    const auto r = classify("LUL LUL LUL LUL LUL LUL trash", shipped_classifier());
    const auto back = nlohmann::json(r).get<ClassificationResult>();
    EXPECT_EQ(back, r);
    EXPECT_EQ(nlohmann::json(r).at("label"), "negative");
}

TEST(ClassifierConfig, Validation)
{
    auto expect_invalid = [](ClassifierConfig c) {
        try {
            c.validate();
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::InvalidConfig);
        }
    };
    ClassifierConfig c;
    c.caps_ratio_max = 1.5;
    expect_invalid(c);
    c = {};
    c.caps_min_length = 0;
    expect_invalid(c);
    c = {};
    c.emote_count_max = -1;
    expect_invalid(c);
    c = {};
    c.profanity_terms = {"Upper"};
    expect_invalid(c);
    c = {};
    c.emote_lexicon = {"two words"};
    expect_invalid(c);
    try {
        nlohmann::json{{"enabled_rules", {"Profanity", "Sarcasm"}}}.get<ClassifierConfig>();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidConfig);
    }
}

TEST(ClassifierConfig, JsonRoundTrip)
{
    auto c = shipped_classifier();
    c.enabled_rules = {Rule::Caps, Rule::SymbolSpam};
    c.symbol_ratio_max = 0.25;
    EXPECT_EQ(nlohmann::json(c).get<ClassifierConfig>(), c);
}

// Expected labels come from tests/oracle/classifier_oracle.py.
TEST(ClassifierCorpus, MatchesOracle)
{
    std::ifstream in(fixture("classifier_corpus.jsonl"));
    ASSERT_TRUE(in);
    const auto config = shipped_classifier();
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto body = j.at("body").get<std::string>();
        const auto r = classify(body, config);
        RuleSet expected;
        for (const auto& f : j.at("fired")) expected.insert(rule_from_string(f.get<std::string>()));
        EXPECT_EQ(r.fired, expected) << body;
        EXPECT_EQ(r.negative(), j.at("label") == "negative") << body;
        ++n;
    }
    EXPECT_EQ(n, 50);
}

namespace {

std::string random_body(std::mt19937_64& rng)
{
    static const std::vector<std::string> pieces = {
        "hello", "HELLO", "gg", "GG", "trash", "TRASH", "Idiot", "noob!", "Kappa", "LUL", "PogChamp", "!!!", "?",
        "$$", "🔥", "👻", "é", "É", "Привет", "12", "wow", "NICE", "crap,", "(loser)", "a", "B", "...", "♥"};
    std::string s;
    const auto n = rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += (rng() % 5 == 0) ? "" : " ";
        s += pieces[rng() % pieces.size()];
    }
    return s;
}

}  // namespace

TEST(ClassifierProperty, DisablingRulesNeverAddsNegatives)
{
    std::mt19937_64 rng(2024);
    const auto base = shipped_classifier();
    const auto all = all_rules();
    std::vector<Rule> rules(all.begin(), all.end());
    for (int i = 0; i < 10000; ++i) {
        const auto body = random_body(rng);
        RuleSet enabled;
        for (auto r : rules)
            if (rng() % 2) enabled.insert(r);
        RuleSet subset;
        for (auto r : enabled)
            if (rng() % 2) subset.insert(r);
        auto c1 = base;
        c1.enabled_rules = enabled;
        auto c2 = base;
        c2.enabled_rules = subset;
        const auto r1 = classify(body, c1);
        const auto r2 = classify(body, c2);
        ASSERT_TRUE(!r2.negative() || r1.negative()) << body;
        ASSERT_TRUE(std::includes(r1.fired.begin(), r1.fired.end(), r2.fired.begin(), r2.fired.end())) << body;
        ASSERT_TRUE(std::includes(enabled.begin(), enabled.end(), r1.fired.begin(), r1.fired.end()));
        ASSERT_EQ(r1.negative(), !r1.fired.empty());
    }
}

TEST(ClassifierProperty, ProfanityIgnoresCase)
{
    std::mt19937_64 rng(99);
    const auto c = shipped_classifier();
    for (int i = 0; i < 5000; ++i) {
        const auto body = random_body(rng);
        std::string upper = body;
        for (auto& ch : upper)
            if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
        ASSERT_EQ(classify(body, c).fired.count(Rule::Profanity), classify(upper, c).fired.count(Rule::Profanity))
            << body;
    }
}

TEST(ClassifierProperty, Deterministic)
{
    std::mt19937_64 rng(5);
    const auto c = shipped_classifier();
    for (int i = 0; i < 1000; ++i) {
        const auto body = random_body(rng);
        ASSERT_EQ(classify(body, c), classify(body, c));
    }
}

TEST(TermFile, SkipsCommentsAndBlanks)
{
    storychat::testing::TempDir dir;
    {
        std::ofstream f(dir / "terms.txt");
        f << "# header\n\nfoo\n  bar  \r\n#baz\n";
    }
    EXPECT_EQ(load_term_file((dir / "terms.txt").string()), (std::set<std::string>{"foo", "bar"}));
}
