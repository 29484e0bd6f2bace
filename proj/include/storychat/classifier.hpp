#pragma once

// Rule-based negativity filter: profanity, excessive capitals, emote spam
// and symbol spam. A message is negative when any enabled rule fires.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storychat/chat_message.hpp"
#include "storychat/error.hpp"

namespace storychat {

enum class Rule { Profanity, Caps, EmoteSpam, SymbolSpam };

inline constexpr Rule kAllRules[] = {Rule::Profanity, Rule::Caps, Rule::EmoteSpam, Rule::SymbolSpam};

constexpr std::string_view to_string(Rule r) noexcept
{
    switch (r) {
    case Rule::Profanity: return "Profanity";
    case Rule::Caps: return "Caps";
    case Rule::EmoteSpam: return "EmoteSpam";
    case Rule::SymbolSpam: return "SymbolSpam";
    }
    return "Profanity";
}

inline Rule rule_from_string(std::string_view s)
{
    for (Rule r : kAllRules)
        if (to_string(r) == s) return r;
    throw Error(Errc::InvalidValue, "unknown rule '" + std::string(s) + "'");
}

using RuleSet = std::set<Rule>;

inline RuleSet all_rules() { return RuleSet(std::begin(kAllRules), std::end(kAllRules)); }

inline std::string ascii_lower(std::string_view s)
{
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

struct ClassifierConfig {
    std::set<std::string> profanity_terms;
    double caps_ratio_max = 0.8;
    int caps_min_length = 6;
    int emote_count_max = 5;
    std::set<std::string> emote_lexicon;
    double symbol_ratio_max = 0.5;
    RuleSet enabled_rules = all_rules();

    void validate() const
    {
        auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
        if (!(caps_ratio_max >= 0.0 && caps_ratio_max <= 1.0)) fail("caps_ratio_max outside [0,1]");
        if (caps_min_length < 1) fail("caps_min_length must be >= 1");
        if (emote_count_max < 0) fail("emote_count_max must be >= 0");
        if (!(symbol_ratio_max >= 0.0 && symbol_ratio_max <= 1.0)) fail("symbol_ratio_max outside [0,1]");
        for (const auto& t : profanity_terms)
            if (t.empty() || t != ascii_lower(t)) fail("profanity terms must be non-empty lowercase");
        for (const auto& e : emote_lexicon)
            if (e.empty() || e.find_first_of(" \t\r\n\v\f") != std::string::npos)
                fail("emote tokens must be non-empty and whitespace-free");
    }

    bool operator==(const ClassifierConfig&) const = default;
};

/// Twitch global emotes commonly spammed in chat.
inline std::set<std::string> default_emote_lexicon()
{
    return {"Kappa",       "PogChamp",  "LUL",          "KEKW",        "OMEGALUL",
            "BibleThump",  "Kreygasm",  "4Head",        "monkaS",      "PepeHands",
            "TriHard",     "WutFace",   "NotLikeThis",  "DansGame",    "SeemsGood",
            "HeyGuys",     "ResidentSleeper", "FeelsBadMan", "FeelsGoodMan", "CoolStoryBob"};
}

/// One lowercase term per line; blank lines and lines starting with '#' are skipped.
inline std::set<std::string> load_term_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::InvalidConfig, "cannot open term file " + path);
    std::set<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        const auto b = line.find_first_not_of(' ');
        if (b == std::string::npos || line[b] == '#') continue;
        terms.insert(ascii_lower(line.substr(b)));
    }
    return terms;
}

inline void to_json(nlohmann::json& j, const ClassifierConfig& c)
{
    std::vector<std::string> rules;
    for (Rule r : c.enabled_rules) rules.emplace_back(to_string(r));
    j = nlohmann::json{{"profanity_terms", c.profanity_terms},
                       {"caps_ratio_max", c.caps_ratio_max},
                       {"caps_min_length", c.caps_min_length},
                       {"emote_count_max", c.emote_count_max},
                       {"emote_lexicon", c.emote_lexicon},
                       {"symbol_ratio_max", c.symbol_ratio_max},
                       {"enabled_rules", rules}};
}

/// Missing keys keep their defaults. `profanity_file` may name a term file
/// whose entries are added to `profanity_terms`.
inline void from_json(const nlohmann::json& j, ClassifierConfig& c)
{
    c = ClassifierConfig{};
    c.emote_lexicon = default_emote_lexicon();
    try {
        if (j.contains("profanity_terms"))
            for (const auto& t : j.at("profanity_terms")) c.profanity_terms.insert(ascii_lower(t.get<std::string>()));
        if (j.contains("profanity_file")) {
            auto extra = load_term_file(j.at("profanity_file").get<std::string>());
            c.profanity_terms.insert(extra.begin(), extra.end());
        }
        if (j.contains("caps_ratio_max")) j.at("caps_ratio_max").get_to(c.caps_ratio_max);
        if (j.contains("caps_min_length")) j.at("caps_min_length").get_to(c.caps_min_length);
        if (j.contains("emote_count_max")) j.at("emote_count_max").get_to(c.emote_count_max);
        if (j.contains("emote_lexicon")) c.emote_lexicon = j.at("emote_lexicon").get<std::set<std::string>>();
        if (j.contains("symbol_ratio_max")) j.at("symbol_ratio_max").get_to(c.symbol_ratio_max);
        if (j.contains("enabled_rules")) {
            c.enabled_rules.clear();
            for (const auto& r : j.at("enabled_rules")) c.enabled_rules.insert(rule_from_string(r.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("classifier config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::InvalidConfig) throw;
        throw Error(Errc::InvalidConfig, std::string("classifier config: ") + e.what());
    }
}

namespace text {

enum class CharClass { Space, Upper, Lower, Uncased, Digit, Symbol };

/// Decodes UTF-8 into code points; each invalid byte becomes U+FFFD.
inline std::vector<char32_t> decode_utf8(std::string_view s)
{
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        int len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) { len = 1; cp = b0; }
        else if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; }
        else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; }
        else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; }
        bool ok = len > 0 && i + len <= s.size();
        for (int k = 1; ok && k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) ok = false;
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

/// ASCII and Latin-1 are classified exactly. Other code points are symbols
/// inside the punctuation/symbol/emoji blocks, uncased letters elsewhere.
inline CharClass classify_char(char32_t c)
{
    if (c == ' ' || (c >= '\t' && c <= '\r') || c == 0xA0 || c == 0x3000 ||
        (c >= 0x2000 && c <= 0x200A))
        return CharClass::Space;
    if (c >= 'A' && c <= 'Z') return CharClass::Upper;
    if (c >= 'a' && c <= 'z') return CharClass::Lower;
    if (c >= '0' && c <= '9') return CharClass::Digit;
    if (c < 0x80) return CharClass::Symbol;
    if (c < 0xC0) return CharClass::Symbol;
    if (c == 0xD7 || c == 0xF7) return CharClass::Symbol;
    if (c <= 0xDE) return CharClass::Upper;
    if (c <= 0xFF) return CharClass::Lower;
    if ((c >= 0x2000 && c <= 0x2BFF) || (c >= 0x3001 && c <= 0x303F) || (c >= 0xE000 && c <= 0xF8FF) ||
        (c >= 0xFE00 && c <= 0xFE0F) || c == 0xFFFD || (c >= 0x1F000 && c <= 0x1FAFF))
        return CharClass::Symbol;
    return CharClass::Uncased;
}

inline std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> tokens;
    constexpr std::string_view kWs = " \t\r\n\v\f";
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto b = s.find_first_not_of(kWs, pos);
        if (b == std::string_view::npos) break;
        const auto e = s.find_first_of(kWs, b);
        tokens.push_back(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
        pos = e == std::string_view::npos ? s.size() : e;
    }
    return tokens;
}

/// Strips ASCII punctuation from both token edges.
inline std::string_view strip_edge_punct(std::string_view tok)
{
    auto is_punct = [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u < 0x80 && !((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
    };
    while (!tok.empty() && is_punct(tok.front())) tok.remove_prefix(1);
    while (!tok.empty() && is_punct(tok.back())) tok.remove_suffix(1);
    return tok;
}

}  // namespace text

struct LetterCounts {
    std::size_t letters = 0;   // cased letters only
    std::size_t upper = 0;
    std::size_t non_space = 0;
    std::size_t symbols = 0;
    std::size_t length = 0;    // code points
};

inline LetterCounts count_chars(std::string_view body)
{
    LetterCounts n;
    for (char32_t c : text::decode_utf8(body)) {
        ++n.length;
        switch (text::classify_char(c)) {
        case text::CharClass::Space: continue;
        case text::CharClass::Upper: ++n.letters; ++n.upper; break;
        case text::CharClass::Lower: ++n.letters; break;
        case text::CharClass::Symbol: ++n.symbols; break;
        case text::CharClass::Uncased:
        case text::CharClass::Digit: break;
        }
        ++n.non_space;
    }
    return n;
}

/// Uppercase letters over all cased letters; 0 when there are none.
inline double caps_ratio(std::string_view body)
{
    const auto n = count_chars(body);
    return n.letters == 0 ? 0.0 : static_cast<double>(n.upper) / static_cast<double>(n.letters);
}

/// Non-alphanumeric non-whitespace characters over non-whitespace characters.
inline double symbol_ratio(std::string_view body)
{
    const auto n = count_chars(body);
    return n.non_space == 0 ? 0.0 : static_cast<double>(n.symbols) / static_cast<double>(n.non_space);
}

inline int count_emotes(std::string_view body, const std::set<std::string>& lexicon)
{
    int count = 0;
    for (auto tok : text::split_ws(body))
        if (lexicon.count(std::string(tok))) ++count;
    return count;
}

/// Lowercased profanity terms found among the body's tokens, in order.
inline std::vector<std::string> profanity_hits(std::string_view body, const std::set<std::string>& terms)
{
    std::vector<std::string> hits;
    for (auto tok : text::split_ws(body)) {
        auto word = ascii_lower(text::strip_edge_punct(tok));
        if (!word.empty() && terms.count(word)) hits.push_back(std::move(word));
    }
    return hits;
}

enum class Label { NotNegative, Negative };

struct ClassificationMetrics {
    double caps_ratio = 0.0;
    double symbol_ratio = 0.0;
    int emote_count = 0;
    std::vector<std::string> profanity_hits;

    bool operator==(const ClassificationMetrics&) const = default;
};

struct ClassificationResult {
    Label label = Label::NotNegative;
    RuleSet fired;
    ClassificationMetrics metrics;

    bool negative() const { return label == Label::Negative; }
    bool operator==(const ClassificationResult&) const = default;
};

inline constexpr std::size_t kSymbolSpamMinLength = 4;

inline ClassificationResult classify(std::string_view body, const ClassifierConfig& config)
{
    ClassificationResult r;
    const auto n = count_chars(body);
    r.metrics.caps_ratio = n.letters == 0 ? 0.0 : static_cast<double>(n.upper) / static_cast<double>(n.letters);
    r.metrics.symbol_ratio = n.non_space == 0 ? 0.0 : static_cast<double>(n.symbols) / static_cast<double>(n.non_space);
    r.metrics.emote_count = count_emotes(body, config.emote_lexicon);
    r.metrics.profanity_hits = profanity_hits(body, config.profanity_terms);

    auto fire = [&](Rule rule, bool cond) {
        if (cond && config.enabled_rules.count(rule)) r.fired.insert(rule);
    };
    fire(Rule::Profanity, !r.metrics.profanity_hits.empty());
    fire(Rule::Caps, n.letters >= static_cast<std::size_t>(config.caps_min_length) &&
                         r.metrics.caps_ratio > config.caps_ratio_max);
    fire(Rule::EmoteSpam, r.metrics.emote_count > config.emote_count_max);
    fire(Rule::SymbolSpam, n.length >= kSymbolSpamMinLength && r.metrics.symbol_ratio > config.symbol_ratio_max);
    r.label = r.fired.empty() ? Label::NotNegative : Label::Negative;
    return r;
}

inline ClassificationResult classify(const ChatMessage& message, const ClassifierConfig& config)
{
    return classify(message.body, config);
}

inline void to_json(nlohmann::json& j, const ClassificationResult& r)
{
    std::vector<std::string> fired;
    for (Rule rule : r.fired) fired.emplace_back(to_string(rule));
    j = nlohmann::json{{"label", r.negative() ? "negative" : "not_negative"},
                       {"fired", fired},
                       {"metrics",
                        {{"caps_ratio", r.metrics.caps_ratio},
                         {"symbol_ratio", r.metrics.symbol_ratio},
                         {"emote_count", r.metrics.emote_count},
                         {"profanity_hits", r.metrics.profanity_hits}}}};
}

inline void from_json(const nlohmann::json& j, ClassificationResult& r)
{
    const auto label = j.at("label").get<std::string>();
    if (label == "negative")
        r.label = Label::Negative;
    else if (label == "not_negative")
        r.label = Label::NotNegative;
    else
        throw Error(Errc::InvalidValue, "unknown label '" + label + "'");
    r.fired.clear();
    for (const auto& f : j.at("fired")) r.fired.insert(rule_from_string(f.get<std::string>()));
    const auto& m = j.at("metrics");
    m.at("caps_ratio").get_to(r.metrics.caps_ratio);
    m.at("symbol_ratio").get_to(r.metrics.symbol_ratio);
    m.at("emote_count").get_to(r.metrics.emote_count);
    m.at("profanity_hits").get_to(r.metrics.profanity_hits);
}

}  // namespace storychat
