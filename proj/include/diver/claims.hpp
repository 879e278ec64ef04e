#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "diver/gateway.hpp"
#include "diver/types.hpp"

namespace diver {

namespace claims_detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Strips one leading list marker: "1.", "12)", "-", "*", "•".
inline std::string strip_marker(const std::string& line) {
    std::size_t i = 0;
    if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
        ++i;
    } else if (line.compare(0, 3, "\xe2\x80\xa2") == 0) {   // UTF-8 bullet
        i = 3;
    } else {
        std::size_t j = i;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i && j < line.size() && (line[j] == '.' || line[j] == ')')) i = j + 1;
        else i = 0;
    }
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return line.substr(i);
}

inline std::vector<std::string> words_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

inline bool starts_upper(const std::string& w) {
    return !w.empty() && std::isupper(static_cast<unsigned char>(w[0]));
}

inline std::string lower_alpha(const std::string& w) {
    std::string out;
    for (char c : w)
        if (std::isalpha(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(c));
    return out;
}

inline bool in_list(const std::string& w, const char* const* list, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (w == list[i]) return true;
    return false;
}

}  // namespace claims_detail

// One claim statement per line; numbered, bulleted, and bare lines all accepted.
inline std::vector<std::string> parse_claim_lines(const std::string& completion) {
    std::vector<std::string> out;
    std::istringstream ss(completion);
    std::string line;
    while (std::getline(ss, line)) {
        std::string body = claims_detail::trim(claims_detail::strip_marker(claims_detail::trim(line)));
        if (!body.empty()) out.push_back(body);
    }
    return out;
}

inline std::string serialize_claims(const std::vector<Claim>& claims) {
    std::ostringstream os;
    for (std::size_t i = 0; i < claims.size(); ++i) os << (i + 1) << ". " << claims[i].statement << "\n";
    return os.str();
}

// Claim statements joined for whole-set embeddings.
inline std::string concat_claims(const std::vector<Claim>& claims) {
    std::string out;
    for (std::size_t i = 0; i < claims.size(); ++i) {
        if (i) out += "\n";
        out += claims[i].statement;
    }
    return out;
}

inline std::optional<ClaimCategory> category_from_name(const std::string& name) {
    std::size_t a = name.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return std::nullopt;
    std::size_t b = name.find_last_not_of(" \t\r\n");
    std::string low;
    for (std::size_t i = a; i <= b; ++i)
        low += static_cast<char>(std::tolower(static_cast<unsigned char>(name[i])));
    if (low == "explicitattribute") return ClaimCategory::ExplicitAttribute;
    if (low == "activityinteraction") return ClaimCategory::ActivityInteraction;
    if (low == "entitycentric") return ClaimCategory::EntityCentric;
    if (low == "general") return ClaimCategory::General;
    return std::nullopt;
}

// Deterministic fallback classifier:
//   digits / adjacent capitalized words (names, named events)  -> ExplicitAttribute
//   interaction-verb lexicon hit                               -> ActivityInteraction
//   no verb-like token at all (bare noun phrase)               -> EntityCentric
//   otherwise                                                  -> General
inline ClaimCategory rule_based_category(const std::string& statement) {
    using namespace claims_detail;
    static const char* interaction_verbs[] = {
        "shake", "shakes", "shaking", "hug", "hugs", "hugging", "kiss", "kisses", "kissing",
        "interview", "interviews", "interviewing", "meet", "meets", "meeting", "play", "plays",
        "playing", "dance", "dances", "dancing", "walk", "walks", "walking", "run", "runs",
        "running", "talk", "talks", "talking", "fight", "fights", "fighting", "hold", "holds",
        "holding", "greet", "greets", "greeting", "wave", "waves", "waving", "celebrate",
        "celebrates", "celebrating", "perform", "performs", "performing", "protest", "protests",
        "protesting", "march", "marches", "marching", "embrace", "embraces", "embracing"};
    static const char* plain_verbs[] = {"is",    "are",   "was",   "were", "be",    "been",  "being",
                                        "has",   "have",  "had",   "does", "do",    "did",   "shows",
                                        "show",  "shown", "appears", "appear", "depicts", "depict",
                                        "contains", "contain", "wears", "wear", "attends", "attend",
                                        "visits", "visit", "wins", "win", "won", "says", "say", "said"};

    const auto tokens = words_of(statement);
    for (char c : statement)
        if (std::isdigit(static_cast<unsigned char>(c))) return ClaimCategory::ExplicitAttribute;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
        if (starts_upper(tokens[i]) && starts_upper(tokens[i + 1])) return ClaimCategory::ExplicitAttribute;

    bool verb_seen = false;
    for (const auto& raw : tokens) {
        const std::string w = lower_alpha(raw);
        if (w.empty()) continue;
        if (in_list(w, interaction_verbs, std::size(interaction_verbs))) return ClaimCategory::ActivityInteraction;
        if (in_list(w, plain_verbs, std::size(plain_verbs))) verb_seen = true;
        if (w.size() > 4 && (w.rfind("ing") == w.size() - 3 || w.rfind("ed") == w.size() - 2)) verb_seen = true;
    }
    return verb_seen ? ClaimCategory::General : ClaimCategory::EntityCentric;
}

// Prompt-first classification with the rule-based fallback; never fails.
inline ClaimCategory classify_claim(const std::string& statement, const ProviderGateway& gw) {
    if (statement.empty()) throw DataError("classify_claim: empty statement");
    try {
        const std::string answer = gw.complete(PromptId::CategorizeClaim, {{"claim", statement}}, "categorize");
        if (auto cat = category_from_name(answer)) return *cat;
    } catch (const Error&) {
        // fall through to the rules
    }
    return rule_based_category(statement);
}

// LLM claim-list completion -> ClaimSet. Lines beyond max_claims are dropped
// (`truncated` reports that); an empty completion yields an empty set, which
// only the consistency loop may hold transiently.
inline ClaimSet parse_claims_completion(const std::string& completion, const ProviderGateway& gw,
                                        const PipelineConfig& config, ClaimOrigin origin,
                                        int corrected_round = 0, bool* truncated = nullptr) {
    ClaimSet set;
    set.origin = origin;
    set.corrected_round = corrected_round;
    auto lines = parse_claim_lines(completion);
    if (truncated) *truncated = lines.size() > static_cast<std::size_t>(config.max_claims);
    if (lines.size() > static_cast<std::size_t>(config.max_claims)) lines.resize(config.max_claims);
    for (auto& line : lines) set.claims.push_back(Claim{line, classify_claim(line, gw)});
    return set;
}

}  // namespace diver
