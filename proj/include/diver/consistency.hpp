#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diver/claims.hpp"
#include "diver/gateway.hpp"
#include "diver/linalg.hpp"
#include "diver/types.hpp"

namespace diver {

struct ConsistencyScores {
    double s_g = 0.0;   // global cosine, [-1, 1]
    double s_l = 0.0;   // local cross-attention score, (0, 1)
};

// Single-head cross-attention scorer. Untrained default keeps the score
// optimistic (sigmoid(2) ~= 0.88) so the stock judge reduces to a sensible
// global-cosine cutoff instead of demanding s_g = 1 exactly.
struct LocalXAttnParams {
    Vec w;
    double b = 0.0;

    static LocalXAttnParams untrained(int dim) {
        LocalXAttnParams p;
        p.w = Vec(dim, 0.0);
        p.b = 2.0;
        return p;
    }
};

struct JudgeParams {
    Vec weights{6.0, 6.0};
    double bias = -9.0;
    double threshold = 0.5;
};

inline double global_consistency(const Vec& t_embed, const Vec& c_embed) {
    return cosine_similarity(t_embed, c_embed);   // throws on dim mismatch / zero vector
}

inline double global_consistency(const EmbeddingVector& t_embed, const EmbeddingVector& c_embed) {
    return global_consistency(t_embed.values, c_embed.values);
}

// Queries are the claim tokens, keys/values the text tokens; attended rows are
// mean-pooled and squashed through a learned linear scorer.
inline double local_consistency(const std::vector<Vec>& t_tokens, const std::vector<Vec>& c_tokens,
                                const LocalXAttnParams& params) {
    if (t_tokens.empty() || c_tokens.empty()) throw DataError("local_consistency: empty token list");
    const std::size_t dim = params.w.size();
    for (const auto& v : t_tokens)
        if (v.size() != dim) throw DimensionMismatch("local_consistency: text token dim mismatch");
    for (const auto& v : c_tokens)
        if (v.size() != dim) throw DimensionMismatch("local_consistency: claim token dim mismatch");

    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    Vec pooled(dim, 0.0);
    for (const auto& q : c_tokens) {
        std::vector<double> logits(t_tokens.size());
        for (std::size_t j = 0; j < t_tokens.size(); ++j) logits[j] = dot(q, t_tokens[j]) * scale;
        double mx = logits[0];
        for (double l : logits) mx = std::max(mx, l);
        double denom = 0.0;
        for (double& l : logits) {
            l = std::exp(l - mx);
            denom += l;
        }
        for (std::size_t j = 0; j < t_tokens.size(); ++j) axpy(pooled, logits[j] / denom, t_tokens[j]);
    }
    for (double& x : pooled) x /= static_cast<double>(c_tokens.size());
    return sigmoid(dot(params.w, pooled) + params.b);
}

inline bool judge(const ConsistencyScores& scores, const JudgeParams& params) {
    const double z = params.weights[0] * scores.s_g + params.weights[1] * scores.s_l + params.bias;
    return sigmoid(z) >= params.threshold;
}

inline void save_judge_params(const JudgeParams& p, const std::string& path) {
    nlohmann::ordered_json j;
    j["weights"] = p.weights;
    j["bias"] = p.bias;
    j["threshold"] = p.threshold;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write judge params: " + path);
    out << j.dump(2) << "\n";
}

inline JudgeParams load_judge_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read judge params: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("judge params " + path + ": " + e.what());
    }
    JudgeParams p;
    p.weights = j.at("weights").get<Vec>();
    p.bias = j.at("bias").get<double>();
    p.threshold = j.at("threshold").get<double>();
    if (p.weights.size() != 2) throw DataError("judge params: expected 2 weights");
    if (p.threshold <= 0.0 || p.threshold >= 1.0) throw DataError("judge params: threshold must be in (0,1)");
    return p;
}

// Boundary value a score would need, holding the other fixed, to flip the
// judge to accept; used only for the diagnostic message.
inline double judge_boundary(const JudgeParams& p, double other_score, int which) {
    const double w = p.weights[which];
    if (w == 0.0) return 1.0;
    const double logit = std::log(p.threshold / (1.0 - p.threshold));
    const double other_w = p.weights[1 - which];
    const double needed = (logit - p.bias - other_w * other_score) / w;
    return std::min(1.0, std::max(0.0, needed));
}

inline std::string make_error_msg(const ConsistencyScores& s, const JudgeParams& p) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "extraction rejected: S_g=" << s.s_g << " (min " << judge_boundary(p, s.s_l, 0) << "), S_l=" << s.s_l
       << " (min " << judge_boundary(p, s.s_g, 1)
       << "); regenerate claims preserving the original meaning of the text.";
    return os.str();
}

struct CorrectionState {
    int round = 0;
    std::string last_error_msg;
    std::vector<std::pair<ClaimSet, ConsistencyScores>> history;
};

struct ReflectionResult {
    ClaimSet claims;
    std::vector<StageDecision> decisions;   // one Consistency entry per judged round
    CorrectionState state;
};

namespace consistency_detail {

inline std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

inline std::vector<Vec> token_embeddings(const ProviderGateway& gw, const std::string& text,
                                         const std::string& purpose) {
    std::vector<Vec> out;
    for (const auto& tok : whitespace_tokens(text)) out.push_back(gw.sentence_embed(tok, purpose).values);
    return out;
}

inline ConsistencyScores score_claims(const ProviderGateway& gw, const std::string& text,
                                      const std::vector<Claim>& claims, const LocalXAttnParams& local) {
    ConsistencyScores s;
    const std::string joined = concat_claims(claims);
    const EmbeddingVector t_embed = gw.sentence_embed(text, "embed_global_text");
    const EmbeddingVector c_embed = gw.sentence_embed(joined, "embed_global_claims");
    s.s_g = global_consistency(t_embed, c_embed);
    s.s_l = local_consistency(token_embeddings(gw, text, "embed_token_text"),
                              token_embeddings(gw, joined, "embed_token_claims"), local);
    return s;
}

}  // namespace consistency_detail

// Bounded self-correction loop. Scores the current claims, accepts on a
// positive judge verdict, otherwise feeds a diagnostic back through the
// Correct prompt; after tau failed rounds the claims are replaced by a
// single summarization fallback. An empty initial set (failed extraction)
// enters the loop as an automatically rejected round.
inline ReflectionResult reflect_and_correct(const NewsItem& item, const ClaimSet& initial,
                                            const ProviderGateway& gw, const PipelineConfig& config,
                                            const JudgeParams& judge_params,
                                            const LocalXAttnParams& local_params) {
    ReflectionResult result;
    ClaimSet current = initial;

    for (int round = 0; round <= config.tau; ++round) {
        ConsistencyScores scores;
        bool valid = false;
        std::string error_msg;
        if (current.claims.empty()) {
            error_msg = "extraction rejected: the extractor returned no claims; "
                        "produce at least one claim faithful to the text.";
        } else {
            scores = consistency_detail::score_claims(gw, item.text, current.claims, local_params);
            valid = judge(scores, judge_params);
            if (!valid) error_msg = make_error_msg(scores, judge_params);
        }
        result.state.history.emplace_back(current, scores);

        StageDecision decision;
        decision.stage = Stage::Consistency;
        decision.scores = {{"s_g", scores.s_g}, {"s_l", scores.s_l}, {"round", static_cast<double>(round)}};
        if (valid) {
            decision.action = StageAction::Proceed;
            result.decisions.push_back(decision);
            result.claims = current;
            return result;
        }

        result.state.last_error_msg = error_msg;
        if (round == config.tau) {
            decision.action = StageAction::Fallback;
            result.decisions.push_back(decision);
            break;
        }

        decision.action = StageAction::Retry;
        result.decisions.push_back(decision);
        const std::string completion = gw.complete(
            PromptId::Correct,
            {{"T", item.text}, {"claims", serialize_claims(current.claims)}, {"error", error_msg}}, "correct");
        current = parse_claims_completion(completion, gw, config, ClaimOrigin::Corrected, round + 1);
        result.state.round = round + 1;
    }

    // fallback: one summary claim, category General
    const std::string summary = gw.complete(PromptId::Summarize, {{"T", item.text}}, "summarize");
    ClaimSet fallback;
    fallback.origin = ClaimOrigin::Fallback;
    std::string stmt = claims_detail::trim(summary);
    for (char& c : stmt)
        if (c == '\n') c = ' ';
    if (stmt.empty()) stmt = item.text.substr(0, 200);
    fallback.claims.push_back(Claim{stmt, ClaimCategory::General});
    result.claims = fallback;
    return result;
}

}  // namespace diver
