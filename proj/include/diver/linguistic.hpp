#pragma once

#include <future>
#include <string>
#include <vector>

#include "diver/claims.hpp"
#include "diver/gateway.hpp"
#include "diver/linalg.hpp"
#include "diver/types.hpp"

namespace diver {

struct StyleAnalyses {
    std::string auth_text;
    std::string contra_text;
};

struct StyleFeatures {
    Vec f_H;   // authenticity/style encoding
    Vec f_R;   // logical-contradiction encoding
    Vec f_t;   // raw-text encoding
    int m_H = 1, m_R = 1, m_t = 1;
    StyleAnalyses analyses;
    std::vector<std::string> flags;
};

struct Stage1Result {
    ClaimSet claims;              // empty set when extraction failed or came back blank
    bool truncated = false;
    StyleFeatures style;
    std::vector<std::string> flags;
};

inline ClaimSet extract_claims(const NewsItem& item, const ProviderGateway& gw, const PipelineConfig& config,
                               bool* truncated = nullptr) {
    const std::string completion = gw.complete(PromptId::Extract, {{"T", item.text}}, "extract");
    ClaimSet set = parse_claims_completion(completion, gw, config, ClaimOrigin::Extracted, 0, truncated);
    if (set.claims.empty()) throw EmptyCompletion("extract: no claims in completion");
    return set;
}

namespace linguistic_detail {

// Encode one style analysis; provider failure degrades to the zero vector.
inline void encode_or_degrade(const ProviderGateway& gw, const std::string& text, const char* purpose,
                              const char* flag, Vec& out, int& mask, std::vector<std::string>& flags, int dim) {
    try {
        out = gw.sentence_embed(text, purpose).values;
        mask = 1;
    } catch (const Error&) {
        out = Vec(dim, 0.0);
        mask = 0;
        flags.push_back(flag);
    }
}

}  // namespace linguistic_detail

inline StyleFeatures analyze_style(const NewsItem& item, const ProviderGateway& gw, const PipelineConfig& config) {
    StyleFeatures out;
    const int dim = config.feature_dim_text;

    std::string auth, contra;
    bool auth_ok = true, contra_ok = true;
    try {
        auth = gw.complete(PromptId::Auth, {{"T", item.text}}, "auth");
    } catch (const Error&) {
        auth_ok = false;
    }
    try {
        contra = gw.complete(PromptId::Contra, {{"T", item.text}}, "contra");
    } catch (const Error&) {
        contra_ok = false;
    }
    out.analyses = {auth, contra};

    if (auth_ok && !auth.empty()) {
        linguistic_detail::encode_or_degrade(gw, auth, "embed_f_H", "degraded_f_H", out.f_H, out.m_H, out.flags, dim);
    } else {
        out.f_H = Vec(dim, 0.0);
        out.m_H = 0;
        out.flags.push_back("degraded_f_H");
    }
    if (contra_ok && !contra.empty()) {
        linguistic_detail::encode_or_degrade(gw, contra, "embed_f_R", "degraded_f_R", out.f_R, out.m_R, out.flags, dim);
    } else {
        out.f_R = Vec(dim, 0.0);
        out.m_R = 0;
        out.flags.push_back("degraded_f_R");
    }
    linguistic_detail::encode_or_degrade(gw, item.text, "embed_f_t", "degraded_f_t", out.f_t, out.m_t, out.flags, dim);
    return out;
}

// The three stage-1 prompts run concurrently; records land in the trace in
// role order (extract, auth, contra) after the join so traces stay
// byte-stable no matter which call finishes first.
inline Stage1Result run_stage1(const NewsItem& item, const ProviderGateway& gw, const PipelineConfig& config) {
    using Deferred = std::pair<std::string, CallRecord>;
    auto launch = [&](PromptId id, const char* purpose) {
        return std::async(std::launch::async,
                          [&gw, &item, id, purpose] { return gw.complete_deferred(id, {{"T", item.text}}, purpose); });
    };
    auto fut_extract = launch(PromptId::Extract, "extract");
    auto fut_auth = launch(PromptId::Auth, "auth");
    auto fut_contra = launch(PromptId::Contra, "contra");

    auto join = [&gw](std::future<Deferred>& fut, std::string& out, bool& ok) {
        try {
            Deferred d = fut.get();
            gw.record(d.second);
            out = std::move(d.first);
            ok = true;
        } catch (const Error&) {
            ok = false;
        }
    };
    std::string extract_completion, auth, contra;
    bool extract_ok = false, auth_ok = false, contra_ok = false;
    join(fut_extract, extract_completion, extract_ok);
    join(fut_auth, auth, auth_ok);
    join(fut_contra, contra, contra_ok);

    Stage1Result result;
    const int dim = config.feature_dim_text;

    if (extract_ok) {
        result.claims =
            parse_claims_completion(extract_completion, gw, config, ClaimOrigin::Extracted, 0, &result.truncated);
        if (result.claims.claims.empty()) result.flags.push_back("empty_extraction");
        if (result.truncated) result.flags.push_back("truncated_claims");
    } else {
        result.flags.push_back("extract_failed");
    }

    StyleFeatures& style = result.style;
    style.analyses = {auth, contra};
    if (auth_ok && !auth.empty()) {
        linguistic_detail::encode_or_degrade(gw, auth, "embed_f_H", "degraded_f_H", style.f_H, style.m_H,
                                             style.flags, dim);
    } else {
        style.f_H = Vec(dim, 0.0);
        style.m_H = 0;
        style.flags.push_back("degraded_f_H");
    }
    if (contra_ok && !contra.empty()) {
        linguistic_detail::encode_or_degrade(gw, contra, "embed_f_R", "degraded_f_R", style.f_R, style.m_R,
                                             style.flags, dim);
    } else {
        style.f_R = Vec(dim, 0.0);
        style.m_R = 0;
        style.flags.push_back("degraded_f_R");
    }
    linguistic_detail::encode_or_degrade(gw, item.text, "embed_f_t", "degraded_f_t", style.f_t, style.m_t,
                                         style.flags, dim);
    return result;
}

}  // namespace diver
