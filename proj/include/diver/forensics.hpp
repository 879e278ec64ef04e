#pragma once

#include <map>
#include <string>
#include <vector>

#include "diver/claims.hpp"
#include "diver/gateway.hpp"
#include "diver/types.hpp"

namespace diver {

// Category -> tool routing. Tools are coalesced per image and executed in
// ToolKind enum order, so each tool runs at most once per forensic pass.
inline std::vector<ToolKind> route_tools(ClaimCategory category) {
    switch (category) {
        case ClaimCategory::ExplicitAttribute: return {ToolKind::OCR, ToolKind::ImageTagging};
        case ClaimCategory::ActivityInteraction: return {ToolKind::DenseCaptioning};
        case ClaimCategory::EntityCentric: return {ToolKind::ImageTagging, ToolKind::DenseCaptioning};
        case ClaimCategory::General: return {ToolKind::ImageCaptioning};
    }
    return {ToolKind::ImageCaptioning};
}

// "TOOL <kind>: <content>" lines for prompt injection; multi-line tool output
// is flattened onto one line.
inline std::string serialize_evidence_for_prompt(const std::vector<EvidenceItem>& items) {
    std::string out;
    for (const auto& item : items) {
        std::string flat = item.content;
        for (char& c : flat)
            if (c == '\n') c = ';';
        out += "TOOL ";
        out += to_string(item.tool);
        out += ": ";
        out += flat;
        out += "\n";
    }
    return out;
}

inline std::string concat_evidence_contents(const std::vector<EvidenceItem>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += "\n";
        out += items[i].content;
    }
    return out;
}

// Dot product of unit embeddings of the concatenated claims and the
// concatenated evidence contents; low values signal contradiction.
inline double refutation_score(const ClaimSet& claims, const std::vector<EvidenceItem>& evidence,
                               const ProviderGateway& gw) {
    if (evidence.empty()) throw DataError("refutation_score: empty evidence");
    const EmbeddingVector c = gw.claim_embed(concat_claims(claims.claims), "embed_refute_claims");
    const EmbeddingVector e = gw.claim_embed(concat_evidence_contents(evidence), "embed_refute_evidence");
    return dot(c.values, e.values);
}

inline EvidenceBundle skipped_bundle(int feature_dim_text) {
    EvidenceBundle bundle;
    bundle.f_v = Vec(feature_dim_text, 0.0);
    bundle.m_v = 0;
    return bundle;
}

struct ForensicPassResult {
    EvidenceBundle bundle;
    bool rollback_requested = false;
    ClaimSet refined;               // meaningful when rollback_requested
    StageDecision decision;
    std::vector<std::string> flags;
};

// One forensic pass: route tools by claim category, gather evidence, check
// the refutation score, and either request a rollback (re-extraction against
// the evidence) or consolidate into f_v. Tool failures degrade tool-by-tool;
// a pass with no usable evidence degrades to the masked-out bundle.
inline ForensicPassResult forensic_pass(const NewsItem& item, const ClaimSet& claims, const ProviderGateway& gw,
                                        const PipelineConfig& config, int rollback_count) {
    ForensicPassResult result;
    result.decision.stage = Stage::Forensics;

    std::map<ToolKind, int> requested;   // tool -> first requesting claim
    for (std::size_t i = 0; i < claims.claims.size(); ++i)
        for (ToolKind k : route_tools(claims.claims[i].category))
            if (!requested.count(k)) requested[k] = static_cast<int>(i);

    std::vector<EvidenceItem> items;
    for (ToolKind k : kAllToolKinds) {
        auto it = requested.find(k);
        if (it == requested.end()) continue;
        try {
            std::string content = gw.vision(k, item.image, std::string("evidence:") + to_string(k));
            if (!content.empty()) items.push_back(EvidenceItem{k, it->second, std::move(content)});
        } catch (const Error&) {
            result.flags.push_back(std::string("tool_failed:") + to_string(k));
        }
    }

    if (items.empty()) {
        result.bundle = skipped_bundle(config.feature_dim_text);
        result.flags.push_back("forensics_degraded");
        result.decision.action = StageAction::Proceed;
        result.decision.scores = {{"evidence_items", 0.0}};
        return result;
    }

    const double s_refute = refutation_score(claims, items, gw);
    result.decision.scores = {{"s_refute", s_refute},
                              {"gamma", config.gamma},
                              {"evidence_items", static_cast<double>(items.size())}};

    if (s_refute < config.gamma && rollback_count < config.max_rollbacks) {
        const std::string completion =
            gw.complete(PromptId::ReExtract, {{"T", item.text}, {"evidence", serialize_evidence_for_prompt(items)}},
                        "re_extract", /*extended_context=*/true);
        ClaimSet refined = parse_claims_completion(completion, gw, config, ClaimOrigin::Refined);
        if (!refined.claims.empty()) {
            result.rollback_requested = true;
            result.refined = std::move(refined);
            result.decision.action = StageAction::Rollback;
            return result;
        }
        result.flags.push_back("re_extract_empty");
    }
    if (s_refute < config.gamma && !result.rollback_requested && rollback_count >= config.max_rollbacks)
        result.flags.push_back("refutation_unresolved");

    result.decision.action = StageAction::Proceed;
    result.bundle.items = std::move(items);
    try {
        result.bundle.consolidated_summary =
            gw.complete(PromptId::Consolidate, {{"evidence", serialize_evidence_for_prompt(result.bundle.items)}},
                        "consolidate");
    } catch (const Error&) {
        result.flags.push_back("consolidate_failed");
        result.bundle.consolidated_summary = concat_evidence_contents(result.bundle.items);
    }
    if (result.bundle.consolidated_summary.find_first_not_of(" \t\r\n") == std::string::npos)
        result.bundle.consolidated_summary = concat_evidence_contents(result.bundle.items);
    try {
        result.bundle.f_v = gw.sentence_embed(result.bundle.consolidated_summary, "embed_f_v").values;
        result.bundle.m_v = 1;
    } catch (const Error&) {
        result.bundle = skipped_bundle(config.feature_dim_text);
        result.flags.push_back("forensics_degraded");
    }
    return result;
}

}  // namespace diver
