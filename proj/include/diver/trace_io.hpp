#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "diver/types.hpp"

namespace diver {

namespace trace_detail {

inline Stage stage_from_name(const std::string& s) {
    for (Stage st : {Stage::Linguistic, Stage::Consistency, Stage::AlignmentGate, Stage::Forensics, Stage::Fusion})
        if (s == to_string(st)) return st;
    throw DataError("trace: unknown stage " + s);
}

inline StageAction action_from_name(const std::string& s) {
    for (StageAction a : {StageAction::Proceed, StageAction::SkipForensics, StageAction::Retry,
                          StageAction::Fallback, StageAction::Rollback})
        if (s == to_string(a)) return a;
    throw DataError("trace: unknown action " + s);
}

inline ToolKind tool_from_name(const std::string& s) {
    for (ToolKind k : kAllToolKinds)
        if (s == to_string(k)) return k;
    throw DataError("trace: unknown tool " + s);
}

inline ClaimCategory category_from_name_strict(const std::string& s) {
    for (ClaimCategory c : {ClaimCategory::ExplicitAttribute, ClaimCategory::ActivityInteraction,
                            ClaimCategory::EntityCentric, ClaimCategory::General})
        if (s == to_string(c)) return c;
    throw DataError("trace: unknown claim category " + s);
}

inline ClaimOrigin origin_from_name(const std::string& s) {
    for (ClaimOrigin o : {ClaimOrigin::Extracted, ClaimOrigin::Corrected, ClaimOrigin::Fallback, ClaimOrigin::Refined})
        if (s == to_string(o)) return o;
    throw DataError("trace: unknown claim origin " + s);
}

}  // namespace trace_detail

inline nlohmann::ordered_json trace_to_json(const PipelineTrace& trace) {
    nlohmann::ordered_json j;
    j["item_id"] = trace.item_id;
    j["seed"] = trace.seed;

    nlohmann::ordered_json decisions = nlohmann::ordered_json::array();
    for (const auto& d : trace.decisions) {
        nlohmann::ordered_json dj;
        dj["stage"] = to_string(d.stage);
        dj["action"] = to_string(d.action);
        dj["scores"] = d.scores;
        decisions.push_back(std::move(dj));
    }
    j["decisions"] = std::move(decisions);

    nlohmann::ordered_json calls = nlohmann::ordered_json::array();
    for (const auto& c : trace.provider_calls) {
        nlohmann::ordered_json cj;
        cj["provider"] = c.provider;
        cj["purpose"] = c.purpose;
        cj["tokens_in"] = c.tokens_in;
        cj["tokens_out"] = c.tokens_out;
        cj["wall_ms"] = c.wall_ms;
        calls.push_back(std::move(cj));
    }
    j["provider_calls"] = std::move(calls);

    nlohmann::ordered_json claims;
    claims["origin"] = to_string(trace.claims.origin);
    claims["corrected_round"] = trace.claims.corrected_round;
    nlohmann::ordered_json claim_list = nlohmann::ordered_json::array();
    for (const auto& c : trace.claims.claims)
        claim_list.push_back({{"statement", c.statement}, {"category", to_string(c.category)}});
    claims["claims"] = std::move(claim_list);
    j["claims"] = std::move(claims);

    nlohmann::ordered_json evidence;
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    for (const auto& it : trace.evidence.items)
        items.push_back({{"tool", to_string(it.tool)}, {"claim_index", it.claim_index}, {"content", it.content}});
    evidence["items"] = std::move(items);
    evidence["consolidated_summary"] = trace.evidence.consolidated_summary;
    evidence["f_v"] = trace.evidence.f_v;
    evidence["m_v"] = trace.evidence.m_v;
    j["evidence"] = std::move(evidence);

    j["bank_masks"] = trace.bank_masks;
    j["fusion"] = {{"alpha", trace.fusion_alpha}, {"mu", trace.fusion_mu}};
    j["prediction"] = trace.prediction;
    j["verdict"] = trace.verdict;
    j["flags"] = trace.flags;
    if (trace.label) j["label"] = *trace.label;
    j["errored"] = trace.errored;
    if (trace.errored) j["error"] = trace.error;
    j["totals"] = {{"tokens_in", trace.total_tokens_in()},
                   {"tokens_out", trace.total_tokens_out()},
                   {"wall_ms", trace.total_wall_ms()},
                   {"calls", trace.provider_calls.size()}};
    return j;
}

inline PipelineTrace trace_from_json(const nlohmann::json& j) {
    PipelineTrace trace;
    trace.item_id = j.at("item_id").get<std::string>();
    trace.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& dj : j.at("decisions")) {
        StageDecision d;
        d.stage = trace_detail::stage_from_name(dj.at("stage").get<std::string>());
        d.action = trace_detail::action_from_name(dj.at("action").get<std::string>());
        d.scores = dj.at("scores").get<std::map<std::string, double>>();
        trace.decisions.push_back(std::move(d));
    }
    for (const auto& cj : j.at("provider_calls")) {
        CallRecord c;
        c.provider = cj.at("provider").get<std::string>();
        c.purpose = cj.at("purpose").get<std::string>();
        c.tokens_in = cj.at("tokens_in").get<std::int64_t>();
        c.tokens_out = cj.at("tokens_out").get<std::int64_t>();
        c.wall_ms = cj.at("wall_ms").get<std::int64_t>();
        trace.provider_calls.push_back(std::move(c));
    }
    const auto& claims = j.at("claims");
    trace.claims.origin = trace_detail::origin_from_name(claims.at("origin").get<std::string>());
    trace.claims.corrected_round = claims.at("corrected_round").get<int>();
    for (const auto& cj : claims.at("claims"))
        trace.claims.claims.push_back(
            Claim{cj.at("statement").get<std::string>(),
                  trace_detail::category_from_name_strict(cj.at("category").get<std::string>())});
    const auto& ev = j.at("evidence");
    for (const auto& it : ev.at("items"))
        trace.evidence.items.push_back(EvidenceItem{trace_detail::tool_from_name(it.at("tool").get<std::string>()),
                                                    it.at("claim_index").get<int>(),
                                                    it.at("content").get<std::string>()});
    trace.evidence.consolidated_summary = ev.at("consolidated_summary").get<std::string>();
    trace.evidence.f_v = ev.at("f_v").get<Vec>();
    trace.evidence.m_v = ev.at("m_v").get<int>();
    trace.bank_masks = j.at("bank_masks").get<std::vector<int>>();
    trace.fusion_alpha = j.at("fusion").at("alpha").get<Vec>();
    trace.fusion_mu = j.at("fusion").at("mu").get<Vec>();
    trace.prediction = j.at("prediction").get<double>();
    trace.verdict = j.at("verdict").get<int>();
    trace.flags = j.at("flags").get<std::vector<std::string>>();
    if (j.contains("label")) trace.label = j.at("label").get<int>();
    trace.errored = j.at("errored").get<bool>();
    if (j.contains("error")) trace.error = j.at("error").get<std::string>();
    return trace;
}

inline void write_trace(const PipelineTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace: " + path);
    out << trace_to_json(trace).dump(2) << "\n";
}

inline PipelineTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read trace: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("trace " + path + ": " + e.what());
    }
    return trace_from_json(j);
}

}  // namespace diver
