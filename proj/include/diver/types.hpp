#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diver/errors.hpp"
#include "diver/linalg.hpp"

namespace diver {

// One text+image sample entering the pipeline.
struct NewsItem {
    std::string id;
    std::string text;
    std::string image;               // file path or opaque handle; resolved by providers
    std::optional<int> label;        // 1 = fake, 0 = real

    void validate() const {
        if (id.empty()) throw DataError("NewsItem: empty id");
        std::size_t a = text.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) throw DataError("NewsItem '" + id + "': empty text");
        if (label && *label != 0 && *label != 1)
            throw DataError("NewsItem '" + id + "': label must be 0 or 1");
    }
};

enum class ClaimCategory { ExplicitAttribute, ActivityInteraction, EntityCentric, General };

inline const char* to_string(ClaimCategory c) {
    switch (c) {
        case ClaimCategory::ExplicitAttribute: return "ExplicitAttribute";
        case ClaimCategory::ActivityInteraction: return "ActivityInteraction";
        case ClaimCategory::EntityCentric: return "EntityCentric";
        case ClaimCategory::General: return "General";
    }
    return "General";
}

struct Claim {
    std::string statement;           // single line, non-empty
    ClaimCategory category = ClaimCategory::General;
};

enum class ClaimOrigin { Extracted, Corrected, Fallback, Refined };

inline const char* to_string(ClaimOrigin o) {
    switch (o) {
        case ClaimOrigin::Extracted: return "Extracted";
        case ClaimOrigin::Corrected: return "Corrected";
        case ClaimOrigin::Fallback: return "Fallback";
        case ClaimOrigin::Refined: return "Refined";
    }
    return "Extracted";
}

struct ClaimSet {
    std::vector<Claim> claims;
    ClaimOrigin origin = ClaimOrigin::Extracted;
    int corrected_round = 0;         // meaningful when origin == Corrected

    void validate(int max_claims, int tau) const {
        if (claims.empty()) throw DataError("ClaimSet: no claims");
        if (static_cast<int>(claims.size()) > max_claims) throw DataError("ClaimSet: too many claims");
        for (const auto& c : claims) {
            if (c.statement.empty()) throw DataError("ClaimSet: empty claim statement");
            if (c.statement.find('\n') != std::string::npos)
                throw DataError("ClaimSet: claim statement contains newline");
        }
        if (origin == ClaimOrigin::Corrected && (corrected_round < 1 || corrected_round > tau))
            throw DataError("ClaimSet: corrected round out of range");
    }
};

enum class Stage { Linguistic, Consistency, AlignmentGate, Forensics, Fusion };
enum class StageAction { Proceed, SkipForensics, Retry, Fallback, Rollback };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::Linguistic: return "Linguistic";
        case Stage::Consistency: return "Consistency";
        case Stage::AlignmentGate: return "AlignmentGate";
        case Stage::Forensics: return "Forensics";
        case Stage::Fusion: return "Fusion";
    }
    return "Linguistic";
}

inline const char* to_string(StageAction a) {
    switch (a) {
        case StageAction::Proceed: return "Proceed";
        case StageAction::SkipForensics: return "SkipForensics";
        case StageAction::Retry: return "Retry";
        case StageAction::Fallback: return "Fallback";
        case StageAction::Rollback: return "Rollback";
    }
    return "Proceed";
}

struct StageDecision {
    Stage stage = Stage::Linguistic;
    StageAction action = StageAction::Proceed;
    std::map<std::string, double> scores;
};

struct CallRecord {
    std::string provider;            // llm | sentence_embedder | claim_embedder | joint_embedder | tool:<kind>
    std::string purpose;             // extract | auth | contra | ...
    std::int64_t tokens_in = 0;
    std::int64_t tokens_out = 0;
    std::int64_t wall_ms = 0;
};

enum class ToolKind { OCR = 0, ImageCaptioning = 1, DenseCaptioning = 2, ImageTagging = 3 };

inline const char* to_string(ToolKind t) {
    switch (t) {
        case ToolKind::OCR: return "OCR";
        case ToolKind::ImageCaptioning: return "ImageCaptioning";
        case ToolKind::DenseCaptioning: return "DenseCaptioning";
        case ToolKind::ImageTagging: return "ImageTagging";
    }
    return "OCR";
}

constexpr ToolKind kAllToolKinds[] = {ToolKind::OCR, ToolKind::ImageCaptioning,
                                      ToolKind::DenseCaptioning, ToolKind::ImageTagging};

struct EvidenceItem {
    ToolKind tool = ToolKind::OCR;
    int claim_index = 0;
    std::string content;             // non-empty
};

// Tool-extracted visual evidence plus its consolidated feature and mask.
struct EvidenceBundle {
    std::vector<EvidenceItem> items;
    std::string consolidated_summary;
    Vec f_v;
    int m_v = 0;

    void validate() const {
        if (m_v != 0 && m_v != 1) throw DataError("EvidenceBundle: mask must be 0 or 1");
        const bool zero_feature = [&] {
            for (double x : f_v)
                if (x != 0.0) return false;
            return true;
        }();
        if ((m_v == 0) != items.empty() || (m_v == 0) != zero_feature)
            throw DataError("EvidenceBundle: m_v=0 <=> no items <=> zero f_v violated");
        for (const auto& it : items)
            if (it.content.empty()) throw DataError("EvidenceBundle: empty evidence content");
    }
};

struct FusionDims {
    int d = 64;                      // branch feature dim
    int d_p = 16;                    // confidence hidden dim
    int d_h = 16;                    // attention dim

    void validate() const {
        if (d <= 0 || d_p <= 0 || d_h <= 0) throw ConfigError("fusion dims must be positive");
    }
};

enum class Aggregation { Mean, Min };

struct PipelineConfig {
    double beta = 0.29;              // alignment threshold
    int tau = 2;                     // max self-correction rounds
    double gamma = 0.2;              // refutation threshold
    int max_claims = 4;
    double llm_temperature = 0.4;
    int max_context_tokens = 4096;
    int extended_context_tokens = 8192;
    int max_rollbacks = 1;
    int feature_dim_text = 64;
    int feature_dim_joint = 64;
    FusionDims fusion_dims;
    std::uint64_t seed = 0;
    Aggregation alignment_aggregation = Aggregation::Mean;

    void validate() const {
        if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must be in [0,1]");
        if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0,1]");
        if (tau < 0) throw ConfigError("tau must be >= 0");
        if (max_rollbacks < 0) throw ConfigError("max_rollbacks must be >= 0");
        if (max_claims < 1) throw ConfigError("max_claims must be >= 1");
        if (llm_temperature < 0.0 || llm_temperature > 2.0)
            throw ConfigError("llm_temperature must be in [0,2]");
        if (feature_dim_text <= 0 || feature_dim_joint <= 0)
            throw ConfigError("feature dims must be positive");
        if (max_context_tokens <= 0 || extended_context_tokens < max_context_tokens)
            throw ConfigError("context token limits inconsistent");
        fusion_dims.validate();
        if (fusion_dims.d != feature_dim_text)
            throw ConfigError("fusion_dims.d must equal feature_dim_text");
    }
};

// Auditable per-sample record of every stage decision and provider call.
struct PipelineTrace {
    std::string item_id;
    std::uint64_t seed = 0;
    std::vector<StageDecision> decisions;
    std::vector<CallRecord> provider_calls;
    double prediction = 0.0;
    int verdict = 0;
    std::vector<std::string> flags;
    std::optional<int> label;        // passthrough when present on the item
    bool errored = false;
    std::string error;

    // filled by the engine; duplicated here so a trace is self-describing
    std::vector<int> bank_masks;     // [m_t, m_H, m_R, m_v]
    ClaimSet claims;                 // final claim set handed to alignment/fusion
    EvidenceBundle evidence;
    Vec fusion_alpha;                // attention weights over the four branches
    Vec fusion_mu;                   // per-branch reliabilities

    std::int64_t total_tokens_in() const {
        std::int64_t s = 0;
        for (const auto& c : provider_calls) s += c.tokens_in;
        return s;
    }
    std::int64_t total_tokens_out() const {
        std::int64_t s = 0;
        for (const auto& c : provider_calls) s += c.tokens_out;
        return s;
    }
    std::int64_t total_wall_ms() const {
        std::int64_t s = 0;
        for (const auto& c : provider_calls) s += c.wall_ms;
        return s;
    }
    bool has_flag(const std::string& f) const {
        for (const auto& x : flags)
            if (x == f) return true;
        return false;
    }
    bool forensics_ran() const {
        for (const auto& d : decisions)
            if (d.stage == Stage::Forensics) return true;
        return false;
    }
    bool skipped_forensics() const {
        for (const auto& d : decisions)
            if (d.stage == Stage::AlignmentGate && d.action == StageAction::SkipForensics) return true;
        return false;
    }
};

}  // namespace diver
