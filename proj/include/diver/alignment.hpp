#pragma once

#include <string>
#include <utility>
#include <vector>

#include "diver/gateway.hpp"
#include "diver/types.hpp"

namespace diver {

enum class GateAction { ProceedToForensics, SkipForensics };

// Eq.-level gate semantics: equality goes to Skip.
inline GateAction decide_gate_action(double s_inter, double beta) {
    return s_inter >= beta ? GateAction::SkipForensics : GateAction::ProceedToForensics;
}

struct AlignmentReport {
    double s_inter = 0.0;
    std::vector<std::pair<int, double>> per_claim;   // (claim index, score)
    Aggregation aggregation = Aggregation::Mean;
};

// Embeds each claim and the image in the joint space and reduces per-claim
// dot products with the chosen aggregation.
inline AlignmentReport alignment_score(const ClaimSet& claims, const std::string& image,
                                       const ProviderGateway& gw, Aggregation aggregation) {
    if (claims.claims.empty()) throw DataError("alignment_score: empty claim set");
    AlignmentReport report;
    report.aggregation = aggregation;

    const EmbeddingVector img = gw.joint_image(image, "align_image");
    for (std::size_t i = 0; i < claims.claims.size(); ++i) {
        const EmbeddingVector c = gw.joint_text(claims.claims[i].statement, "align_claim");
        report.per_claim.emplace_back(static_cast<int>(i), dot(c.values, img.values));
    }

    if (aggregation == Aggregation::Mean) {
        double s = 0.0;
        for (const auto& [_, v] : report.per_claim) s += v;
        report.s_inter = s / static_cast<double>(report.per_claim.size());
    } else {
        double m = report.per_claim.front().second;
        for (const auto& [_, v] : report.per_claim) m = std::min(m, v);
        report.s_inter = m;
    }
    return report;
}

}  // namespace diver
