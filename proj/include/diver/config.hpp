#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "diver/types.hpp"

namespace diver {

namespace detail {
inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace detail

// Key-value pairs from a plain-text config file: `key = value`, '#' comments.
inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string val = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    auto as_double = [&] {
        std::istringstream ss(value);
        double v;
        if (!(ss >> v)) throw DataError("config: bad number for " + key + ": " + value);
        return v;
    };
    auto as_int = [&] {
        std::istringstream ss(value);
        long long v;
        if (!(ss >> v)) throw DataError("config: bad integer for " + key + ": " + value);
        return v;
    };
    if (key == "beta") cfg.beta = as_double();
    else if (key == "tau") cfg.tau = static_cast<int>(as_int());
    else if (key == "gamma") cfg.gamma = as_double();
    else if (key == "max_claims") cfg.max_claims = static_cast<int>(as_int());
    else if (key == "llm_temperature") cfg.llm_temperature = as_double();
    else if (key == "max_context_tokens") cfg.max_context_tokens = static_cast<int>(as_int());
    else if (key == "extended_context_tokens") cfg.extended_context_tokens = static_cast<int>(as_int());
    else if (key == "max_rollbacks") cfg.max_rollbacks = static_cast<int>(as_int());
    else if (key == "feature_dim_text") cfg.feature_dim_text = static_cast<int>(as_int());
    else if (key == "feature_dim_joint") cfg.feature_dim_joint = static_cast<int>(as_int());
    else if (key == "fusion_d") cfg.fusion_dims.d = static_cast<int>(as_int());
    else if (key == "fusion_d_p") cfg.fusion_dims.d_p = static_cast<int>(as_int());
    else if (key == "fusion_d_h") cfg.fusion_dims.d_h = static_cast<int>(as_int());
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
    else if (key == "alignment_aggregation") {
        if (value == "mean") cfg.alignment_aggregation = Aggregation::Mean;
        else if (value == "min") cfg.alignment_aggregation = Aggregation::Min;
        else throw DataError("config: alignment_aggregation must be mean or min");
    } else {
        throw DataError("config: unknown key: " + key);
    }
}

// CLI flags are applied by the caller on top of the file values.
inline PipelineConfig load_config(const std::string& path) {
    PipelineConfig cfg;
    const auto kv = read_kv_file(path);
    for (const auto& [k, v] : kv) apply_config_entry(cfg, k, v);
    // fusion input width follows the text feature dim unless pinned explicitly
    if (!kv.count("fusion_d")) cfg.fusion_dims.d = cfg.feature_dim_text;
    return cfg;
}

}  // namespace diver
