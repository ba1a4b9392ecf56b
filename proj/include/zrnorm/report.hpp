#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "zrnorm/abx.hpp"
#include "zrnorm/cluster_metrics.hpp"
#include "zrnorm/corpus_io.hpp"
#include "zrnorm/forest.hpp"
#include "zrnorm/kmeans.hpp"
#include "zrnorm/lm_tasks.hpp"
#include "zrnorm/probe.hpp"
#include "zrnorm/verify.hpp"

namespace zrnorm {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view toolkit_name = "zrnorm";
inline constexpr std::string_view toolkit_version = "0.1.0";

inline Json to_json(const VerifyReport& r) {
    return {{"eer", r.eer},           {"eer_threshold", r.eer_threshold}, {"accuracy", r.accuracy},
            {"n_trials", r.n_trials}, {"n_tests", r.n_tests},             {"n_speakers", r.n_speakers},
            {"n_enroll", r.n_enroll}, {"seed", r.seed}};
}

inline Json to_json(const ClusterMetricsReport& r) {
    return {{"ari", r.ari},           {"ami", r.ami},
            {"homogeneity", r.homogeneity}, {"completeness", r.completeness},
            {"n_frames", r.n_frames}, {"n_clusters", r.n_clusters},
            {"n_classes", r.n_classes}};
}

inline Json to_json(const AbxReport& r, bool with_cells = false) {
    Json j{{"mode", to_string(r.mode)},   {"error_rate", r.error_rate}, {"n_pairs", r.n_pairs},
           {"n_cells", r.n_cells},        {"n_skipped_cells", r.n_skipped_cells},
           {"n_triples", r.n_triples},    {"max_x", r.max_x},           {"seed", r.seed}};
    if (with_cells) {
        Json cells = Json::array();
        for (const auto& c : r.cells)
            cells.push_back({{"a", c.triphone_a}, {"b", c.triphone_b}, {"speaker_ab", c.speaker_ab},
                             {"speaker_x", c.speaker_x}, {"error", c.error}, {"n_triples", c.n_triples}});
        j["cells"] = std::move(cells);
    }
    return j;
}

inline Json to_json(const ProbeResult& r) {
    return {{"accuracy", r.accuracy}, {"run_accuracies", r.run_accuracies}, {"run_seeds", r.run_seeds}};
}

inline Json to_json(const ProbeConfig& c) {
    return {{"kind", to_string(c.kind)},       {"hidden_units", c.hidden_units}, {"epochs", c.epochs},
            {"batch_size", c.batch_size},      {"learning_rate", c.learning_rate}, {"seed", c.seed},
            {"n_runs", c.n_runs}};
}

inline Json to_json(const ForestConfig& c) {
    return {{"n_trees", c.n_trees},
            {"max_depth", c.max_depth},
            {"features_per_split", c.features_per_split},
            {"min_samples_leaf", c.min_samples_leaf},
            {"bootstrap", c.bootstrap},
            {"seed", c.seed}};
}

inline Json to_json(const ImportanceRanking& r) { return {{"importance", r.importance}, {"order", r.order}}; }

inline Json to_json(const PairsReport& r) {
    return {{"accuracy", r.accuracy}, {"n_pairs", r.n_pairs}, {"length_normalized", r.length_normalized}};
}

inline Json to_json(const SimiReport& r) {
    return {{"spearman", r.spearman}, {"n_items", r.n_items}, {"pooling", to_string(r.pooling)}, {"skipped", r.skipped}};
}

inline Json to_json(const KMeansResult& r) {
    return {{"k", r.codebook.k()},
            {"seed", r.codebook.seed},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"final_inertia", r.inertia_history.empty() ? 0.0 : r.inertia_history.back()},
            {"standardized_input", r.codebook.standardized_input}};
}

/// Pretty-printed with a trailing newline; byte-identical for identical values.
inline void write_json(const Json& j, const std::filesystem::path& p) {
    auto out = detail::open_out(p);
    out << j.dump(2) << '\n';
    if (!out) throw FormatError(FormatError::Kind::io, "cannot write '" + p.string() + "'");
}

inline Json read_json(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, p.string() + ": " + e.what());
    }
}

} // namespace zrnorm
