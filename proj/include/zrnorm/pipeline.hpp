#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "zrnorm/abx.hpp"
#include "zrnorm/cluster_metrics.hpp"
#include "zrnorm/corpus_io.hpp"
#include "zrnorm/forest.hpp"
#include "zrnorm/kmeans.hpp"
#include "zrnorm/lm_tasks.hpp"
#include "zrnorm/ngram.hpp"
#include "zrnorm/normalize.hpp"
#include "zrnorm/probe.hpp"
#include "zrnorm/report.hpp"
#include "zrnorm/synthetic.hpp"
#include "zrnorm/units.hpp"
#include "zrnorm/verify.hpp"

namespace zrnorm {

/// Invalid or inconsistent pipeline configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; carries the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Everything a pipeline run depends on. Loaded from an INI file with one section per stage;
/// absent keys keep the defaults below, unknown keys are rejected.
struct PipelineConfig {
    // [data]
    std::string source = "synthetic"; // synthetic | files
    std::string archive, manifest, alignment;
    std::string task_archive, task_manifest;
    std::string lexical_pairs, syntactic_pairs, similarity;
    std::string output_dir = "zrnorm_out";

    // [synthetic]
    SynthConfig synth;
    SynthTaskConfig synth_tasks;

    // [normalize]
    bool normalize = true;
    std::string normalize_mode = "utterance"; // utterance | speaker

    // [verify]
    bool verify = true;
    std::size_t n_enroll = 5;
    std::uint64_t verify_seed = 1;

    // [probe]
    bool probe = true;
    std::vector<std::string> probe_tasks{"phone", "speaker", "gender"};
    std::string probe_kind = "linear";
    ProbeConfig probe_cfg = [] {
        ProbeConfig c;
        c.seed = 1;
        return c;
    }();
    std::size_t test_utterances_per_speaker = 2;
    bool probe_units = true;

    // [forest]
    bool forest = false;
    ForestConfig forest_cfg = [] {
        ForestConfig c;
        c.seed = 1;
        return c;
    }();
    std::size_t forest_max_frames = 5000;
    std::size_t n_keep = 0; // 0 keeps every dimension

    // [kmeans]
    KMeansOptions kmeans = [] {
        KMeansOptions k;
        k.seed = 1;
        return k;
    }();
    std::size_t kmeans_max_frames = 0; // 0 uses every frame

    // [abx]
    bool abx = true;
    std::vector<std::string> abx_modes{"within", "across"};
    std::vector<std::string> abx_representations{"features", "units"};
    std::size_t max_x = 10;
    std::uint64_t abx_seed = 1;

    // [lm]
    bool lm = true;
    std::size_t lm_order = 3;
    double lm_discount = 0.75;
    bool length_normalized = false;
    std::string pooling = "mean";

    template <typename V>
    void visit(V&& v) {
        v("data", "source", source);
        v("data", "archive", archive);
        v("data", "manifest", manifest);
        v("data", "alignment", alignment);
        v("data", "task_archive", task_archive);
        v("data", "task_manifest", task_manifest);
        v("data", "lexical_pairs", lexical_pairs);
        v("data", "syntactic_pairs", syntactic_pairs);
        v("data", "similarity", similarity);
        v("data", "output_dir", output_dir);

        v("synthetic", "seed", synth.seed);
        v("synthetic", "n_speakers", synth.n_speakers);
        v("synthetic", "n_phones", synth.n_phones);
        v("synthetic", "dim", synth.dim);
        v("synthetic", "utterances_per_speaker", synth.utterances_per_speaker);
        v("synthetic", "segments_per_utterance", synth.segments_per_utterance);
        v("synthetic", "frames_min", synth.frames_per_segment.lo);
        v("synthetic", "frames_max", synth.frames_per_segment.hi);
        v("synthetic", "sigma_speaker", synth.sigma_speaker);
        v("synthetic", "sigma_phone", synth.sigma_phone);
        v("synthetic", "sigma_gender", synth.sigma_gender);
        v("synthetic", "sigma_noise", synth.sigma_noise);
        v("synthetic", "n_words", synth.n_words);
        v("synthetic", "word_length_min", synth.word_length.lo);
        v("synthetic", "word_length_max", synth.word_length.hi);
        v("synthetic", "successors_per_word", synth.successors_per_word);
        v("synthetic", "n_lexical", synth_tasks.n_lexical);
        v("synthetic", "n_syntactic", synth_tasks.n_syntactic);
        v("synthetic", "n_similarity", synth_tasks.n_similarity);

        v("normalize", "enabled", normalize);
        v("normalize", "mode", normalize_mode);

        v("verify", "enabled", verify);
        v("verify", "n_enroll", n_enroll);
        v("verify", "seed", verify_seed);

        v("probe", "enabled", probe);
        v("probe", "tasks", probe_tasks);
        v("probe", "kind", probe_kind);
        v("probe", "hidden_units", probe_cfg.hidden_units);
        v("probe", "epochs", probe_cfg.epochs);
        v("probe", "batch_size", probe_cfg.batch_size);
        v("probe", "learning_rate", probe_cfg.learning_rate);
        v("probe", "n_runs", probe_cfg.n_runs);
        v("probe", "seed", probe_cfg.seed);
        v("probe", "test_utterances_per_speaker", test_utterances_per_speaker);
        v("probe", "on_units", probe_units);

        v("forest", "enabled", forest);
        v("forest", "n_trees", forest_cfg.n_trees);
        v("forest", "max_depth", forest_cfg.max_depth);
        v("forest", "features_per_split", forest_cfg.features_per_split);
        v("forest", "min_samples_leaf", forest_cfg.min_samples_leaf);
        v("forest", "bootstrap", forest_cfg.bootstrap);
        v("forest", "seed", forest_cfg.seed);
        v("forest", "max_frames", forest_max_frames);
        v("forest", "n_keep", n_keep);

        v("kmeans", "k", kmeans.k);
        v("kmeans", "seed", kmeans.seed);
        v("kmeans", "max_iters", kmeans.max_iters);
        v("kmeans", "tol", kmeans.tol);
        v("kmeans", "max_frames", kmeans_max_frames);

        v("abx", "enabled", abx);
        v("abx", "modes", abx_modes);
        v("abx", "representations", abx_representations);
        v("abx", "max_x", max_x);
        v("abx", "seed", abx_seed);

        v("lm", "enabled", lm);
        v("lm", "order", lm_order);
        v("lm", "discount", lm_discount);
        v("lm", "length_normalized", length_normalized);
        v("lm", "pooling", pooling);
    }
    template <typename V>
    void visit(V&& v) const {
        const_cast<PipelineConfig*>(this)->visit(std::forward<V>(v));
    }

    /// Throws ConfigError on any invalid value or missing input path.
    void validate() const;
};

namespace pipeline_detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string join_list(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

template <typename T>
void parse_value(const std::string& key, const std::string& raw, T& out) {
    const std::string s = trim(raw);
    auto bad = [&](const char* what) { return ConfigError("config key '" + key + "': expected " + what + ", got '" + s + "'"); };
    if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "1" || s == "yes" || s == "on") out = true;
        else if (s == "false" || s == "0" || s == "no" || s == "off") out = false;
        else throw bad("a boolean");
    } else if constexpr (std::is_integral_v<T>) {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) throw bad("a non-negative integer");
        try {
            out = static_cast<T>(std::stoull(s));
        } catch (const std::exception&) {
            throw bad("a non-negative integer");
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        std::size_t used = 0;
        try {
            out = std::stod(s, &used);
        } catch (const std::exception&) {
            throw bad("a number");
        }
        if (used != s.size()) throw bad("a number");
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
        out = split_list(s);
    } else {
        out = s;
    }
}

template <typename T>
std::string format_value(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_arithmetic_v<T>) {
        return Json(v).dump();
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
        return join_list(v);
    } else {
        return v;
    }
}

struct IniReader {
    const boost::property_tree::ptree& tree;
    std::set<std::string> known;

    template <typename T>
    void operator()(const char* section, const char* key, T& value) {
        const std::string path = std::string(section) + "." + key;
        known.insert(path);
        if (auto node = tree.get_child_optional(boost::property_tree::ptree::path_type(path, '.')))
            parse_value(path, node->data(), value);
    }
};

struct JsonWriter {
    Json& out;
    template <typename T>
    void operator()(const char* section, const char* key, const T& value) {
        if constexpr (std::is_same_v<T, std::vector<std::string>>) out[section][key] = value;
        else if constexpr (std::is_arithmetic_v<T>) out[section][key] = value;
        else out[section][key] = std::string(value);
    }
};

struct IniWriter {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    std::vector<std::string> order;
    template <typename T>
    void operator()(const char* section, const char* key, const T& value) {
        if (!sections.contains(section)) order.push_back(section);
        sections[section].emplace_back(key, format_value(value));
    }
};

} // namespace pipeline_detail

/// Parses INI text. Relative input paths are resolved against `base_dir` when given.
inline PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    PipelineConfig cfg;
    pipeline_detail::IniReader reader{tree, {}};
    cfg.visit(reader);
    for (const auto& [section, node] : tree) {
        if (node.empty()) throw ConfigError("config key '" + section + "' must be inside a section");
        for (const auto& [key, value] : node)
            if (!reader.known.contains(section + "." + key))
                throw ConfigError("unknown config key '" + section + "." + key + "'");
    }
    if (!base_dir.empty()) {
        for (std::string* p : {&cfg.archive, &cfg.manifest, &cfg.alignment, &cfg.task_archive, &cfg.task_manifest,
                               &cfg.lexical_pairs, &cfg.syntactic_pairs, &cfg.similarity, &cfg.output_dir})
            if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base_dir / *p).lexically_normal().string();
    }
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open config file '" + p.string() + "'");
    return parse_config(in, p.parent_path());
}

inline std::string config_to_ini(const PipelineConfig& cfg) {
    pipeline_detail::IniWriter w;
    cfg.visit(w);
    std::ostringstream out;
    for (std::size_t i = 0; i < w.order.size(); ++i) {
        out << (i ? "\n" : "") << '[' << w.order[i] << "]\n";
        for (const auto& [k, v] : w.sections[w.order[i]]) out << k << " = " << v << '\n';
    }
    return out.str();
}

inline Json config_to_json(const PipelineConfig& cfg) {
    Json j = Json::object();
    pipeline_detail::JsonWriter w{j};
    cfg.visit(w);
    return j;
}

inline void PipelineConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    auto one_of = [&](const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
        for (const char* a : allowed)
            if (v == a) return;
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        fail("config key '" + key + "': '" + v + "' is not one of {" + list + "}");
    };
    auto exists = [&](const std::string& key, const std::string& p, bool required) {
        if (p.empty()) {
            if (required) fail("config key '" + key + "' is required");
            return;
        }
        if (!std::filesystem::exists(p)) fail("config key '" + key + "': path '" + p + "' does not exist");
    };
    one_of("data.source", source, {"synthetic", "files"});
    one_of("normalize.mode", normalize_mode, {"utterance", "speaker"});
    one_of("probe.kind", probe_kind, {"linear", "mlp"});
    one_of("lm.pooling", pooling, {"min", "mean", "max"});
    for (const auto& t : probe_tasks) one_of("probe.tasks", t, {"phone", "speaker", "gender"});
    for (const auto& m : abx_modes) one_of("abx.modes", m, {"within", "across"});
    for (const auto& r : abx_representations) one_of("abx.representations", r, {"features", "units"});
    if (output_dir.empty()) fail("config key 'data.output_dir' must not be empty");
    if (source == "files") {
        exists("data.archive", archive, true);
        exists("data.manifest", manifest, true);
        exists("data.alignment", alignment, true);
        exists("data.task_archive", task_archive, false);
        exists("data.task_manifest", task_manifest, false);
        exists("data.lexical_pairs", lexical_pairs, false);
        exists("data.syntactic_pairs", syntactic_pairs, false);
        exists("data.similarity", similarity, false);
        if (!task_archive.empty() && normalize && normalize_mode == "speaker" && task_manifest.empty())
            fail("config key 'data.task_manifest' is required for speaker normalization of the task archive");
    }
    try {
        synth.validate();
        ProbeConfig pc = probe_cfg;
        pc.kind = probe_kind == "mlp" ? ProbeKind::mlp : ProbeKind::linear;
        pc.validate();
    } catch (const InvalidArgument& e) {
        fail(e.what());
    }
    if (n_enroll == 0) fail("config key 'verify.n_enroll' must be positive");
    if (test_utterances_per_speaker == 0) fail("config key 'probe.test_utterances_per_speaker' must be positive");
    if (kmeans.k == 0) fail("config key 'kmeans.k' must be positive");
    if (kmeans.max_iters == 0) fail("config key 'kmeans.max_iters' must be positive");
    if (!(kmeans.tol >= 0.0)) fail("config key 'kmeans.tol' must be non-negative");
    if (max_x == 0) fail("config key 'abx.max_x' must be positive");
    if (lm_order == 0) fail("config key 'lm.order' must be positive");
    if (!(lm_discount > 0.0 && lm_discount <= 1.0)) fail("config key 'lm.discount' must be in (0, 1]");
    if (forest_cfg.n_trees == 0 || forest_cfg.max_depth == 0 || forest_cfg.min_samples_leaf == 0)
        fail("config keys 'forest.n_trees', 'forest.max_depth' and 'forest.min_samples_leaf' must be positive");
    if (forest_max_frames == 0) fail("config key 'forest.max_frames' must be positive");
}

/// Result of one pipeline run.
///
/// `metrics` is the deterministic document written to metrics.json: toolkit identity, the config
/// echo (without the output directory) and every stage's metrics. `report` adds the output
/// directory, worker count, wall-clock timings and status; it is written to run_report.json.
struct RunReport {
    Json metrics;
    Json report;
};

namespace pipeline_detail {

using Clock = std::chrono::steady_clock;

struct Corpus {
    FeatureArchive archive{1};
    Manifest manifest;
    Alignment alignment;
    std::optional<FeatureArchive> tasks;
    std::optional<Manifest> task_manifest;
    std::vector<TaskPair> lexical, syntactic;
    std::vector<SimiItem> similarity;
};

/// Rows of `frames` chosen for fitting: all of them, or a seeded subset of `cap` rows kept in
/// corpus order.
inline Matrix gather_frames(const FeatureArchive& a, std::size_t cap, std::uint64_t seed,
                            const std::set<std::string>* only = nullptr) {
    std::vector<const Matrix*> parts;
    for (const auto& u : a.utterances())
        if (!only || only->contains(u.id)) parts.push_back(&u.frames);
    Matrix all = vstack(parts);
    if (cap == 0 || cap >= all.rows()) return all;
    std::vector<std::size_t> idx(all.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_rng(seed, {0x6361705FULL});
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    Matrix out(cap, all.cols());
    for (std::size_t i = 0; i < cap; ++i)
        std::copy(all.row(idx[i]).begin(), all.row(idx[i]).end(), out.row(i).begin());
    return out;
}

template <typename T>
std::map<T, std::uint32_t> intern(const std::set<T>& values) {
    std::map<T, std::uint32_t> out;
    for (const auto& v : values) out.emplace(v, static_cast<std::uint32_t>(out.size()));
    return out;
}

/// Frames with speaker labels for forest training: every manifest utterance's frames, or a
/// seeded subset of `cap` frames kept in corpus order.
struct SpeakerFrames {
    Matrix x;
    std::vector<std::uint32_t> y;
    std::size_t n_speakers = 0;
};

inline SpeakerFrames speaker_frames(const FeatureArchive& a, const Manifest& m, std::size_t cap, std::uint64_t seed) {
    std::set<std::string> speakers;
    for (const auto& r : m.records()) speakers.insert(r.speaker_id);
    const auto ids = intern(speakers);
    std::vector<std::pair<std::size_t, std::size_t>> rows;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (m.find(a[i].id))
            for (std::size_t r = 0; r < a[i].frames.rows(); ++r) rows.emplace_back(i, r);
    if (cap > 0 && rows.size() > cap) {
        Rng rng = make_rng(seed, {0x666F72ULL});
        shuffle(rows.begin(), rows.end(), rng);
        rows.resize(cap);
        std::sort(rows.begin(), rows.end());
    }
    SpeakerFrames out{Matrix(rows.size(), a.dim()), std::vector<std::uint32_t>(rows.size()), speakers.size()};
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto [i, r] = rows[k];
        std::copy(a[i].frames.row(r).begin(), a[i].frames.row(r).end(), out.x.row(k).begin());
        out.y[k] = ids.at(m.at(a[i].id).speaker_id);
    }
    return out;
}

/// Frame-level probe data: each frame's utterance, row and labels, split by utterance.
struct ProbeData {
    struct Frame {
        std::size_t utt = 0; // index into archive utterances
        std::size_t row = 0;
        std::uint32_t phone = 0, speaker = 0, gender = 0;
    };
    std::vector<Frame> train, test;
    std::size_t n_phones = 0, n_speakers = 0;
};

/// Holds out the last `n_test` utterances (manifest order) of every speaker.
inline ProbeData probe_split(const FeatureArchive& a, const Manifest& m, const Alignment& ali, std::size_t n_test,
                             bool need_phones) {
    std::set<std::string> phones;
    for (const auto& u : ali.utterances())
        for (const auto& s : u.segments) phones.insert(s.phone);
    const auto phone_id = intern(phones);
    const auto speakers = m.speakers();
    const auto speaker_id = intern(std::set<std::string>(speakers.begin(), speakers.end()));

    std::set<std::string> test;
    for (const auto& [spk, utts] : m.utterances_by_speaker()) {
        std::vector<std::string> present;
        for (const auto& u : utts)
            if (a.find(u)) present.push_back(u);
        if (present.size() <= n_test)
            throw InvalidArgument("probe: speaker '" + spk + "' has " + std::to_string(present.size()) +
                                  " utterances, needs more than test_utterances_per_speaker=" + std::to_string(n_test));
        test.insert(present.end() - static_cast<std::ptrdiff_t>(n_test), present.end());
    }

    ProbeData d;
    d.n_phones = phones.size();
    d.n_speakers = speakers.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& u = a[i];
        const auto* rec = m.find(u.id);
        if (!rec) continue;
        std::vector<std::string> labels;
        if (need_phones) {
            labels = ali.at(u.id).frame_labels();
            if (labels.size() != u.frames.rows())
                throw AlignmentError(AlignmentError::Kind::length_mismatch, "probe: alignment of '" + u.id + "' does not cover its frames");
        }
        auto& dst = test.contains(u.id) ? d.test : d.train;
        for (std::size_t r = 0; r < u.frames.rows(); ++r)
            dst.push_back({i, r, need_phones ? phone_id.at(labels[r]) : 0u, speaker_id.at(rec->speaker_id),
                           rec->gender == Gender::F ? 0u : 1u});
    }
    return d;
}

inline Matrix probe_features(const FeatureArchive& a, const std::vector<ProbeData::Frame>& frames) {
    Matrix x(frames.size(), a.dim());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto src = a[frames[i].utt].frames.row(frames[i].row);
        std::copy(src.begin(), src.end(), x.row(i).begin());
    }
    return x;
}

inline std::vector<std::uint32_t> probe_labels(const std::vector<ProbeData::Frame>& frames, const std::string& task) {
    std::vector<std::uint32_t> y(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        y[i] = task == "phone" ? frames[i].phone : task == "speaker" ? frames[i].speaker : frames[i].gender;
    return y;
}

inline std::size_t probe_classes(const ProbeData& d, const std::string& task) {
    return task == "phone" ? d.n_phones : task == "speaker" ? d.n_speakers : 2;
}

inline FeatureArchive normalize_archive(const FeatureArchive& a, const Manifest* m, const std::string& mode) {
    if (mode == "speaker") {
        if (!m) throw InvalidArgument("speaker normalization needs a manifest");
        return standardize_per_speaker(a, *m);
    }
    return standardize_per_utterance(a);
}

inline std::string fixed(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

} // namespace pipeline_detail

/// Headline metrics of a run, as (column, value) pairs in a fixed order. Missing metrics are empty.
inline std::vector<std::pair<std::string, std::string>> summary_row(const Json& metrics) {
    std::vector<std::pair<std::string, std::string>> row;
    auto get = [&](const std::string& name, const std::string& pointer) {
        const auto ptr = Json::json_pointer(pointer);
        row.emplace_back(name, metrics.contains(ptr) ? pipeline_detail::fixed(metrics.at(ptr).get<double>()) : "");
    };
    get("verify_eer", "/verify/input/eer");
    get("verify_accuracy", "/verify/input/accuracy");
    get("probe_phone", "/probe/features/phone/accuracy");
    get("probe_speaker", "/probe/features/speaker/accuracy");
    get("probe_gender", "/probe/features/gender/accuracy");
    get("probe_units_phone", "/probe/units/phone/accuracy");
    get("probe_units_speaker", "/probe/units/speaker/accuracy");
    get("abx_within_features", "/abx/features/within/error_rate");
    get("abx_across_features", "/abx/features/across/error_rate");
    get("abx_within_units", "/abx/units/within/error_rate");
    get("abx_across_units", "/abx/units/across/error_rate");
    get("ari", "/cluster_metrics/ari");
    get("ami", "/cluster_metrics/ami");
    get("homogeneity", "/cluster_metrics/homogeneity");
    get("completeness", "/cluster_metrics/completeness");
    get("lexical", "/lm/lexical/accuracy");
    get("syntactic", "/lm/syntactic/accuracy");
    get("semantic", "/lm/semantic/spearman");
    return row;
}

inline void write_csv(const std::filesystem::path& p, const std::vector<std::vector<std::pair<std::string, std::string>>>& rows) {
    auto out = detail::open_out(p);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 0) {
            for (std::size_t i = 0; i < rows[0].size(); ++i) out << (i ? "," : "") << rows[0][i].first;
            out << '\n';
        }
        for (std::size_t i = 0; i < rows[r].size(); ++i) {
            std::string v = rows[r][i].second;
            if (v.find_first_of(",\"\n") != std::string::npos) {
                std::string q = "\"";
                for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
                v = q + "\"";
            }
            out << (i ? "," : "") << v;
        }
        out << '\n';
    }
}

/// Runs every enabled stage in dependency order, writing artifacts and reports under
/// config.output_dir. Throws ConfigError for an invalid config and StageError when a stage fails;
/// artifacts written before the failure are kept and run_report.json records the failure.
inline RunReport run_pipeline(const PipelineConfig& cfg) {
    using namespace pipeline_detail;
    namespace fs = std::filesystem;
    cfg.validate();
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);

    RunReport rr;
    Json config_echo = config_to_json(cfg);
    Json echo_for_metrics = config_echo;
    echo_for_metrics["data"].erase("output_dir");
    rr.metrics = Json{{"toolkit", {{"name", toolkit_name}, {"version", toolkit_version}}}, {"config", echo_for_metrics}, {"metrics", Json::object()}};
    Json timings = Json::object();
    const auto t_start = Clock::now();

    auto write_reports = [&](const std::string& status, const std::string& failed_stage, const std::string& error) {
        rr.report = Json{{"toolkit", rr.metrics["toolkit"]},
                         {"config", config_echo},
                         {"workers", worker_count()},
                         {"status", status}};
        if (!failed_stage.empty()) {
            rr.report["failed_stage"] = failed_stage;
            rr.report["error"] = error;
        }
        rr.report["metrics"] = rr.metrics["metrics"];
        rr.report["timings_s"] = timings;
        rr.report["total_s"] = std::chrono::duration<double>(Clock::now() - t_start).count();
        write_json(rr.report, out / "run_report.json");
        if (status == "ok") {
            write_json(rr.metrics, out / "metrics.json");
            write_csv(out / "summary.csv", {summary_row(rr.metrics["metrics"])});
        }
    };
    auto stage = [&](const std::string& name, auto&& body) {
        const auto t0 = Clock::now();
        try {
            body();
        } catch (const std::exception& e) {
            timings[name] = std::chrono::duration<double>(Clock::now() - t0).count();
            write_reports("failed", name, e.what());
            throw StageError(name, e.what());
        }
        timings[name] = std::chrono::duration<double>(Clock::now() - t0).count();
    };
    auto m = [&]() -> Json& { return rr.metrics["metrics"]; };

    Corpus c;
    stage("data", [&] {
        if (cfg.source == "synthetic") {
            auto corpus = generate_synthetic(cfg.synth);
            auto tasks = generate_synthetic_tasks(cfg.synth, cfg.synth_tasks);
            const fs::path d = out / "data";
            save_archive(corpus.archive, d / "corpus.zrfa");
            write_manifest(corpus.manifest, d / "manifest.csv");
            write_alignment(corpus.alignment, d / "alignment.txt");
            save_archive(tasks.archive, d / "tasks.zrfa");
            write_manifest(tasks.manifest, d / "tasks_manifest.csv");
            write_pairs(tasks.lexical, d / "lexical.csv");
            write_pairs(tasks.syntactic, d / "syntactic.csv");
            write_simi(tasks.similarity, d / "similarity.csv");
            c.archive = std::move(corpus.archive);
            c.manifest = std::move(corpus.manifest);
            c.alignment = std::move(corpus.alignment);
            c.tasks = std::move(tasks.archive);
            c.task_manifest = std::move(tasks.manifest);
            c.lexical = std::move(tasks.lexical);
            c.syntactic = std::move(tasks.syntactic);
            c.similarity = std::move(tasks.similarity);
        } else {
            c.archive = load_archive(cfg.archive);
            c.manifest = read_manifest(fs::path(cfg.manifest));
            c.alignment = read_alignment(fs::path(cfg.alignment));
            c.manifest.validate_against(c.archive);
            c.alignment.validate_against(c.manifest);
            c.alignment.validate_against(c.archive);
            if (!cfg.task_archive.empty()) c.tasks = load_archive(cfg.task_archive);
            if (!cfg.task_manifest.empty()) c.task_manifest = read_manifest(fs::path(cfg.task_manifest));
            if (!cfg.lexical_pairs.empty()) c.lexical = read_pairs(fs::path(cfg.lexical_pairs));
            if (!cfg.syntactic_pairs.empty()) c.syntactic = read_pairs(fs::path(cfg.syntactic_pairs));
            if (!cfg.similarity.empty()) c.similarity = read_simi(fs::path(cfg.similarity));
            if (c.tasks && c.tasks->dim() != c.archive.dim())
                throw DimensionMismatch(c.archive.dim(), c.tasks->dim(), "task archive");
        }
        m()["data"] = {{"source", cfg.source},
                       {"n_utterances", c.archive.size()},
                       {"n_frames", c.archive.total_frames()},
                       {"n_speakers", c.manifest.speakers().size()},
                       {"dim", c.archive.dim()},
                       {"n_task_utterances", c.tasks ? c.tasks->size() : 0},
                       {"normalization_in", to_string(c.archive.provenance.normalization)}};
    });

    if (cfg.verify)
        stage("verify", [&] { m()["verify"]["input"] = to_json(verify_speakers(c.archive, c.manifest, cfg.n_enroll, cfg.verify_seed)); });

    if (cfg.normalize) {
        stage("normalize", [&] {
            c.archive = normalize_archive(c.archive, &c.manifest, cfg.normalize_mode);
            if (c.tasks) c.tasks = normalize_archive(*c.tasks, c.task_manifest ? &*c.task_manifest : nullptr, cfg.normalize_mode);
            save_archive(c.archive, out / "features.zrfa");
            m()["normalize"] = {{"mode", cfg.normalize_mode}};
            if (cfg.verify)
                m()["verify"]["normalized"] = to_json(verify_speakers(c.archive, c.manifest, cfg.n_enroll, cfg.verify_seed));
        });
    }

    if (cfg.forest || cfg.n_keep > 0) {
        stage("forest", [&] {
            const auto sf = speaker_frames(c.archive, c.manifest, cfg.forest_max_frames, cfg.forest_cfg.seed);
            const auto ranking = forest_importance(sf.x, sf.y, sf.n_speakers, cfg.forest_cfg);
            write_json(to_json(ranking), out / "feature_rank.json");
            m()["forest"] = {{"n_frames", sf.x.rows()}, {"ranking", to_json(ranking)}};
            if (cfg.n_keep > 0) {
                c.archive = prune(c.archive, ranking, cfg.n_keep);
                if (c.tasks) c.tasks = prune(*c.tasks, ranking, cfg.n_keep);
                save_archive(c.archive, out / "features_pruned.zrfa");
                m()["forest"]["kept_dimensions"] = kept_dimensions(ranking, cfg.n_keep);
            }
        });
    }

    ProbeConfig pcfg = cfg.probe_cfg;
    pcfg.kind = cfg.probe_kind == "mlp" ? ProbeKind::mlp : ProbeKind::linear;
    const bool need_phones = std::find(cfg.probe_tasks.begin(), cfg.probe_tasks.end(), "phone") != cfg.probe_tasks.end();
    ProbeData pdata;
    if (cfg.probe) {
        stage("probe_features", [&] {
            pdata = probe_split(c.archive, c.manifest, c.alignment, cfg.test_utterances_per_speaker, need_phones);
            const Matrix trx = probe_features(c.archive, pdata.train), tex = probe_features(c.archive, pdata.test);
            Json& j = m()["probe"]["features"];
            for (const auto& task : cfg.probe_tasks)
                j[task] = to_json(run_probe(trx, probe_labels(pdata.train, task), tex, probe_labels(pdata.test, task),
                                            probe_classes(pdata, task), pcfg));
            m()["probe"]["config"] = to_json(pcfg);
            m()["probe"]["n_train_frames"] = pdata.train.size();
            m()["probe"]["n_test_frames"] = pdata.test.size();
        });
    }

    KMeansResult km;
    stage("kmeans", [&] {
        KMeansOptions opt = cfg.kmeans;
        const Matrix x = gather_frames(c.archive, cfg.kmeans_max_frames, opt.seed);
        km = kmeans_fit(x, opt);
        km.codebook.standardized_input = c.archive.provenance.standardized();
        write_codebook(km.codebook, out / "codebook.zrcb");
        m()["kmeans"] = to_json(km);
        m()["kmeans"]["n_train_frames"] = x.rows();
    });

    std::vector<UnitSequence> units, task_units;
    stage("quantize", [&] {
        units = quantize(c.archive, km.codebook);
        write_units(units, out / "units.txt");
        if (c.tasks) {
            task_units = quantize(*c.tasks, km.codebook);
            write_units(task_units, out / "task_units.txt");
        }
    });

    if (cfg.probe && cfg.probe_units) {
        stage("probe_units", [&] {
            std::vector<const std::vector<std::uint32_t>*> by_utt(c.archive.size());
            for (std::size_t i = 0; i < units.size(); ++i) by_utt[i] = &units[i].units;
            auto codes = [&](const std::vector<ProbeData::Frame>& frames) {
                std::vector<std::uint32_t> u(frames.size());
                for (std::size_t i = 0; i < frames.size(); ++i) u[i] = (*by_utt[frames[i].utt])[frames[i].row];
                return u;
            };
            const auto tru = codes(pdata.train), teu = codes(pdata.test);
            Json& j = m()["probe"]["units"];
            for (const auto& task : cfg.probe_tasks)
                j[task] = to_json(probe_on_units(tru, probe_labels(pdata.train, task), teu, probe_labels(pdata.test, task),
                                                 km.codebook.k(), probe_classes(pdata, task), pcfg));
        });
    }

    stage("cluster_metrics", [&] {
        const auto pairs = frame_pairs(units, c.alignment, &default_silence_labels());
        m()["cluster_metrics"] = to_json(clustering_metrics(pairs));
    });

    if (cfg.abx) {
        stage("abx", [&] {
            const auto items = extract_items(c.alignment, c.manifest);
            std::optional<FeatureArchive> one_hot_units;
            for (const auto& rep : cfg.abx_representations) {
                const FeatureArchive* feats = &c.archive;
                if (rep == "units") {
                    if (!one_hot_units) one_hot_units = one_hot_archive(units, km.codebook.k(), c.archive.frame_period_us());
                    feats = &*one_hot_units;
                }
                for (const auto& mode : cfg.abx_modes) {
                    AbxOptions opt;
                    opt.mode = mode == "within" ? AbxMode::within : AbxMode::across;
                    opt.max_x = cfg.max_x;
                    opt.seed = cfg.abx_seed;
                    m()["abx"][rep][mode] = to_json(abx_score(items, *feats, opt));
                }
            }
        });
    }

    if (cfg.lm) {
        stage("lm", [&] {
            std::vector<std::vector<std::uint32_t>> corpus;
            std::size_t n_tokens = 0;
            for (const auto& u : units) {
                corpus.push_back(u.units);
                n_tokens += u.units.size();
            }
            const auto lm = NgramLm::train(corpus, km.codebook.k(), cfg.lm_order, cfg.lm_discount);
            write_json(Json(lm.to_json()), out / "lm.json");
            double total = 0.0;
            std::size_t scored = 0;
            for (const auto& s : corpus) {
                total += sequence_logprob(lm, s);
                scored += s.size() + 1;
            }
            Json& j = m()["lm"];
            j["train"] = {{"order", cfg.lm_order}, {"discount", cfg.lm_discount}, {"n_sequences", corpus.size()},
                          {"n_tokens", n_tokens}, {"mean_token_logprob", total / static_cast<double>(scored)}};

            UnitIndex index = index_units(units);
            for (const auto& u : task_units) index[u.utt_id] = u.units;
            if (!c.lexical.empty()) j["lexical"] = to_json(pairwise_accuracy(lm, c.lexical, index, cfg.length_normalized));
            if (!c.syntactic.empty())
                j["syntactic"] = to_json(pairwise_accuracy(lm, c.syntactic, index, cfg.length_normalized));
            if (!c.similarity.empty()) {
                std::map<std::string, Matrix, std::less<>> vectors;
                for (const auto& [id, seq] : index) vectors.emplace(id, one_hot(seq, km.codebook.k()));
                const TokenVectorSource source = [&](std::string_view id) -> const Matrix* {
                    auto it = vectors.find(id);
                    return it == vectors.end() ? nullptr : &it->second;
                };
                j["semantic"] = to_json(semantic_similarity(source, c.similarity, parse_pooling(cfg.pooling)));
            }
        });
    }

    write_reports("ok", "", "");
    return rr;
}

struct SweepRow {
    std::string value;
    bool ok = false;
    std::string error;
    Json metrics; // empty on failure
};

/// One pipeline run per value of `parameter` ("K" or "n_keep"), each in its own subdirectory
/// of config.output_dir. Failed values are recorded and the sweep continues. Writes sweep.json
/// and sweep.csv.
inline std::vector<SweepRow> sweep(const PipelineConfig& base, const std::string& parameter,
                                   const std::vector<std::size_t>& values) {
    if (parameter != "K" && parameter != "n_keep")
        throw ConfigError("sweep parameter must be 'K' or 'n_keep', got '" + parameter + "'");
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    base.validate();
    namespace fs = std::filesystem;
    std::vector<SweepRow> rows;
    for (std::size_t v : values) {
        PipelineConfig cfg = base;
        if (parameter == "K") cfg.kmeans.k = v;
        else cfg.n_keep = v;
        cfg.output_dir = (fs::path(base.output_dir) / (parameter + "_" + std::to_string(v))).string();
        SweepRow row{std::to_string(v), false, "", Json()};
        try {
            fs::create_directories(cfg.output_dir);
            std::ofstream(fs::path(cfg.output_dir) / "config.ini") << config_to_ini(cfg);
            row.metrics = run_pipeline(cfg).metrics["metrics"];
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }

    Json j = Json::array();
    std::vector<std::vector<std::pair<std::string, std::string>>> table;
    for (const auto& r : rows) {
        j.push_back({{parameter, r.value}, {"status", r.ok ? "ok" : "failed"}, {"error", r.error}, {"metrics", r.metrics}});
        std::vector<std::pair<std::string, std::string>> line{{parameter, r.value}, {"status", r.ok ? "ok" : "failed"}};
        for (auto& cell : summary_row(r.ok ? r.metrics : Json::object())) line.push_back(std::move(cell));
        line.emplace_back("error", r.error);
        table.push_back(std::move(line));
    }
    write_json(Json{{"parameter", parameter}, {"rows", j}}, fs::path(base.output_dir) / "sweep.json");
    write_csv(fs::path(base.output_dir) / "sweep.csv", table);
    return rows;
}

} // namespace zrnorm
