#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "zrnorm/pipeline.hpp"

using namespace zrnorm;
namespace fs = std::filesystem;

namespace {

PipelineConfig parse(const std::string& text, const fs::path& base = {}) {
    std::istringstream in(text);
    return parse_config(in, base);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// A small corpus and cheap stages, so a full run takes about a second.
PipelineConfig tiny(const fs::path& out) {
    auto cfg = parse(R"(
[synthetic]
n_speakers = 6
utterances_per_speaker = 6
segments_per_utterance = 30
n_lexical = 20
n_syntactic = 20
n_similarity = 12
[verify]
n_enroll = 3
[probe]
n_runs = 1
epochs = 3
[kmeans]
k = 12
[abx]
max_x = 3
)");
    cfg.output_dir = out.string();
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST(Config, DefaultsAndOverrides) {
    const auto d = parse("");
    EXPECT_EQ(d.kmeans.k, 50u);
    EXPECT_EQ(d.source, "synthetic");
    const auto c = parse("[kmeans]\nk = 10\n[probe]\ntasks = phone, speaker\nkind = mlp\n[normalize]\nenabled = false\n");
    EXPECT_EQ(c.kmeans.k, 10u);
    EXPECT_EQ(c.probe_tasks, (std::vector<std::string>{"phone", "speaker"}));
    EXPECT_FALSE(c.normalize);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse("[kmeans]\nkay = 3\n"), ConfigError);
    EXPECT_THROW(parse("[nosuch]\nk = 3\n"), ConfigError);
    EXPECT_THROW(parse("k = 3\n"), ConfigError);
    EXPECT_THROW(parse("[kmeans]\nk = ten\n"), ConfigError);
    EXPECT_THROW(parse("[normalize]\nenabled = maybe\n"), ConfigError);
    EXPECT_THROW(parse("[kmeans]\nk = 0\n").validate(), ConfigError);
    EXPECT_THROW(parse("[normalize]\nmode = global\n").validate(), ConfigError);
    EXPECT_THROW(parse("[data]\nsource = files\n").validate(), ConfigError);
}

TEST(Config, IniRoundTripAndRelativePaths) {
    auto c = parse("[kmeans]\nk = 7\n[abx]\nmodes = across\n");
    const auto back = parse(config_to_ini(c));
    EXPECT_EQ(config_to_ini(back), config_to_ini(c));
    const auto rel = parse("[data]\narchive = feats/a.zrfa\noutput_dir = out\n", "/base/dir");
    EXPECT_EQ(rel.archive, "/base/dir/feats/a.zrfa");
    EXPECT_EQ(rel.output_dir, "/base/dir/out");
}

TEST(Pipeline, EndToEndOnTinyCorpus) {
    TempDir dir("zrnorm_pipeline_e2e");
    const auto rr = run_pipeline(tiny(dir.path));
    for (const char* f : {"metrics.json", "run_report.json", "summary.csv", "codebook.zrcb", "units.txt", "lm.json"})
        EXPECT_TRUE(fs::exists(dir.path / f)) << f;
    const auto& m = rr.metrics["metrics"];
    EXPECT_TRUE(m.contains("abx"));
    EXPECT_TRUE(m.contains("cluster_metrics"));
    EXPECT_TRUE(m.contains("lm"));
    EXPECT_EQ(rr.report["status"], "ok");
}

TEST(Pipeline, ByteIdenticalAcrossRepeatsAndWorkerCounts) {
    TempDir a("zrnorm_pipeline_w1"), b("zrnorm_pipeline_w8"), c("zrnorm_pipeline_w1b");
    const std::size_t saved = worker_count();
    set_worker_count(1);
    run_pipeline(tiny(a.path));
    run_pipeline(tiny(c.path));
    set_worker_count(8);
    run_pipeline(tiny(b.path));
    set_worker_count(saved);
    const auto ma = read_file(a.path / "metrics.json");
    EXPECT_FALSE(ma.empty());
    EXPECT_EQ(ma, read_file(b.path / "metrics.json"));
    EXPECT_EQ(ma, read_file(c.path / "metrics.json"));
    EXPECT_EQ(read_file(a.path / "units.txt"), read_file(b.path / "units.txt"));
}

TEST(Pipeline, StageFailureIsReported) {
    TempDir dir("zrnorm_pipeline_fail");
    auto cfg = tiny(dir.path);
    cfg.kmeans.k = 100000; // more clusters than frames
    try {
        run_pipeline(cfg);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "kmeans");
    }
    const auto report = read_json(dir.path / "run_report.json");
    EXPECT_EQ(report["status"], "failed");
    EXPECT_EQ(report["failed_stage"], "kmeans");
}

TEST(Sweep, OneRowPerValue) {
    TempDir dir("zrnorm_sweep");
    auto cfg = tiny(dir.path);
    cfg.abx = false;
    cfg.lm = false;
    cfg.probe = false;
    const auto k_rows = sweep(cfg, "K", {5, 8, 11, 14});
    EXPECT_EQ(k_rows.size(), 4u);
    for (const auto& r : k_rows) EXPECT_TRUE(r.ok) << r.error;
    EXPECT_TRUE(fs::exists(dir.path / "K_8" / "metrics.json"));
    EXPECT_EQ(read_json(dir.path / "sweep.json")["rows"].size(), 4u);

    cfg.forest_cfg.n_trees = 5;
    cfg.forest_max_frames = 1000;
    const auto keep_rows = sweep(cfg, "n_keep", {2, 4, 6, 8, 10, 12, 14});
    EXPECT_EQ(keep_rows.size(), 7u);
    EXPECT_EQ(sweep(cfg, "K", {6}).size(), 1u);

    // A failing value is recorded and the sweep continues.
    const auto mixed = sweep(cfg, "n_keep", {99, 3});
    ASSERT_EQ(mixed.size(), 2u);
    EXPECT_FALSE(mixed[0].ok);
    EXPECT_TRUE(mixed[1].ok);
    EXPECT_THROW(sweep(cfg, "epochs", {1}), ConfigError);
}
