// zrnorm command-line front end. Every subcommand writes a JSON report to --out (or stdout).
// Exit codes: 0 success, 1 usage or configuration error, 2 processing failure.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zrnorm/mfcc.hpp"
#include "zrnorm/pipeline.hpp"
#include "zrnorm/wav.hpp"

namespace fs = std::filesystem;
using namespace zrnorm;

namespace {

constexpr int exit_config = 1;
constexpr int exit_failure = 2;

void emit(const Json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(j, out);
    }
}

FeatureArchive load_features(const std::string& path) { return load_archive(path); }

UnitIndex load_unit_files(const std::vector<std::string>& paths) {
    UnitIndex index;
    for (const auto& p : paths)
        for (auto& s : read_units(fs::path(p))) {
            if (index.contains(s.utt_id)) throw InvalidArgument("utterance '" + s.utt_id + "' appears in several unit files");
            index[s.utt_id] = std::move(s.units);
        }
    return index;
}

std::vector<UnitSequence> as_sequences(const UnitIndex& index) {
    std::vector<UnitSequence> out;
    for (const auto& [id, u] : index) out.push_back({id, u});
    return out;
}

std::size_t infer_k(const std::vector<UnitSequence>& seqs) {
    std::uint32_t m = 0;
    for (const auto& s : seqs)
        for (auto u : s.units) m = std::max(m, u);
    return static_cast<std::size_t>(m) + 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"zrnorm: speaker normalization and evaluation toolkit for speech feature archives"};
    app.require_subcommand(1);
    std::size_t workers = 0;
    app.add_option("--workers", workers, "Worker threads (default: hardware concurrency)");

    std::function<void()> action;

    // ---- synth ----------------------------------------------------------------------------
    SynthConfig synth;
    SynthTaskConfig synth_tasks;
    std::string synth_out;
    bool synth_no_tasks = false;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus with known speaker and phone structure");
    c_synth->add_option("--out-dir", synth_out, "Output directory")->required();
    c_synth->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
    c_synth->add_option("--n-speakers", synth.n_speakers)->capture_default_str();
    c_synth->add_option("--n-phones", synth.n_phones)->capture_default_str();
    c_synth->add_option("--dim", synth.dim)->capture_default_str();
    c_synth->add_option("--utterances-per-speaker", synth.utterances_per_speaker)->capture_default_str();
    c_synth->add_option("--segments-per-utterance", synth.segments_per_utterance)->capture_default_str();
    c_synth->add_option("--frames-min", synth.frames_per_segment.lo)->capture_default_str();
    c_synth->add_option("--frames-max", synth.frames_per_segment.hi)->capture_default_str();
    c_synth->add_option("--sigma-speaker", synth.sigma_speaker)->capture_default_str();
    c_synth->add_option("--sigma-phone", synth.sigma_phone)->capture_default_str();
    c_synth->add_option("--sigma-gender", synth.sigma_gender)->capture_default_str();
    c_synth->add_option("--sigma-noise", synth.sigma_noise)->capture_default_str();
    c_synth->add_flag("--no-tasks", synth_no_tasks, "Skip the LM task stimuli");
    c_synth->callback([&] {
        action = [&] {
            const auto corpus = generate_synthetic(synth);
            const fs::path d = synth_out;
            save_archive(corpus.archive, d / "corpus.zrfa");
            write_manifest(corpus.manifest, d / "manifest.csv");
            write_alignment(corpus.alignment, d / "alignment.txt");
            Json j{{"archive", (d / "corpus.zrfa").string()},
                   {"n_utterances", corpus.archive.size()},
                   {"n_frames", corpus.archive.total_frames()},
                   {"dim", corpus.archive.dim()},
                   {"seed", synth.seed}};
            if (!synth_no_tasks) {
                const auto tasks = generate_synthetic_tasks(synth, synth_tasks);
                save_archive(tasks.archive, d / "tasks.zrfa");
                write_manifest(tasks.manifest, d / "tasks_manifest.csv");
                write_alignment(tasks.alignment, d / "tasks_alignment.txt");
                write_pairs(tasks.lexical, d / "lexical.csv");
                write_pairs(tasks.syntactic, d / "syntactic.csv");
                write_simi(tasks.similarity, d / "similarity.csv");
                j["n_task_utterances"] = tasks.archive.size();
            }
            std::cout << j.dump(2) << '\n';
        };
    });

    // ---- extract-mfcc ----------------------------------------------------------------------
    MfccConfig mfcc;
    std::string wav_dir, mfcc_out;
    bool no_deltas = false;
    auto* c_mfcc = app.add_subcommand("extract-mfcc", "Compute MFCC features for every .wav file in a directory");
    c_mfcc->add_option("--wav-dir", wav_dir)->required()->check(CLI::ExistingDirectory);
    c_mfcc->add_option("--out", mfcc_out, "Output archive")->required();
    c_mfcc->add_option("--n-mel", mfcc.n_mel_filters)->capture_default_str();
    c_mfcc->add_option("--n-cepstra", mfcc.n_cepstra)->capture_default_str();
    c_mfcc->add_option("--window-ms", mfcc.window_ms)->capture_default_str();
    c_mfcc->add_option("--hop-ms", mfcc.hop_ms)->capture_default_str();
    c_mfcc->add_flag("--no-deltas", no_deltas, "Static coefficients only");
    c_mfcc->callback([&] {
        action = [&] {
            mfcc.include_deltas = !no_deltas;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(wav_dir))
                if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw InvalidArgument("no .wav files in '" + wav_dir + "'");
            std::vector<Matrix> feats(files.size());
            std::vector<std::uint32_t> rates(files.size());
            parallel_for(files.size(), [&](std::size_t i) {
                const auto wav = read_wav(files[i]);
                MfccConfig c = mfcc;
                c.sample_rate_hz = wav.sample_rate;
                rates[i] = wav.sample_rate;
                feats[i] = compute_mfcc(wav.samples, c);
            });
            const auto period = static_cast<std::uint32_t>(std::lround(mfcc.hop_ms * 1000.0));
            FeatureArchive a(mfcc.output_dim(), period);
            for (std::size_t i = 0; i < files.size(); ++i) a.add(files[i].stem().string(), std::move(feats[i]));
            save_archive(a, mfcc_out);
            std::cout << Json{{"archive", mfcc_out}, {"n_utterances", a.size()}, {"n_frames", a.total_frames()}, {"dim", a.dim()}}.dump(2)
                      << '\n';
        };
    });

    // ---- normalize --------------------------------------------------------------------------
    std::string norm_in, norm_out, norm_mode = "utterance", norm_manifest;
    auto* c_norm = app.add_subcommand("normalize", "Standardize frames per utterance or per speaker");
    c_norm->add_option("--in", norm_in)->required()->check(CLI::ExistingFile);
    c_norm->add_option("--out", norm_out)->required();
    c_norm->add_option("--mode", norm_mode)->check(CLI::IsMember({"utterance", "speaker"}))->capture_default_str();
    c_norm->add_option("--manifest", norm_manifest, "Required for --mode speaker")->check(CLI::ExistingFile);
    c_norm->callback([&] {
        if (norm_mode == "speaker" && norm_manifest.empty()) throw CLI::ValidationError("--manifest", "required for --mode speaker");
        action = [&] {
            const auto a = load_features(norm_in);
            const auto out = norm_mode == "speaker" ? standardize_per_speaker(a, read_manifest(fs::path(norm_manifest)))
                                                    : standardize_per_utterance(a);
            save_archive(out, norm_out);
            std::cout << Json{{"archive", norm_out}, {"mode", norm_mode}, {"n_utterances", out.size()}}.dump(2) << '\n';
        };
    });

    // ---- kmeans-fit -------------------------------------------------------------------------
    KMeansOptions km_opt;
    std::string km_features, km_out, km_report;
    std::size_t km_max_frames = 0;
    auto* c_km = app.add_subcommand("kmeans-fit", "Fit a K-means codebook on archive frames");
    c_km->add_option("--features", km_features)->required()->check(CLI::ExistingFile);
    c_km->add_option("--k", km_opt.k)->capture_default_str();
    c_km->add_option("--seed", km_opt.seed)->capture_default_str();
    c_km->add_option("--max-iters", km_opt.max_iters)->capture_default_str();
    c_km->add_option("--tol", km_opt.tol)->capture_default_str();
    c_km->add_option("--max-frames", km_max_frames, "Seeded frame subsample (0 = all)")->capture_default_str();
    c_km->add_option("--out", km_out, "Codebook file")->required();
    c_km->add_option("--report", km_report, "JSON report (default stdout)");
    c_km->callback([&] {
        action = [&] {
            const auto a = load_features(km_features);
            const Matrix x = pipeline_detail::gather_frames(a, km_max_frames, km_opt.seed);
            auto r = kmeans_fit(x, km_opt);
            r.codebook.standardized_input = a.provenance.standardized();
            write_codebook(r.codebook, km_out);
            Json j = to_json(r);
            j["inertia_history"] = r.inertia_history;
            j["n_train_frames"] = x.rows();
            emit(j, km_report);
        };
    });

    // ---- quantize ---------------------------------------------------------------------------
    std::string q_features, q_codebook, q_out;
    auto* c_q = app.add_subcommand("quantize", "Map frames to their nearest codebook unit");
    c_q->add_option("--features", q_features)->required()->check(CLI::ExistingFile);
    c_q->add_option("--codebook", q_codebook)->required()->check(CLI::ExistingFile);
    c_q->add_option("--out", q_out, "Unit sequence file")->required();
    c_q->callback([&] {
        action = [&] {
            const auto units = quantize(load_features(q_features), read_codebook(fs::path(q_codebook)));
            write_units(units, fs::path(q_out));
            std::cout << Json{{"units", q_out}, {"n_utterances", units.size()}}.dump(2) << '\n';
        };
    });

    // ---- abx --------------------------------------------------------------------------------
    std::string abx_features, abx_units, abx_alignment, abx_manifest, abx_out, abx_mode = "within";
    std::size_t abx_k = 0;
    AbxOptions abx_opt;
    bool abx_cells = false;
    auto* c_abx = app.add_subcommand("abx", "Minimal-pair ABX error with DTW over frame cosine distances");
    auto* abx_f = c_abx->add_option("--features", abx_features)->check(CLI::ExistingFile);
    auto* abx_u = c_abx->add_option("--units", abx_units, "Score one-hot unit codes instead of features")->check(CLI::ExistingFile);
    abx_f->excludes(abx_u);
    c_abx->add_option("--k", abx_k, "Codebook size for --units (default: max unit + 1)");
    c_abx->add_option("--alignment", abx_alignment)->required()->check(CLI::ExistingFile);
    c_abx->add_option("--manifest", abx_manifest)->required()->check(CLI::ExistingFile);
    c_abx->add_option("--mode", abx_mode)->check(CLI::IsMember({"within", "across"}))->capture_default_str();
    c_abx->add_option("--max-x", abx_opt.max_x)->capture_default_str();
    c_abx->add_option("--seed", abx_opt.seed)->capture_default_str();
    c_abx->add_flag("--cells", abx_cells, "Include per-cell results");
    c_abx->add_option("--out", abx_out);
    c_abx->callback([&] {
        if (abx_features.empty() && abx_units.empty()) throw CLI::ValidationError("abx", "one of --features or --units is required");
        action = [&] {
            abx_opt.mode = abx_mode == "within" ? AbxMode::within : AbxMode::across;
            const auto ali = read_alignment(fs::path(abx_alignment));
            const auto man = read_manifest(fs::path(abx_manifest));
            FeatureArchive feats{1};
            if (!abx_features.empty()) {
                feats = load_features(abx_features);
            } else {
                const auto seqs = read_units(fs::path(abx_units));
                feats = one_hot_archive(seqs, abx_k ? abx_k : infer_k(seqs));
            }
            emit(to_json(abx_score(extract_items(ali, man), feats, abx_opt), abx_cells), abx_out);
        };
    });

    // ---- verify -----------------------------------------------------------------------------
    std::string v_features, v_manifest, v_out;
    std::size_t v_enroll = 5;
    std::uint64_t v_seed = 1;
    auto* c_v = app.add_subcommand("verify", "Speaker verification from utterance-mean embeddings");
    c_v->add_option("--features", v_features)->required()->check(CLI::ExistingFile);
    c_v->add_option("--manifest", v_manifest)->required()->check(CLI::ExistingFile);
    c_v->add_option("--n-enroll", v_enroll)->capture_default_str();
    c_v->add_option("--seed", v_seed)->capture_default_str();
    c_v->add_option("--out", v_out);
    c_v->callback([&] {
        action = [&] {
            emit(to_json(verify_speakers(load_features(v_features), read_manifest(fs::path(v_manifest)), v_enroll, v_seed)), v_out);
        };
    });

    // ---- probe ------------------------------------------------------------------------------
    std::string p_features, p_units, p_manifest, p_alignment, p_task = "phone", p_kind = "linear", p_out;
    std::size_t p_k = 0, p_test = 2;
    ProbeConfig p_cfg;
    auto* c_p = app.add_subcommand("probe", "Frame-level phone/speaker/gender probing classifier");
    auto* p_f = c_p->add_option("--features", p_features)->check(CLI::ExistingFile);
    auto* p_u = c_p->add_option("--units", p_units, "Probe one-hot unit codes instead of features")->check(CLI::ExistingFile);
    p_f->excludes(p_u);
    c_p->add_option("--k", p_k, "Codebook size for --units (default: max unit + 1)");
    c_p->add_option("--manifest", p_manifest)->required()->check(CLI::ExistingFile);
    c_p->add_option("--alignment", p_alignment)->required()->check(CLI::ExistingFile);
    c_p->add_option("--task", p_task)->check(CLI::IsMember({"phone", "speaker", "gender"}))->capture_default_str();
    c_p->add_option("--kind", p_kind)->check(CLI::IsMember({"linear", "mlp"}))->capture_default_str();
    c_p->add_option("--hidden-units", p_cfg.hidden_units)->capture_default_str();
    c_p->add_option("--epochs", p_cfg.epochs)->capture_default_str();
    c_p->add_option("--batch-size", p_cfg.batch_size)->capture_default_str();
    c_p->add_option("--learning-rate", p_cfg.learning_rate)->capture_default_str();
    c_p->add_option("--runs", p_cfg.n_runs)->capture_default_str();
    c_p->add_option("--seed", p_cfg.seed)->capture_default_str();
    c_p->add_option("--test-per-speaker", p_test, "Held-out utterances per speaker")->capture_default_str();
    c_p->add_option("--out", p_out);
    c_p->callback([&] {
        if (p_features.empty() && p_units.empty()) throw CLI::ValidationError("probe", "one of --features or --units is required");
        action = [&] {
            p_cfg.kind = p_kind == "mlp" ? ProbeKind::mlp : ProbeKind::linear;
            const auto man = read_manifest(fs::path(p_manifest));
            const auto ali = read_alignment(fs::path(p_alignment));
            FeatureArchive feats{1};
            std::size_t k = 0;
            if (!p_features.empty()) {
                feats = load_features(p_features);
            } else {
                const auto seqs = read_units(fs::path(p_units));
                k = p_k ? p_k : infer_k(seqs);
                feats = one_hot_archive(seqs, k);
            }
            using namespace pipeline_detail;
            const auto d = probe_split(feats, man, ali, p_test, p_task == "phone");
            const auto r = run_probe(probe_features(feats, d.train), probe_labels(d.train, p_task), probe_features(feats, d.test),
                                     probe_labels(d.test, p_task), probe_classes(d, p_task), p_cfg);
            Json j = to_json(r);
            j["task"] = p_task;
            j["input"] = p_features.empty() ? "units" : "features";
            if (k) j["k"] = k;
            j["config"] = to_json(p_cfg);
            j["n_train_frames"] = d.train.size();
            j["n_test_frames"] = d.test.size();
            emit(j, p_out);
        };
    });

    // ---- cluster-metrics --------------------------------------------------------------------
    std::string cm_units, cm_alignment, cm_out;
    bool cm_keep_silence = false;
    auto* c_cm = app.add_subcommand("cluster-metrics", "ARI, AMI, homogeneity and completeness of units vs phones");
    c_cm->add_option("--units", cm_units)->required()->check(CLI::ExistingFile);
    c_cm->add_option("--alignment", cm_alignment)->required()->check(CLI::ExistingFile);
    c_cm->add_flag("--keep-silence", cm_keep_silence, "Keep silence-labelled frames");
    c_cm->add_option("--out", cm_out);
    c_cm->callback([&] {
        action = [&] {
            const auto pairs = frame_pairs(read_units(fs::path(cm_units)), read_alignment(fs::path(cm_alignment)),
                                           cm_keep_silence ? nullptr : &default_silence_labels());
            emit(to_json(clustering_metrics(pairs)), cm_out);
        };
    });

    // ---- feature-rank -----------------------------------------------------------------------
    std::string fr_features, fr_manifest, fr_out;
    ForestConfig fr_cfg;
    std::size_t fr_max_frames = 5000;
    auto* c_fr = app.add_subcommand("feature-rank", "Rank dimensions by random-forest speaker importance");
    c_fr->add_option("--features", fr_features)->required()->check(CLI::ExistingFile);
    c_fr->add_option("--manifest", fr_manifest)->required()->check(CLI::ExistingFile);
    c_fr->add_option("--n-trees", fr_cfg.n_trees)->capture_default_str();
    c_fr->add_option("--max-depth", fr_cfg.max_depth)->capture_default_str();
    c_fr->add_option("--features-per-split", fr_cfg.features_per_split, "0 = round(sqrt(d))")->capture_default_str();
    c_fr->add_option("--min-samples-leaf", fr_cfg.min_samples_leaf)->capture_default_str();
    c_fr->add_option("--seed", fr_cfg.seed)->capture_default_str();
    c_fr->add_option("--max-frames", fr_max_frames, "Seeded frame subsample")->capture_default_str();
    c_fr->add_option("--out", fr_out, "Ranking file")->required();
    c_fr->callback([&] {
        action = [&] {
            const auto sf = pipeline_detail::speaker_frames(load_features(fr_features), read_manifest(fs::path(fr_manifest)),
                                                            fr_max_frames, fr_cfg.seed);
            Json j = to_json(forest_importance(sf.x, sf.y, sf.n_speakers, fr_cfg));
            j["config"] = to_json(fr_cfg);
            j["n_frames"] = sf.x.rows();
            write_json(j, fr_out);
        };
    });

    // ---- prune ------------------------------------------------------------------------------
    std::string pr_features, pr_rank, pr_out;
    std::size_t pr_keep = 0;
    auto* c_pr = app.add_subcommand("prune", "Drop the most speaker-predictive dimensions");
    c_pr->add_option("--features", pr_features)->required()->check(CLI::ExistingFile);
    c_pr->add_option("--rank", pr_rank, "Ranking from feature-rank")->required()->check(CLI::ExistingFile);
    c_pr->add_option("--keep", pr_keep, "Dimensions to keep")->required();
    c_pr->add_option("--out", pr_out)->required();
    c_pr->callback([&] {
        action = [&] {
            const Json j = read_json(pr_rank);
            const auto ranking = ranking_from_importance(j.at("importance").get<std::vector<double>>());
            const auto out = prune(load_features(pr_features), ranking, pr_keep);
            save_archive(out, pr_out);
            std::cout << Json{{"archive", pr_out}, {"kept_dimensions", kept_dimensions(ranking, pr_keep)}}.dump(2) << '\n';
        };
    });

    // ---- lm-train ---------------------------------------------------------------------------
    std::vector<std::string> lt_units;
    std::string lt_out;
    std::size_t lt_k = 0, lt_order = 3;
    double lt_discount = 0.75;
    auto* c_lt = app.add_subcommand("lm-train", "Train an interpolated Kneser-Ney n-gram model on unit sequences");
    c_lt->add_option("--units", lt_units)->required()->check(CLI::ExistingFile);
    c_lt->add_option("--k", lt_k, "Vocabulary size (default: max unit + 1)");
    c_lt->add_option("--order", lt_order)->capture_default_str();
    c_lt->add_option("--discount", lt_discount)->capture_default_str();
    c_lt->add_option("--out", lt_out, "Model file")->required();
    c_lt->callback([&] {
        action = [&] {
            const auto seqs = as_sequences(load_unit_files(lt_units));
            std::vector<std::vector<std::uint32_t>> corpus;
            for (const auto& s : seqs) corpus.push_back(s.units);
            const auto lm = NgramLm::train(corpus, lt_k ? lt_k : infer_k(seqs), lt_order, lt_discount);
            std::ofstream(lt_out) << lm.to_json().dump() << '\n';
            std::cout << Json{{"model", lt_out}, {"k", lm.vocab_size()}, {"order", lm.order()}, {"n_sequences", corpus.size()}}.dump(2)
                      << '\n';
        };
    });

    auto load_lm = [](const std::string& p) { return NgramLm::from_json(read_json(p)); };

    // ---- lm-score ---------------------------------------------------------------------------
    std::string ls_lm, ls_out;
    std::vector<std::string> ls_units;
    auto* c_ls = app.add_subcommand("lm-score", "Log-probability of every unit sequence");
    c_ls->add_option("--lm", ls_lm)->required()->check(CLI::ExistingFile);
    c_ls->add_option("--units", ls_units)->required()->check(CLI::ExistingFile);
    c_ls->add_option("--out", ls_out);
    c_ls->callback([&] {
        action = [&] {
            const auto lm = load_lm(ls_lm);
            Json rows = Json::array();
            for (const auto& [id, u] : load_unit_files(ls_units)) {
                const auto lp = token_logprobs(lm, u, lm.scores_end());
                const double sum = std::accumulate(lp.begin(), lp.end(), 0.0);
                rows.push_back({{"utt_id", id}, {"logprob", sum}, {"n_scored", lp.size()},
                                {"mean_logprob", sum / static_cast<double>(lp.size())}});
            }
            emit(Json{{"scores", rows}}, ls_out);
        };
    });

    // ---- lm-pairs ---------------------------------------------------------------------------
    std::string lp_lm, lp_pairs, lp_out;
    std::vector<std::string> lp_units;
    bool lp_norm = false;
    auto* c_lp = app.add_subcommand("lm-pairs", "Lexical or syntactic pairwise accuracy");
    c_lp->add_option("--lm", lp_lm)->required()->check(CLI::ExistingFile);
    c_lp->add_option("--units", lp_units)->required()->check(CLI::ExistingFile);
    c_lp->add_option("--pairs", lp_pairs, "CSV pair_id,pos_utt_id,neg_utt_id")->required()->check(CLI::ExistingFile);
    c_lp->add_flag("--length-normalized", lp_norm, "Compare per-token mean log-probabilities");
    c_lp->add_option("--out", lp_out);
    c_lp->callback([&] {
        action = [&] {
            emit(to_json(pairwise_accuracy(load_lm(lp_lm), read_pairs(fs::path(lp_pairs)), load_unit_files(lp_units), lp_norm)),
                 lp_out);
        };
    });

    // ---- lm-simi ----------------------------------------------------------------------------
    std::string sm_items, sm_vectors, sm_out, sm_pooling = "mean";
    std::vector<std::string> sm_units;
    std::size_t sm_k = 0;
    auto* c_sm = app.add_subcommand("lm-simi", "Spearman correlation of pooled-representation similarity with human scores");
    auto* sm_u = c_sm->add_option("--units", sm_units, "Use one-hot unit codes as token vectors")->check(CLI::ExistingFile);
    auto* sm_v = c_sm->add_option("--vectors", sm_vectors, "Archive of per-token vectors")->check(CLI::ExistingFile);
    sm_u->excludes(sm_v);
    c_sm->add_option("--k", sm_k, "Codebook size for --units (default: max unit + 1)");
    c_sm->add_option("--items", sm_items, "CSV pair_id,utt_a,utt_b,human_score")->required()->check(CLI::ExistingFile);
    c_sm->add_option("--pooling", sm_pooling)->check(CLI::IsMember({"min", "mean", "max"}))->capture_default_str();
    c_sm->add_option("--out", sm_out);
    c_sm->callback([&] {
        if (sm_units.empty() && sm_vectors.empty()) throw CLI::ValidationError("lm-simi", "one of --units or --vectors is required");
        action = [&] {
            FeatureArchive vectors{1};
            if (!sm_vectors.empty()) {
                vectors = load_features(sm_vectors);
            } else {
                const auto seqs = as_sequences(load_unit_files(sm_units));
                vectors = one_hot_archive(seqs, sm_k ? sm_k : infer_k(seqs));
            }
            emit(to_json(semantic_similarity(archive_source(vectors), read_simi(fs::path(sm_items)), parse_pooling(sm_pooling))),
                 sm_out);
        };
    });

    // ---- run / sweep ------------------------------------------------------------------------
    std::string run_config, run_out_dir;
    bool print_config = false;
    auto* c_run = app.add_subcommand("run", "Run the full pipeline from an INI config");
    c_run->add_option("--config", run_config, "INI file (omit for all defaults)")->check(CLI::ExistingFile);
    c_run->add_option("--output-dir", run_out_dir, "Override data.output_dir");
    c_run->add_flag("--print-config", print_config, "Print the effective config and exit");
    c_run->callback([&] {
        action = [&] {
            PipelineConfig cfg = run_config.empty() ? PipelineConfig{} : load_config(run_config);
            if (!run_out_dir.empty()) cfg.output_dir = run_out_dir;
            if (print_config) {
                std::cout << config_to_ini(cfg);
                return;
            }
            const auto r = run_pipeline(cfg);
            std::cout << r.metrics["metrics"].dump(2) << '\n';
        };
    });

    std::string sw_config, sw_param, sw_out_dir;
    std::vector<std::size_t> sw_values;
    auto* c_sw = app.add_subcommand("sweep", "One pipeline run per value of K or n_keep");
    c_sw->add_option("--config", sw_config)->check(CLI::ExistingFile);
    c_sw->add_option("--param", sw_param)->required()->check(CLI::IsMember({"K", "n_keep"}));
    c_sw->add_option("--values", sw_values, "Comma-separated values")->required()->delimiter(',');
    c_sw->add_option("--output-dir", sw_out_dir, "Override data.output_dir");
    c_sw->callback([&] {
        action = [&] {
            PipelineConfig cfg = sw_config.empty() ? PipelineConfig{} : load_config(sw_config);
            if (!sw_out_dir.empty()) cfg.output_dir = sw_out_dir;
            const auto rows = sweep(cfg, sw_param, sw_values);
            std::size_t failed = 0;
            for (const auto& r : rows) {
                std::cout << sw_param << "=" << r.value << ": " << (r.ok ? "ok" : "failed: " + r.error) << '\n';
                failed += r.ok ? 0 : 1;
            }
            if (failed == rows.size()) throw Error("every sweep value failed");
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    if (workers) set_worker_count(workers);
    try {
        if (action) action();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return 0;
}
