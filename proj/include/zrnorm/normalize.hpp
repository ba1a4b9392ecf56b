#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "zrnorm/corpus.hpp"
#include "zrnorm/matrix.hpp"
#include "zrnorm/parallel.hpp"

namespace zrnorm {

/// Lower bound on the divisor in standardize(); constant dimensions map to zero.
inline constexpr double standardize_eps = 1e-8;

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std; // population standard deviation
    std::size_t n_frames = 0;
};

/// Arithmetic mean of the frames, per dimension.
inline std::vector<double> utterance_mean(const Matrix& frames) {
    if (frames.rows() == 0) throw InvalidArgument("utterance_mean: no frames");
    std::vector<double> mean(frames.cols(), 0.0);
    for (std::size_t t = 0; t < frames.rows(); ++t) {
        auto r = frames.row(t);
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += r[j];
    }
    for (double& m : mean) m /= static_cast<double>(frames.rows());
    return mean;
}

/// Population mean and standard deviation pooled over one or more frame matrices
/// (one utterance, or all utterances of a speaker). Two-pass for accuracy.
inline NormStats fit_stats(std::span<const Matrix* const> parts) {
    NormStats s;
    std::size_t dim = 0;
    for (const Matrix* m : parts) {
        if (m->rows() == 0) continue;
        if (s.n_frames == 0) dim = m->cols();
        else if (m->cols() != dim) throw DimensionMismatch(dim, m->cols(), "fit_stats");
        s.n_frames += m->rows();
    }
    if (s.n_frames == 0) throw InvalidArgument("fit_stats: no frames");
    s.mean.assign(dim, 0.0);
    for (const Matrix* m : parts)
        for (std::size_t t = 0; t < m->rows(); ++t) {
            auto r = m->row(t);
            for (std::size_t j = 0; j < dim; ++j) s.mean[j] += r[j];
        }
    const double n = static_cast<double>(s.n_frames);
    for (double& v : s.mean) v /= n;
    std::vector<double> var(dim, 0.0);
    for (const Matrix* m : parts)
        for (std::size_t t = 0; t < m->rows(); ++t) {
            auto r = m->row(t);
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = r[j] - s.mean[j];
                var[j] += d * d;
            }
        }
    s.std.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) s.std[j] = std::sqrt(var[j] / n);
    return s;
}

inline NormStats fit_stats(const Matrix& frames) {
    const Matrix* p = &frames;
    return fit_stats(std::span<const Matrix* const>(&p, 1));
}

/// out[t][j] = (in[t][j] - mean[j]) / max(std[j], eps).
inline Matrix standardize(const Matrix& frames, const NormStats& stats) {
    if (frames.cols() != stats.mean.size()) throw DimensionMismatch(stats.mean.size(), frames.cols(), "standardize");
    Matrix out(frames.rows(), frames.cols());
    std::vector<double> inv(stats.std.size());
    for (std::size_t j = 0; j < inv.size(); ++j) inv[j] = 1.0 / std::max(stats.std[j], standardize_eps);
    for (std::size_t t = 0; t < frames.rows(); ++t) {
        auto in = frames.row(t);
        auto o = out.row(t);
        for (std::size_t j = 0; j < inv.size(); ++j) o[j] = (in[j] - stats.mean[j]) * inv[j];
    }
    return out;
}

inline Matrix standardize(const Matrix& frames) { return standardize(frames, fit_stats(frames)); }

/// Standardizes each utterance with its own statistics.
inline FeatureArchive standardize_per_utterance(const FeatureArchive& in) {
    std::vector<Matrix> out(in.size());
    parallel_for(in.size(), [&](std::size_t i) { out[i] = standardize(in[i].frames); });
    FeatureArchive a(in.dim(), in.frame_period_us());
    for (std::size_t i = 0; i < in.size(); ++i) a.add(in[i].id, std::move(out[i]));
    a.provenance.normalization = Provenance::Normalization::utterance;
    return a;
}

/// Standardizes each utterance with statistics pooled over all utterances of its speaker.
/// Every archive utterance must appear in the manifest.
inline FeatureArchive standardize_per_speaker(const FeatureArchive& in, const Manifest& manifest) {
    const auto by_spk = manifest.utterances_by_speaker();
    std::map<std::string, NormStats> stats;
    for (const auto& [spk, utts] : by_spk) {
        std::vector<const Matrix*> parts;
        for (const auto& u : utts)
            if (const Matrix* m = in.find(u)) parts.push_back(m);
        if (!parts.empty()) stats.emplace(spk, fit_stats(parts));
    }
    std::vector<Matrix> out(in.size());
    parallel_for(in.size(), [&](std::size_t i) {
        const auto& spk = manifest.at(in[i].id).speaker_id;
        out[i] = standardize(in[i].frames, stats.at(spk));
    });
    FeatureArchive a(in.dim(), in.frame_period_us());
    for (std::size_t i = 0; i < in.size(); ++i) a.add(in[i].id, std::move(out[i]));
    a.provenance.normalization = Provenance::Normalization::speaker;
    return a;
}

} // namespace zrnorm
