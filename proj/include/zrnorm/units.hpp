#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "zrnorm/corpus.hpp"
#include "zrnorm/corpus_io.hpp"
#include "zrnorm/kmeans.hpp"

namespace zrnorm {

struct UnitSequence {
    std::string utt_id;
    std::vector<std::uint32_t> units;

    friend bool operator==(const UnitSequence&, const UnitSequence&) = default;
};

// ---- codebook file ----------------------------------------------------------------------

inline constexpr std::uint32_t codebook_version = 1;
inline constexpr std::uint32_t codebook_flag_standardized = 1u;

/// ZRCB layout: "ZRCB", u32 version, u32 K, u32 dim, u32 flags, K*dim float32, little-endian.
inline void write_codebook(const Codebook& cb, std::ostream& out) {
    out.write("ZRCB", 4);
    detail::put_le<std::uint32_t>(out, codebook_version);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cb.k()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cb.dim()));
    detail::put_le<std::uint32_t>(out, cb.standardized_input ? codebook_flag_standardized : 0u);
    for (double v : cb.centroids.data()) detail::put_f32(out, v);
    if (!out) throw FormatError(FormatError::Kind::io, "codebook write failed");
}

inline Codebook read_codebook(std::istream& in) {
    detail::expect_magic(in, "ZRCB");
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != codebook_version)
        throw FormatError(FormatError::Kind::version_mismatch, "unsupported codebook version " + std::to_string(version));
    const auto k = detail::get_le<std::uint32_t>(in, "K");
    const auto dim = detail::get_le<std::uint32_t>(in, "dim");
    const auto flags = detail::get_le<std::uint32_t>(in, "flags");
    if (k == 0 || dim == 0) throw FormatError(FormatError::Kind::invalid_value, "codebook K and dim must be positive");
    Codebook cb;
    cb.centroids = Matrix(k, dim);
    for (double& v : cb.centroids.data()) {
        v = detail::get_f32(in, "centroids");
        if (!std::isfinite(v)) throw FormatError(FormatError::Kind::invalid_value, "non-finite centroid");
    }
    cb.standardized_input = (flags & codebook_flag_standardized) != 0;
    return cb;
}

inline void write_codebook(const Codebook& cb, const std::filesystem::path& p) {
    auto out = detail::open_out(p, true);
    write_codebook(cb, out);
}
inline Codebook read_codebook(const std::filesystem::path& p) {
    auto in = detail::open_in(p, true);
    return read_codebook(in);
}

// ---- quantization -----------------------------------------------------------------------

inline std::vector<std::uint32_t> quantize(const Matrix& frames, const Codebook& cb) {
    if (frames.cols() != cb.dim()) throw DimensionMismatch(cb.dim(), frames.cols(), "quantize");
    std::vector<std::uint32_t> out(frames.rows());
    for (std::size_t t = 0; t < frames.rows(); ++t) out[t] = nearest_centroid(cb.centroids, frames.row(t));
    return out;
}

/// Maps every frame to its nearest centroid (ties to the lowest index). The archive's
/// standardization provenance must match the codebook's.
inline std::vector<UnitSequence> quantize(const FeatureArchive& archive, const Codebook& cb) {
    if (archive.dim() != cb.dim()) throw DimensionMismatch(cb.dim(), archive.dim(), "quantize");
    if (archive.provenance.standardized() != cb.standardized_input)
        throw InvalidArgument(std::string("quantize: codebook was trained on ") +
                              (cb.standardized_input ? "standardized" : "raw") + " frames but the archive is " +
                              (archive.provenance.standardized() ? "standardized" : "raw"));
    std::vector<UnitSequence> out(archive.size());
    parallel_for(archive.size(), [&](std::size_t i) {
        out[i].utt_id = archive[i].id;
        out[i].units = quantize(archive[i].frames, cb);
    });
    return out;
}

/// T x K indicator matrix.
inline Matrix one_hot(std::span<const std::uint32_t> units, std::size_t k) {
    Matrix m(units.size(), k);
    for (std::size_t t = 0; t < units.size(); ++t) {
        if (units[t] >= k)
            throw InvalidArgument("one_hot: unit " + std::to_string(units[t]) + " out of range for K=" + std::to_string(k));
        m(t, units[t]) = 1.0;
    }
    return m;
}

/// One-hot archive of unit sequences, for ABX and probing over discrete codes.
inline FeatureArchive one_hot_archive(const std::vector<UnitSequence>& seqs, std::size_t k,
                                      std::uint32_t frame_period_us = default_frame_period_us) {
    FeatureArchive a(k, frame_period_us);
    for (const auto& s : seqs) a.add(s.utt_id, one_hot(s.units, k));
    return a;
}

// ---- unit sequence text -----------------------------------------------------------------

inline void write_units(const std::vector<UnitSequence>& seqs, std::ostream& out) {
    for (const auto& s : seqs) {
        out << s.utt_id;
        for (auto u : s.units) out << ' ' << u;
        out << "\n";
    }
}

inline std::vector<UnitSequence> read_units(std::istream& in) {
    std::vector<UnitSequence> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        auto f = detail::split_ws(line);
        UnitSequence s{f[0], {}};
        if (!seen.insert(s.utt_id).second) throw ParseError(lineno, "duplicate utterance id '" + s.utt_id + "'");
        for (std::size_t i = 1; i < f.size(); ++i) {
            const auto v = detail::parse_count(f[i], lineno, "unit");
            if (v > std::numeric_limits<std::uint32_t>::max()) throw ParseError(lineno, "unit out of range");
            s.units.push_back(static_cast<std::uint32_t>(v));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_units(const std::vector<UnitSequence>& seqs, const std::filesystem::path& p) {
    auto out = detail::open_out(p);
    write_units(seqs, out);
}
inline std::vector<UnitSequence> read_units(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    return read_units(in);
}

// ---- unit / phone pairing ---------------------------------------------------------------

/// Phone labels treated as silence by default (forced-aligner conventions).
inline const std::set<std::string>& default_silence_labels() {
    static const std::set<std::string> s{"sil", "SIL", "sp", "spn", "<sil>"};
    return s;
}

struct FramePairs {
    std::vector<std::uint32_t> units;
    std::vector<std::string> phones;
};

/// Pairs each frame's unit with the phone of the segment containing it.
inline FramePairs frame_pairs(const UnitSequence& units, const UtteranceAlignment& ali,
                              const std::set<std::string>* drop_labels = nullptr) {
    if (units.units.size() != ali.num_frames())
        throw AlignmentError(AlignmentError::Kind::length_mismatch,
                             "frame_pairs: '" + units.utt_id + "' has " + std::to_string(units.units.size()) +
                                 " units but the alignment covers " + std::to_string(ali.num_frames()) + " frames");
    FramePairs out;
    for (const auto& seg : ali.segments) {
        if (drop_labels && drop_labels->contains(seg.phone)) continue;
        for (std::size_t t = seg.start; t < seg.end; ++t) {
            out.units.push_back(units.units[t]);
            out.phones.push_back(seg.phone);
        }
    }
    return out;
}

/// Concatenated pairs over every unit sequence present in the alignment.
inline FramePairs frame_pairs(const std::vector<UnitSequence>& seqs, const Alignment& ali,
                              const std::set<std::string>* drop_labels = nullptr) {
    FramePairs out;
    for (const auto& s : seqs) {
        const auto* a = ali.find(s.utt_id);
        if (!a) continue;
        auto p = frame_pairs(s, *a, drop_labels);
        out.units.insert(out.units.end(), p.units.begin(), p.units.end());
        out.phones.insert(out.phones.end(), p.phones.begin(), p.phones.end());
    }
    return out;
}

} // namespace zrnorm
