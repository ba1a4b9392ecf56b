#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zrnorm/error.hpp"
#include "zrnorm/matrix.hpp"

namespace zrnorm {

/// Frame period of the 10 ms hop used throughout.
inline constexpr std::uint32_t default_frame_period_us = 10000;

/// How an archive's frames were produced. Not part of the binary format; carried
/// in memory and in an optional sidecar so quantize can check codebook compatibility.
struct Provenance {
    enum class Normalization { none, utterance, speaker };
    Normalization normalization = Normalization::none;

    bool standardized() const noexcept { return normalization != Normalization::none; }
};

inline std::string_view to_string(Provenance::Normalization n) {
    switch (n) {
    case Provenance::Normalization::none: return "none";
    case Provenance::Normalization::utterance: return "utterance";
    case Provenance::Normalization::speaker: return "speaker";
    }
    return "none";
}

struct Utterance {
    std::string id;
    Matrix frames; // T x dim
};

/// Per-utterance frame matrices sharing one dimensionality and frame period.
class FeatureArchive {
public:
    explicit FeatureArchive(std::size_t dim, std::uint32_t frame_period_us = default_frame_period_us)
        : dim_(dim), frame_period_us_(frame_period_us) {
        if (dim == 0) throw InvalidArgument("FeatureArchive: dim must be positive");
        if (frame_period_us == 0) throw InvalidArgument("FeatureArchive: frame period must be positive");
    }

    /// Appends an utterance. Rejects dimension mismatches, empty utterances and repeated ids.
    void add(std::string id, Matrix frames) {
        if (frames.cols() != dim_) throw DimensionMismatch(dim_, frames.cols(), "utterance '" + id + "'");
        if (frames.rows() == 0) throw InvalidArgument("utterance '" + id + "' has no frames");
        if (index_.contains(id))
            throw FormatError(FormatError::Kind::duplicate_id, "duplicate utterance id '" + id + "'");
        index_.emplace(id, utts_.size());
        utts_.push_back({std::move(id), std::move(frames)});
    }

    std::size_t dim() const noexcept { return dim_; }
    std::uint32_t frame_period_us() const noexcept { return frame_period_us_; }
    std::size_t size() const noexcept { return utts_.size(); }
    bool empty() const noexcept { return utts_.empty(); }

    const std::vector<Utterance>& utterances() const noexcept { return utts_; }
    const Utterance& operator[](std::size_t i) const { return utts_[i]; }

    const Matrix* find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        return it == index_.end() ? nullptr : &utts_[it->second].frames;
    }
    const Matrix& frames(std::string_view id) const {
        const Matrix* m = find(id);
        if (!m) throw InvalidArgument("unknown utterance id '" + std::string(id) + "'");
        return *m;
    }

    std::size_t total_frames() const noexcept {
        std::size_t n = 0;
        for (const auto& u : utts_) n += u.frames.rows();
        return n;
    }

    Provenance provenance;

    friend bool operator==(const FeatureArchive& a, const FeatureArchive& b) {
        if (a.dim_ != b.dim_ || a.frame_period_us_ != b.frame_period_us_ || a.utts_.size() != b.utts_.size())
            return false;
        for (std::size_t i = 0; i < a.utts_.size(); ++i)
            if (a.utts_[i].id != b.utts_[i].id || !(a.utts_[i].frames == b.utts_[i].frames)) return false;
        return true;
    }

private:
    std::size_t dim_;
    std::uint32_t frame_period_us_;
    std::vector<Utterance> utts_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class Gender { F, M };

inline std::string_view to_string(Gender g) { return g == Gender::F ? "F" : "M"; }

struct ManifestRecord {
    std::string utt_id;
    std::string speaker_id;
    Gender gender = Gender::F;
    std::size_t num_frames = 0;
};

class Manifest {
public:
    Manifest() = default;

    void add(ManifestRecord rec) {
        if (index_.contains(rec.utt_id))
            throw InvalidArgument("manifest: duplicate utterance id '" + rec.utt_id + "'");
        index_.emplace(rec.utt_id, records_.size());
        records_.push_back(std::move(rec));
    }

    const std::vector<ManifestRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }

    const ManifestRecord* find(std::string_view utt_id) const {
        auto it = index_.find(std::string(utt_id));
        return it == index_.end() ? nullptr : &records_[it->second];
    }
    const ManifestRecord& at(std::string_view utt_id) const {
        const ManifestRecord* r = find(utt_id);
        if (!r) throw InvalidArgument("manifest: unknown utterance id '" + std::string(utt_id) + "'");
        return *r;
    }

    /// Speaker ids in sorted order.
    std::vector<std::string> speakers() const {
        std::map<std::string, int> seen;
        for (const auto& r : records_) seen[r.speaker_id] = 0;
        std::vector<std::string> out;
        for (auto& [k, v] : seen) out.push_back(k);
        return out;
    }

    /// Utterance ids of each speaker, in manifest order.
    std::map<std::string, std::vector<std::string>> utterances_by_speaker() const {
        std::map<std::string, std::vector<std::string>> out;
        for (const auto& r : records_) out[r.speaker_id].push_back(r.utt_id);
        return out;
    }

    /// Checks that every record names an archive utterance with a matching frame count.
    void validate_against(const FeatureArchive& archive) const {
        for (const auto& r : records_) {
            const Matrix* m = archive.find(r.utt_id);
            if (!m) throw InvalidArgument("manifest utterance '" + r.utt_id + "' missing from archive");
            if (m->rows() != r.num_frames)
                throw InvalidArgument("manifest utterance '" + r.utt_id + "' declares " +
                                      std::to_string(r.num_frames) + " frames, archive has " +
                                      std::to_string(m->rows()));
        }
    }

private:
    std::vector<ManifestRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Half-open frame interval [start, end) labelled with a phone.
struct Segment {
    std::string phone;
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - start; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct UtteranceAlignment {
    std::string utt_id;
    std::vector<Segment> segments;

    std::size_t num_frames() const noexcept { return segments.empty() ? 0 : segments.back().end; }

    /// Phone label of every frame.
    std::vector<std::string> frame_labels() const {
        std::vector<std::string> out;
        out.reserve(num_frames());
        for (const auto& s : segments) out.insert(out.end(), s.length(), s.phone);
        return out;
    }
};

/// Frame-level phone segmentation per utterance. Segments tile [0, T) contiguously.
class Alignment {
public:
    /// Adds one segment, enforcing contiguity with the previous segment of the same utterance.
    void append(const std::string& utt_id, Segment seg, std::size_t line = 0) {
        auto where = [&] { return (line ? "line " + std::to_string(line) + ": " : std::string()) + "utterance '" + utt_id + "'"; };
        if (seg.end <= seg.start)
            throw AlignmentError(AlignmentError::Kind::empty_segment, where() + ": segment end must exceed start");
        auto it = index_.find(utt_id);
        if (it == index_.end()) {
            if (seg.start != 0)
                throw AlignmentError(AlignmentError::Kind::bad_start, where() + ": first segment must start at frame 0");
            index_.emplace(utt_id, utts_.size());
            utts_.push_back({utt_id, {std::move(seg)}});
            return;
        }
        auto& segs = utts_[it->second].segments;
        const std::size_t prev_end = segs.back().end;
        if (seg.start > prev_end)
            throw AlignmentError(AlignmentError::Kind::gap, where() + ": gap between frame " + std::to_string(prev_end) +
                                                                " and " + std::to_string(seg.start));
        if (seg.start < prev_end)
            throw AlignmentError(AlignmentError::Kind::overlap, where() + ": segment starting at " +
                                                                    std::to_string(seg.start) + " overlaps previous end " +
                                                                    std::to_string(prev_end));
        segs.push_back(std::move(seg));
    }

    const std::vector<UtteranceAlignment>& utterances() const noexcept { return utts_; }
    std::size_t size() const noexcept { return utts_.size(); }

    const UtteranceAlignment* find(std::string_view utt_id) const {
        auto it = index_.find(std::string(utt_id));
        return it == index_.end() ? nullptr : &utts_[it->second];
    }
    const UtteranceAlignment& at(std::string_view utt_id) const {
        const auto* a = find(utt_id);
        if (!a)
            throw AlignmentError(AlignmentError::Kind::unknown_utterance,
                                 "alignment: unknown utterance '" + std::string(utt_id) + "'");
        return *a;
    }

    /// Every aligned utterance must be in the manifest.
    void validate_against(const Manifest& manifest) const {
        for (const auto& u : utts_)
            if (!manifest.find(u.utt_id))
                throw AlignmentError(AlignmentError::Kind::unknown_utterance,
                                     "alignment utterance '" + u.utt_id + "' not in manifest");
    }

    /// Every aligned utterance must exist in the archive with exactly the aligned frame count.
    void validate_against(const FeatureArchive& archive) const {
        for (const auto& u : utts_) {
            const Matrix* m = archive.find(u.utt_id);
            if (!m)
                throw AlignmentError(AlignmentError::Kind::unknown_utterance,
                                     "alignment utterance '" + u.utt_id + "' not in archive");
            if (m->rows() != u.num_frames())
                throw AlignmentError(AlignmentError::Kind::length_mismatch,
                                     "alignment for '" + u.utt_id + "' covers " + std::to_string(u.num_frames()) +
                                         " frames, archive has " + std::to_string(m->rows()));
        }
    }

private:
    std::vector<UtteranceAlignment> utts_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace zrnorm
