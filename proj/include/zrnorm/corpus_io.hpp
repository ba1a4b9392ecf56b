#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "zrnorm/corpus.hpp"
#include "zrnorm/error.hpp"

namespace zrnorm {

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> buf;
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
    out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> buf;
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
        throw FormatError(FormatError::Kind::truncated, std::string("truncated stream while reading ") + what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

inline void put_f32(std::ostream& out, double value) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

inline double get_f32(std::istream& in, const char* what) {
    return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in, what)));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
    char buf[4] = {};
    in.read(buf, 4);
    if (in.gcount() != 4) throw FormatError(FormatError::Kind::truncated, "truncated stream while reading magic");
    if (std::string_view(buf, 4) != magic)
        throw FormatError(FormatError::Kind::bad_magic,
                          "bad magic '" + std::string(buf, 4) + "', expected '" + std::string(magic) + "'");
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

inline std::size_t parse_count(const std::string& s, std::size_t line, const char* what) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
    try {
        return static_cast<std::size_t>(std::stoull(s));
    } catch (const std::exception&) {
        throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
    }
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
    std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + p.string() + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + p.string() + "' for writing");
    return out;
}

} // namespace detail

inline constexpr std::uint32_t archive_version = 1;

/// ZRFA layout: "ZRFA", u32 version, u32 dim, u32 frame_period_us, u64 count, then per utterance
/// u16 id length, id bytes, u32 frames, frames*dim float32. All integers little-endian.
inline void write_archive(const FeatureArchive& archive, std::ostream& out) {
    out.write("ZRFA", 4);
    detail::put_le<std::uint32_t>(out, archive_version);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.dim()));
    detail::put_le<std::uint32_t>(out, archive.frame_period_us());
    detail::put_le<std::uint64_t>(out, archive.size());
    for (const auto& u : archive.utterances()) {
        if (u.id.size() > std::numeric_limits<std::uint16_t>::max())
            throw FormatError(FormatError::Kind::invalid_value, "utterance id too long: " + u.id.substr(0, 32));
        detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(u.id.size()));
        out.write(u.id.data(), static_cast<std::streamsize>(u.id.size()));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(u.frames.rows()));
        for (double v : u.frames.data()) detail::put_f32(out, v);
    }
    if (!out) throw FormatError(FormatError::Kind::io, "write failed");
}

inline FeatureArchive read_archive(std::istream& in) {
    detail::expect_magic(in, "ZRFA");
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != archive_version)
        throw FormatError(FormatError::Kind::version_mismatch,
                          "unsupported archive version " + std::to_string(version));
    const auto dim = detail::get_le<std::uint32_t>(in, "dim");
    const auto period = detail::get_le<std::uint32_t>(in, "frame period");
    const auto count = detail::get_le<std::uint64_t>(in, "utterance count");
    if (dim == 0) throw FormatError(FormatError::Kind::invalid_value, "archive dim is zero");
    if (period == 0) throw FormatError(FormatError::Kind::invalid_value, "archive frame period is zero");
    FeatureArchive archive(dim, period);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = detail::get_le<std::uint16_t>(in, "utterance id length");
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (in.gcount() != len) throw FormatError(FormatError::Kind::truncated, "truncated utterance id");
        const auto frames = detail::get_le<std::uint32_t>(in, "frame count");
        if (frames == 0) throw FormatError(FormatError::Kind::invalid_value, "utterance '" + id + "' has no frames");
        Matrix m(frames, dim);
        for (double& v : m.data()) v = detail::get_f32(in, "frame data");
        archive.add(std::move(id), std::move(m));
    }
    return archive;
}

inline void write_archive(const FeatureArchive& archive, const std::filesystem::path& path) {
    auto out = detail::open_out(path, true);
    write_archive(archive, out);
}

inline FeatureArchive read_archive(const std::filesystem::path& path) {
    auto in = detail::open_in(path, true);
    return read_archive(in);
}

/// Provenance sidecar: `<archive>.prov`, a single line `normalization=<none|utterance|speaker>`.
inline std::filesystem::path provenance_path(const std::filesystem::path& archive_path) {
    return archive_path.string() + ".prov";
}

inline void write_provenance(const Provenance& p, const std::filesystem::path& archive_path) {
    auto out = detail::open_out(provenance_path(archive_path));
    out << "normalization=" << to_string(p.normalization) << "\n";
}

inline Provenance read_provenance(const std::filesystem::path& archive_path) {
    Provenance p;
    const auto side = provenance_path(archive_path);
    if (!std::filesystem::exists(side)) return p;
    auto in = detail::open_in(side);
    std::string line;
    std::getline(in, line);
    if (line == "normalization=utterance") p.normalization = Provenance::Normalization::utterance;
    else if (line == "normalization=speaker") p.normalization = Provenance::Normalization::speaker;
    else if (line != "normalization=none") throw ParseError(1, "bad provenance sidecar '" + line + "'");
    return p;
}

/// Reads an archive together with its provenance sidecar, if any.
inline FeatureArchive load_archive(const std::filesystem::path& path) {
    FeatureArchive a = read_archive(path);
    a.provenance = read_provenance(path);
    return a;
}

inline void save_archive(const FeatureArchive& a, const std::filesystem::path& path) {
    write_archive(a, path);
    write_provenance(a.provenance, path);
}

// ---- manifest ----------------------------------------------------------------------------

inline constexpr std::string_view manifest_header = "utt_id,speaker_id,gender,num_frames";

inline Manifest read_manifest(std::istream& in) {
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header) {
            if (line != manifest_header) throw ParseError(lineno, "expected header '" + std::string(manifest_header) + "'");
            header = true;
            continue;
        }
        auto f = detail::split_csv(line);
        if (f.size() != 4) throw ParseError(lineno, "expected 4 comma-separated fields, got " + std::to_string(f.size()));
        if (f[0].empty() || f[1].empty()) throw ParseError(lineno, "empty utterance or speaker id");
        ManifestRecord r;
        r.utt_id = f[0];
        r.speaker_id = f[1];
        if (f[2] == "F") r.gender = Gender::F;
        else if (f[2] == "M") r.gender = Gender::M;
        else throw ParseError(lineno, "gender must be F or M, got '" + f[2] + "'");
        r.num_frames = detail::parse_count(f[3], lineno, "num_frames");
        try {
            m.add(std::move(r));
        } catch (const InvalidArgument& e) {
            throw ParseError(lineno, e.what());
        }
    }
    if (!header) throw ParseError(0, "manifest is empty (missing header)");
    return m;
}

inline void write_manifest(const Manifest& m, std::ostream& out) {
    out << manifest_header << "\n";
    for (const auto& r : m.records())
        out << r.utt_id << ',' << r.speaker_id << ',' << to_string(r.gender) << ',' << r.num_frames << "\n";
}

inline Manifest read_manifest(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    return read_manifest(in);
}
inline void write_manifest(const Manifest& m, const std::filesystem::path& p) {
    auto out = detail::open_out(p);
    write_manifest(m, out);
}

// ---- alignment ---------------------------------------------------------------------------

/// One segment per line: `utt_id phone start end`. Lines of one utterance must be consecutive
/// in frame order; segments must tile the utterance.
inline Alignment read_alignment(std::istream& in) {
    Alignment a;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        auto f = detail::split_ws(line);
        if (f.size() != 4) throw ParseError(lineno, "expected 'utt_id phone start end', got " + std::to_string(f.size()) + " fields");
        Segment s{f[1], detail::parse_count(f[2], lineno, "start frame"), detail::parse_count(f[3], lineno, "end frame")};
        a.append(f[0], std::move(s), lineno);
    }
    return a;
}

inline void write_alignment(const Alignment& a, std::ostream& out) {
    for (const auto& u : a.utterances())
        for (const auto& s : u.segments) out << u.utt_id << ' ' << s.phone << ' ' << s.start << ' ' << s.end << "\n";
}

inline Alignment read_alignment(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    return read_alignment(in);
}
inline void write_alignment(const Alignment& a, const std::filesystem::path& p) {
    auto out = detail::open_out(p);
    write_alignment(a, out);
}

} // namespace zrnorm
