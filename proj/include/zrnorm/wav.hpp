#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "zrnorm/corpus_io.hpp"

namespace zrnorm {

struct WavData {
    std::uint32_t sample_rate = 0;
    std::vector<double> samples; // scaled to [-1, 1)
};

/// Reads a RIFF/WAVE file holding 16-bit PCM mono audio. Other encodings are rejected.
inline WavData read_wav(std::istream& in, const std::string& name = "wav") {
    using detail::get_le;
    auto fail = [&](FormatError::Kind k, const std::string& msg) { return FormatError(k, name + ": " + msg); };
    char tag[4];
    auto read_tag = [&] {
        if (!in.read(tag, 4)) throw fail(FormatError::Kind::truncated, "truncated header");
        return std::string(tag, 4);
    };
    if (read_tag() != "RIFF") throw fail(FormatError::Kind::bad_magic, "not a RIFF file");
    get_le<std::uint32_t>(in, "wav header");
    if (read_tag() != "WAVE") throw fail(FormatError::Kind::bad_magic, "not a WAVE file");

    bool have_fmt = false;
    WavData out;
    while (true) {
        const std::string id = read_tag();
        const auto size = get_le<std::uint32_t>(in, "wav header");
        if (id == "fmt ") {
            if (size < 16) throw fail(FormatError::Kind::invalid_value, "fmt chunk too small");
            const auto format = get_le<std::uint16_t>(in, "wav header");
            const auto channels = get_le<std::uint16_t>(in, "wav header");
            out.sample_rate = get_le<std::uint32_t>(in, "wav header");
            get_le<std::uint32_t>(in, "wav header"); // byte rate
            get_le<std::uint16_t>(in, "wav header"); // block align
            const auto bits = get_le<std::uint16_t>(in, "wav header");
            in.ignore(size - 16 + (size & 1));
            if (format != 1) throw fail(FormatError::Kind::invalid_value, "only PCM encoding is supported");
            if (channels != 1) throw fail(FormatError::Kind::invalid_value, "only mono audio is supported");
            if (bits != 16) throw fail(FormatError::Kind::invalid_value, "only 16-bit samples are supported");
            if (out.sample_rate == 0) throw fail(FormatError::Kind::invalid_value, "zero sample rate");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw fail(FormatError::Kind::invalid_value, "data chunk before fmt chunk");
            const std::size_t n = size / 2;
            out.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                out.samples[i] = static_cast<double>(static_cast<std::int16_t>(get_le<std::uint16_t>(in, "wav header"))) / 32768.0;
            return out;
        } else {
            in.ignore(size + (size & 1));
        }
        if (!in) throw fail(FormatError::Kind::truncated, "missing data chunk");
    }
}

inline WavData read_wav(const std::filesystem::path& p) {
    auto in = detail::open_in(p, true);
    return read_wav(in, p.string());
}

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
inline void write_wav(const std::filesystem::path& p, const std::vector<double>& samples, std::uint32_t sample_rate) {
    using detail::put_le;
    auto out = detail::open_out(p, true);
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out.write("RIFF", 4);
    put_le<std::uint32_t>(out, 36 + data_bytes);
    out.write("WAVEfmt ", 8);
    put_le<std::uint32_t>(out, 16);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint32_t>(out, sample_rate);
    put_le<std::uint32_t>(out, sample_rate * 2);
    put_le<std::uint16_t>(out, 2);
    put_le<std::uint16_t>(out, 16);
    out.write("data", 4);
    put_le<std::uint32_t>(out, data_bytes);
    for (double s : samples) {
        const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
    }
}

} // namespace zrnorm
