#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "zrnorm/corpus_io.hpp"

namespace zrnorm {

/// Positive/negative stimulus pair (word vs non-word, grammatical vs ungrammatical).
struct TaskPair {
    std::string pair_id;
    std::string pos_utt_id;
    std::string neg_utt_id;
};

/// Stimulus pair with a human similarity judgment.
struct SimiItem {
    std::string pair_id;
    std::string utt_a;
    std::string utt_b;
    double human_score = 0.0;
};

inline constexpr std::string_view pairs_header = "pair_id,pos_utt_id,neg_utt_id";
inline constexpr std::string_view simi_header = "pair_id,utt_a,utt_b,human_score";

inline std::vector<TaskPair> read_pairs(std::istream& in) {
    std::vector<TaskPair> out;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        if (line.back() == '\r') line.pop_back();
        if (!header) {
            if (line != pairs_header) throw ParseError(lineno, "expected header '" + std::string(pairs_header) + "'");
            header = true;
            continue;
        }
        auto f = detail::split_csv(line);
        if (f.size() != 3) throw ParseError(lineno, "expected 3 fields");
        out.push_back({f[0], f[1], f[2]});
    }
    if (!header) throw ParseError(0, "pairs file is empty (missing header)");
    return out;
}

inline void write_pairs(const std::vector<TaskPair>& pairs, std::ostream& out) {
    out << pairs_header << "\n";
    for (const auto& p : pairs) out << p.pair_id << ',' << p.pos_utt_id << ',' << p.neg_utt_id << "\n";
}

inline std::vector<SimiItem> read_simi(std::istream& in) {
    std::vector<SimiItem> out;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        if (line.back() == '\r') line.pop_back();
        if (!header) {
            if (line != simi_header) throw ParseError(lineno, "expected header '" + std::string(simi_header) + "'");
            header = true;
            continue;
        }
        auto f = detail::split_csv(line);
        if (f.size() != 4) throw ParseError(lineno, "expected 4 fields");
        double score;
        try {
            std::size_t used = 0;
            score = std::stod(f[3], &used);
            if (used != f[3].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(lineno, "invalid human_score '" + f[3] + "'");
        }
        out.push_back({f[0], f[1], f[2], score});
    }
    if (!header) throw ParseError(0, "similarity file is empty (missing header)");
    return out;
}

inline void write_simi(const std::vector<SimiItem>& items, std::ostream& out) {
    out << simi_header << "\n";
    out.precision(17);
    for (const auto& s : items) out << s.pair_id << ',' << s.utt_a << ',' << s.utt_b << ',' << s.human_score << "\n";
}

inline std::vector<TaskPair> read_pairs(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    return read_pairs(in);
}
inline void write_pairs(const std::vector<TaskPair>& pairs, const std::filesystem::path& p) {
    auto out = detail::open_out(p);
    write_pairs(pairs, out);
}
inline std::vector<SimiItem> read_simi(const std::filesystem::path& p) {
    auto in = detail::open_in(p);
    return read_simi(in);
}
inline void write_simi(const std::vector<SimiItem>& items, const std::filesystem::path& p) {
    auto out = detail::open_out(p);
    write_simi(items, out);
}

} // namespace zrnorm
