#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "zrnorm/error.hpp"
#include "zrnorm/matrix.hpp"

namespace zrnorm {

/// Non-owning view of consecutive rows of a matrix.
class FrameView {
public:
    FrameView() = default;
    FrameView(const Matrix& m) : FrameView(m, 0, m.rows()) {} // NOLINT(google-explicit-constructor)
    FrameView(const Matrix& m, std::size_t begin, std::size_t end)
        : data_(m.data().data() + begin * m.cols()), rows_(end - begin), cols_(m.cols()) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const double> row(std::size_t r) const { return {data_ + r * cols_, cols_}; }

private:
    const double* data_ = nullptr;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

/// 1 - cosine similarity, in [0, 2]. A zero vector is at distance 1 from any non-zero
/// vector and 0 from another zero vector.
inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return (na == 0.0 && nb == 0.0) ? 0.0 : 1.0;
    const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
    return 1.0 - c;
}

namespace dtw_detail {

struct Cell {
    double sum;
    std::size_t len;
};

/// Lexicographic: lower accumulated cost, then fewer path nodes.
inline bool better(const Cell& a, const Cell& b) { return a.sum < b.sum || (a.sum == b.sum && a.len < b.len); }

inline std::vector<double> norms(const FrameView& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = std::sqrt(dot(x.row(i), x.row(i)));
    return out;
}

} // namespace dtw_detail

/// Mean frame cost along the minimum-cost monotone alignment path with steps
/// (1,0), (0,1), (1,1). Among equal-cost paths the one with fewer nodes is taken.
inline double dtw_distance(const FrameView& x, const FrameView& y) {
    using dtw_detail::Cell;
    if (x.rows() == 0 || y.rows() == 0) throw InvalidArgument("dtw_distance: empty sequence");
    if (x.cols() != y.cols()) throw DimensionMismatch(x.cols(), y.cols(), "dtw_distance");
    const auto nx = dtw_detail::norms(x);
    const auto ny = dtw_detail::norms(y);
    auto cost = [&](std::size_t i, std::size_t j) {
        if (nx[i] == 0.0 || ny[j] == 0.0) return (nx[i] == 0.0 && ny[j] == 0.0) ? 0.0 : 1.0;
        return 1.0 - std::clamp(dot(x.row(i), y.row(j)) / (nx[i] * ny[j]), -1.0, 1.0);
    };

    const std::size_t m = y.rows();
    std::vector<Cell> prev(m), cur(m);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = cost(i, j);
            if (i == 0 && j == 0) {
                cur[j] = {c, 1};
                continue;
            }
            Cell best{0.0, 0};
            bool have = false;
            auto consider = [&](const Cell& cand) {
                if (!have || dtw_detail::better(cand, best)) {
                    best = cand;
                    have = true;
                }
            };
            if (i > 0 && j > 0) consider(prev[j - 1]);
            if (i > 0) consider(prev[j]);
            if (j > 0) consider(cur[j - 1]);
            cur[j] = {c + best.sum, best.len + 1};
        }
        std::swap(prev, cur);
    }
    const Cell& end = prev[m - 1];
    return end.sum / static_cast<double>(end.len);
}

inline double dtw_distance(const Matrix& x, const Matrix& y) { return dtw_distance(FrameView(x), FrameView(y)); }

} // namespace zrnorm
