#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "zrnorm/error.hpp"

namespace zrnorm {

/// Dense row-major matrix of doubles. Rows are frames, columns are feature dimensions.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw DimensionMismatch(cols_, r.size(), "Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    void append_row(std::span<const double> values) {
        if (rows_ == 0 && cols_ == 0) cols_ = values.size();
        if (values.size() != cols_) throw DimensionMismatch(cols_, values.size(), "Matrix::append_row");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    /// Copy of rows [begin, end).
    Matrix slice_rows(std::size_t begin, std::size_t end) const {
        assert(begin <= end && end <= rows_);
        Matrix out(end - begin, cols_);
        std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                  data_.begin() + static_cast<std::ptrdiff_t>(end * cols_), out.data_.begin());
        return out;
    }

    /// Copy keeping only the listed columns, in the listed order.
    Matrix select_cols(std::span<const std::size_t> keep) const {
        Matrix out(rows_, keep.size());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t j = 0; j < keep.size(); ++j) out(r, j) = (*this)(r, keep[j]);
        return out;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Stack matrices vertically. All inputs must share a column count.
inline Matrix vstack(std::span<const Matrix* const> parts) {
    std::size_t rows = 0;
    std::size_t cols = parts.empty() ? 0 : parts.front()->cols();
    for (const Matrix* m : parts) {
        if (m->cols() != cols) throw DimensionMismatch(cols, m->cols(), "vstack");
        rows += m->rows();
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix* m : parts) {
        std::copy(m->data().begin(), m->data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(at));
        at += m->data().size();
    }
    return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace zrnorm
