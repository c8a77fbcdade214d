#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "meter/core.hpp"

namespace meter {

// Dense row-major matrix. Rows are frames throughout this library.
template <class T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const { return rows == 0 || cols == 0; }

    // Rows [begin, end) as a new matrix.
    Matrix slice_rows(std::size_t begin, std::size_t end) const {
        end = std::min(end, rows);
        begin = std::min(begin, end);
        Matrix out(end - begin, cols);
        std::copy(data.begin() + begin * cols, data.begin() + end * cols, out.data.begin());
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace meter
