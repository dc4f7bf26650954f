#ifndef OTROLL_MATRIX_HPP
#define OTROLL_MATRIX_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "otroll/errors.hpp"

namespace otroll {

/// Dense row-major matrix. Rows are time frames, columns are pitches.
template <typename T>
class Matrix {
public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  T& operator[](std::size_t linear) { return data_[linear]; }
  const T& operator[](std::size_t linear) const { return data_[linear]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  std::span<T> row(std::size_t r) {
    return std::span<T>(data_).subspan(r * cols_, cols_);
  }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
void require_same_shape(const Matrix<A>& a, const Matrix<B>& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape " + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()) + " does not match " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace otroll

#endif  // OTROLL_MATRIX_HPP
