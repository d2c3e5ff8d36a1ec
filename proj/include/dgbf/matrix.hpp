#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dgbf {

using Index = std::size_t;
using IndexSet = std::vector<Index>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(Index rows, Index cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(Index rows, Index cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data size does not match shape");
    }
  }

  [[nodiscard]] Index rows() const noexcept { return rows_; }
  [[nodiscard]] Index cols() const noexcept { return cols_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(Index r, Index c) noexcept { return data_[r * cols_ + c]; }
  double operator()(Index r, Index c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(Index r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(Index r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] std::vector<double> column(Index c) const {
    std::vector<double> out(rows_);
    for (Index r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }
  [[nodiscard]] std::vector<double>& data() noexcept { return data_; }

  // Returns the sub-matrix made of the given rows, in order (repeats allowed).
  [[nodiscard]] Matrix select_rows(std::span<const Index> rows) const {
    Matrix out(rows.size(), cols_);
    for (Index i = 0; i < rows.size(); ++i) {
      auto src = row(rows[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  // Returns a matrix holding one column per entry of `vectors`.
  static Matrix from_columns(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) return {};
    Matrix out(vectors.front().size(), vectors.size());
    for (Index c = 0; c < vectors.size(); ++c) {
      if (vectors[c].size() != out.rows()) {
        throw std::invalid_argument("Matrix::from_columns: ragged columns");
      }
      for (Index r = 0; r < out.rows(); ++r) out(r, c) = vectors[c][r];
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> data_;
};

}  // namespace dgbf
