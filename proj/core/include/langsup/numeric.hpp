#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace langsup {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  // Builds from a list of equally sized rows. Throws a validation error on
  // ragged input.
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Vector row_vector(std::size_t r) const;
  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Pairwise (tree) summation: fixed reduction order for any input length.
double pairwise_sum(std::span<const double> v);

// Column-wise pairwise sum of the given rows of `m` (all rows when empty).
Vector pairwise_column_sum(const Matrix& m);

// Scales `v` to unit L2 norm in place. Returns false, leaving `v`
// untouched, when the norm is zero or not finite.
bool normalize_in_place(std::span<double> v);

bool all_finite(std::span<const double> v);

}  // namespace langsup
