#include "langsup/numeric.hpp"

#include <cmath>
#include <string>

#include "langsup/error.hpp"

namespace langsup {

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      throw_validation("ragged matrix: row " + std::to_string(r) + " has " +
                       std::to_string(rows[r].size()) + " values, expected " +
                       std::to_string(m.cols()));
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Vector Matrix::row_vector(std::size_t r) const {
  auto s = row(r);
  return {s.begin(), s.end()};
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

namespace {

constexpr std::size_t kPairwiseLeaf = 8;

double pairwise_sum_strided(const double* p, std::size_t n, std::size_t stride) {
  if (n <= kPairwiseLeaf) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += p[i * stride];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_strided(p, half, stride) +
         pairwise_sum_strided(p + half * stride, n - half, stride);
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
  return pairwise_sum_strided(v.data(), v.size(), 1);
}

Vector pairwise_column_sum(const Matrix& m) {
  Vector out(m.cols(), 0.0);
  if (m.rows() == 0) return out;
  const double* base = m.data().data();
  for (std::size_t c = 0; c < m.cols(); ++c)
    out[c] = pairwise_sum_strided(base + c, m.rows(), m.cols());
  return out;
}

bool normalize_in_place(std::span<double> v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) return false;
  for (double& x : v) x /= n;
  return true;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace langsup
