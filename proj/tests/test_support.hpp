#pragma once

// Dense helpers shared by the unit tests. Everything here is independent of
// the tensor-train kernels it is used to check.

#include "qttfem/tensor_train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace qttfem::testing {

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

inline Eigen::Map<const Vector> as_eigen(const std::vector<double>& v) {
  return {v.data(), static_cast<Index>(v.size())};
}

/// Random TT operator with the given row/col dims and interior ranks.
inline TTOperator random_operator(std::vector<Index> rows, std::vector<Index> cols, std::vector<Index> ranks,
                                  std::mt19937_64& rng) {
  std::vector<Index> fused(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) fused[k] = rows[k] * cols[k];
  return TTOperator::from_fused(TensorTrain::random(fused, ranks, rng), rows, cols);
}

/// Dense entry by explicit core-slice products (the definitional formula).
inline double entry_by_slices(const TensorTrain& t, const std::vector<Index>& idx) {
  Matrix acc = Matrix::Ones(1, 1);
  for (Index k = 0; k < t.order(); ++k) acc = acc * t.core(k).slice(idx[static_cast<std::size_t>(k)]);
  return acc(0, 0);
}

}  // namespace qttfem::testing
