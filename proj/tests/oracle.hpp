//
// Copyright 2026 The fpca Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Test-only helpers. The dense SVD oracle is Eigen's two-sided JacobiSVD,
// which shares no code with the library kernels it checks.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fpca/matrix.hpp"

namespace fpca::testing {

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = m(i, j);
  return out;
}

inline Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, j) = m(i, j);
  return out;
}

inline Matrix random_gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = dist(gen);
  return m;
}

inline std::vector<double> oracle_singular_values(const Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
  const auto& s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

// Leading r left singular vectors from the oracle.
inline Matrix oracle_left(const Matrix& m, std::size_t r) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m), Eigen::ComputeThinU);
  return from_eigen(svd.matrixU().leftCols(static_cast<Eigen::Index>(r)));
}

// ‖U1U1ᵀ − U2U2ᵀ‖_F formed explicitly.
inline double explicit_projector_distance(const Matrix& u1, const Matrix& u2) {
  const Eigen::MatrixXd a = to_eigen(u1);
  const Eigen::MatrixXd b = to_eigen(u2);
  return (a * a.transpose() - b * b.transpose()).norm();
}

inline double max_relative_error(const std::vector<double>& got, const std::vector<double>& want) {
  double e = 0.0;
  const double scale = want.empty() ? 1.0 : std::max(want.front(), 1e-300);
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double g = i < got.size() ? got[i] : 0.0;
    e = std::max(e, std::abs(g - want[i]) / scale);
  }
  return e;
}

}  // namespace fpca::testing
