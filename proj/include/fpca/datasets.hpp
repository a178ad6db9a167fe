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

// Synthetic generators, CSV input/output and column partitioning.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fpca/error.hpp"
#include "fpca/linalg.hpp"
#include "fpca/matrix.hpp"
#include "fpca/metrics.hpp"
#include "fpca/random.hpp"

namespace fpca {

struct SynthSpec {
  std::size_t d = 0;
  std::size_t n = 0;
  double alpha = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(d >= 1 && n >= 1, "SynthSpec: d and n must be >= 1");
    detail::require(alpha >= 0.0 && std::isfinite(alpha), "SynthSpec: alpha must be >= 0");
  }
};

namespace detail {

// Orthonormal columns from the QR of a seeded rows x cols Gaussian matrix.
inline Matrix random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix g(rows, cols);
  CounterRng rng(seed);
  rng.fill_normal(g);
  return economy_qr(g).q;
}

inline std::vector<double> power_law(std::size_t k, double alpha) {
  std::vector<double> s(k);
  for (std::size_t i = 0; i < k; ++i) s[i] = std::pow(static_cast<double>(i + 1), -alpha);
  return s;
}

}  // namespace detail

// Y = U·Σ·Vᵀ with U, V random orthonormal and Σ_ii = i^-α.
inline Matrix synth(const SynthSpec& spec) {
  spec.validate();
  const std::size_t k = std::min(spec.d, spec.n);
  const Matrix u = detail::random_orthonormal(spec.d, spec.d, derive_seed(spec.seed, 1)).cols_range(0, k);
  const Matrix v = detail::random_orthonormal(spec.n, k, derive_seed(spec.seed, 2));
  const auto s = detail::power_law(k, spec.alpha);
  return multiply_nt(scale_columns(u, std::span<const double>(s)), v);
}

// n samples of N(0, S·Λ·Sᵀ), S a random orthogonal basis and λ_i = i^-α.
inline Matrix synth_gaussian_cov(std::size_t d, std::size_t n, double alpha, std::uint64_t seed) {
  SynthSpec{d, n, alpha, seed}.validate();
  const Matrix s = detail::random_orthonormal(d, d, derive_seed(seed, 1));
  auto root = detail::power_law(d, alpha);
  for (double& x : root) x = std::sqrt(x);
  Matrix z(d, n);
  CounterRng rng(derive_seed(seed, 3));
  rng.fill_normal(z);
  return multiply(scale_columns(s, std::span<const double>(root)), z);
}

enum class Orientation { samples_as_rows, samples_as_columns };
enum class Normalization { none, unit_ball, max_norm };

// Divides every column by max(1, largest column norm). Returns the factor.
inline double normalize_unit_ball(Matrix& m) {
  double largest = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) largest = std::max(largest, norm2(m.col(j)));
  const double scale = 1.0 / std::max(1.0, largest);
  if (scale != 1.0) m *= scale;
  return scale;
}

// Scales every column by one common factor so the largest column norm is
// exactly 1. Unlike normalize_unit_ball this may enlarge the data. An all-zero
// matrix is left alone. Returns the factor.
inline double normalize_max_norm(Matrix& m) {
  double largest = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) largest = std::max(largest, norm2(m.col(j)));
  if (largest == 0.0) return 1.0;
  const double scale = 1.0 / largest;
  m *= scale;
  return scale;
}

struct LoadedMatrix {
  Matrix matrix;         // samples as columns
  double scale = 1.0;    // normalization factor applied
  bool header = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_number(std::string_view cell, double& out) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size();
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == ',') {
      cells.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return cells;
}

}  // namespace detail

inline LoadedMatrix read_csv(std::istream& in, Orientation orientation = Orientation::samples_as_rows,
                             Normalization normalization = Normalization::none) {
  std::vector<std::vector<double>> rows;
  LoadedMatrix out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (detail::trim(view).empty()) continue;
    const auto cells = detail::split_cells(view);
    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t k = 0; k < cells.size() && numeric; ++k) numeric = detail::parse_number(cells[k], values[k]);
    if (!numeric) {
      if (rows.empty() && !out.header) {
        out.header = true;
        continue;
      }
      throw DataError("CSV line " + std::to_string(line_no) + ": non-numeric cell");
    }
    if (!rows.empty() && values.size() != rows.front().size())
      throw DataError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(rows.front().size()) +
                      " cells, found " + std::to_string(values.size()));
    for (double v : values)
      if (!std::isfinite(v)) throw DataError("CSV line " + std::to_string(line_no) + ": non-finite value");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("CSV: no data rows");
  const std::size_t nr = rows.size();
  const std::size_t nc = rows.front().size();
  if (orientation == Orientation::samples_as_rows) {
    out.matrix = Matrix(nc, nr);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t k = 0; k < nc; ++k) out.matrix(k, i) = rows[i][k];
  } else {
    out.matrix = Matrix(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t k = 0; k < nc; ++k) out.matrix(i, k) = rows[i][k];
  }
  if (normalization == Normalization::unit_ball) out.scale = normalize_unit_ball(out.matrix);
  if (normalization == Normalization::max_norm) out.scale = normalize_max_norm(out.matrix);
  return out;
}

inline LoadedMatrix load_csv(const std::string& path, Orientation orientation = Orientation::samples_as_rows,
                             Normalization normalization = Normalization::none) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return read_csv(in, orientation, normalization);
  } catch (DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// Values with 17 significant digits, so reading back is lossless.
inline void write_csv(std::ostream& out, const Matrix& m, Orientation orientation = Orientation::samples_as_rows) {
  const bool by_sample = orientation == Orientation::samples_as_rows;
  const std::size_t nr = by_sample ? m.cols() : m.rows();
  const std::size_t nc = by_sample ? m.rows() : m.cols();
  std::string line;
  for (std::size_t i = 0; i < nr; ++i) {
    line.clear();
    for (std::size_t k = 0; k < nc; ++k) {
      if (k) line += ',';
      line += format_double(by_sample ? m(k, i) : m(i, k));
    }
    line += '\n';
    out << line;
  }
}

inline void save_csv(const std::string& path, const Matrix& m, Orientation orientation = Orientation::samples_as_rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, m, orientation);
  if (!out) throw DataError("write failed for '" + path + "'");
}

enum class PartitionPolicy { contiguous, round_robin, seeded_shuffle };

struct StreamPartition {
  std::vector<std::vector<std::size_t>> assignments;  // per client, increasing
};

// Contiguous and shuffled policies give the first n mod M clients one extra
// column, so sizes differ by at most one.
inline StreamPartition partition_columns(std::size_t n, std::size_t m, PartitionPolicy policy,
                                         std::uint64_t seed = 0) {
  detail::require(m >= 1, "partition_columns: need at least one client");
  if (m > n)
    throw InvalidArgument("partition_columns: " + std::to_string(m) + " clients for " + std::to_string(n) +
                          " columns");
  StreamPartition p;
  p.assignments.resize(m);
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  if (policy == PartitionPolicy::round_robin) {
    for (std::size_t j = 0; j < n; ++j) p.assignments[j % m].push_back(j);
    return p;
  }
  if (policy == PartitionPolicy::seeded_shuffle) {
    CounterRng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::size_t pos = 0;
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t take = n / m + (c < n % m ? 1 : 0);
    p.assignments[c].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                            order.begin() + static_cast<std::ptrdiff_t>(pos + take));
    std::sort(p.assignments[c].begin(), p.assignments[c].end());
    pos += take;
  }
  return p;
}

// One d x n_i matrix per client, columns in assignment order.
inline std::vector<Matrix> split_streams(const Matrix& y, const StreamPartition& p) {
  std::vector<Matrix> out;
  out.reserve(p.assignments.size());
  for (const auto& cols : p.assignments) {
    Matrix s(y.rows(), cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
      detail::require(cols[k] < y.cols(), "split_streams: column index out of range");
      std::copy(y.col(cols[k]).begin(), y.col(cols[k]).end(), s.col(k).begin());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fpca
