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

// Evaluation metrics. Everything works from factors and inner products, so
// no d x d projector is ever formed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpca/error.hpp"
#include "fpca/linalg.hpp"
#include "fpca/matrix.hpp"

namespace fpca {

namespace detail {

inline constexpr double kOrthonormalTolerance = 1e-8;

inline void require_orthonormal(const Matrix& u, const char* who) {
  const Matrix g = multiply_tn(u, u);
  for (std::size_t j = 0; j < g.cols(); ++j)
    for (std::size_t i = 0; i < g.rows(); ++i)
      if (std::abs(g(i, j) - (i == j ? 1.0 : 0.0)) > kOrthonormalTolerance)
        throw InvalidArgument(std::string(who) + ": basis is not column-orthonormal");
}

inline double squared_norm(const Matrix& m) {
  double s = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (double x : m.col(j)) s += x * x;
  return s;
}

// All singular values of m, zeros included.
inline std::vector<double> all_singular_values(const Matrix& m) {
  const std::size_t k = std::min(m.rows(), m.cols());
  std::vector<double> s;
  if (k == 0) return s;
  s = truncated_svd(m, k).values;
  s.resize(k, 0.0);
  return s;
}

}  // namespace detail

// ‖Y − SVD_r(Y)‖_F = sqrt(Σ_{i>r} σ_i²).
inline double residual_rho(const Matrix& y, std::size_t r) {
  const std::size_t k = std::min(y.rows(), y.cols());
  if (r < 1 || r > k)
    throw InvalidArgument("residual_rho: rank " + std::to_string(r) + " out of range [1, " + std::to_string(k) + "]");
  const auto s = detail::all_singular_values(y);
  double tail = 0.0;
  for (std::size_t i = r; i < s.size(); ++i) tail += s[i] * s[i];
  return std::sqrt(tail);
}

// ‖Y − U·Uᵀ·Y‖_F² / n via (‖Y‖_F² − ‖UᵀY‖_F²) / n.
inline double projection_error(const Matrix& y, const Matrix& u) {
  detail::require(u.rows() == y.rows(), "projection_error: basis and data dimensions differ");
  detail::require(y.cols() >= 1, "projection_error: empty data");
  detail::require_orthonormal(u, "projection_error");
  const double diff = detail::squared_norm(y) - detail::squared_norm(multiply_tn(u, y));
  return std::max(0.0, diff) / static_cast<double>(y.cols());
}

// ‖Y − U·Uᵀ·Y‖_F, formed column by column.
inline double reconstruction_error(const Matrix& y, const Matrix& u) {
  detail::require(u.rows() == y.rows(), "reconstruction_error: basis and data dimensions differ");
  const Matrix p = multiply_tn(u, y);
  double s = 0.0;
  std::vector<double> col(y.rows());
  for (std::size_t j = 0; j < y.cols(); ++j) {
    std::copy(y.col(j).begin(), y.col(j).end(), col.begin());
    for (std::size_t k = 0; k < u.cols(); ++k) {
      const double c = p(k, j);
      const auto uk = u.col(k);
      for (std::size_t i = 0; i < col.size(); ++i) col[i] -= c * uk[i];
    }
    for (double x : col) s += x * x;
  }
  return std::sqrt(s);
}

struct Overlap {
  double signed_value;
  double abs_value;
};

inline Overlap qa_overlap(std::span<const double> v, std::span<const double> vhat) {
  detail::require(v.size() == vhat.size(), "qa_overlap: length mismatch");
  for (auto x : {norm2(v), norm2(vhat)})
    if (std::abs(x - 1.0) > 1e-8) throw InvalidArgument("qa_overlap: inputs must be unit vectors");
  const double s = std::clamp(dot(v, vhat), -1.0, 1.0);
  return {s, std::abs(s)};
}

// ‖U1U1ᵀ − U2U2ᵀ‖_F = sqrt(r1 + r2 − 2‖U1ᵀU2‖_F²).
inline double subspace_distance(const Matrix& u1, const Matrix& u2) {
  if (u1.rows() != u2.rows())
    throw InvalidArgument("subspace_distance: dimension mismatch (" + std::to_string(u1.rows()) + " vs " +
                          std::to_string(u2.rows()) + ")");
  const double c = detail::squared_norm(multiply_tn(u1, u2));
  return std::sqrt(std::max(0.0, static_cast<double>(u1.cols() + u2.cols()) - 2.0 * c));
}

namespace detail {

// Orthogonal polar factor P·Qᵀ of a square M = P·S·Qᵀ. Left vectors for
// (numerically) zero singular values are completed from canonical axes.
inline Matrix polar_factor(const Matrix& m) {
  const std::size_t k = m.rows();
  Matrix w = m;
  Matrix v = Matrix::identity(k);
  one_sided_jacobi(w, &v);
  double top = 0.0;
  std::vector<double> sigma(k);
  for (std::size_t j = 0; j < k; ++j) top = std::max(top, sigma[j] = norm2(w.col(j)));
  const double thr = zero_threshold(k, k, top);
  Matrix u(k, k);
  std::vector<std::size_t> missing;
  std::vector<std::size_t> done;
  for (std::size_t j = 0; j < k; ++j) {
    if (sigma[j] > thr) {
      for (std::size_t i = 0; i < k; ++i) u(i, j) = w(i, j) / sigma[j];
      done.push_back(j);
    } else {
      missing.push_back(j);
    }
  }
  std::size_t axis = 0;
  for (std::size_t j : missing) {
    for (; axis < k; ++axis) {
      std::vector<double> c(k, 0.0);
      c[axis] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t t : done) {
          const double h = dot(u.col(t), c);
          for (std::size_t i = 0; i < k; ++i) c[i] -= h * u(i, t);
        }
      const double n = norm2(c);
      if (n > 0.5) {
        for (std::size_t i = 0; i < k; ++i) u(i, j) = c[i] / n;
        done.push_back(j);
        ++axis;
        break;
      }
    }
  }
  return multiply_nt(u, v);
}

}  // namespace detail

// min over orthogonal W of ‖A·W − B‖_F. W is the polar factor of AᵀB and the
// residual is formed explicitly, so exact alignments give values near eps
// rather than near √eps. Wide inputs are reduced first: with Aᵀ = Qa·Ra and
// Bᵀ = Qb·Rb the value equals ‖Raᵀ·W' − Rbᵀ‖_F for W' the polar factor of
// Ra·Rbᵀ.
inline double procrustes_align_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("procrustes_align_error: shape mismatch");
  require_finite(a, "procrustes_align_error");
  require_finite(b, "procrustes_align_error");
  if (a.cols() > a.rows()) {
    const auto qa = economy_qr(a.transpose());
    const auto qb = economy_qr(b.transpose());
    const Matrix w = detail::polar_factor(multiply_nt(qa.r, qb.r));
    return (multiply(qa.r.transpose(), w) - qb.r.transpose()).frobenius_norm();
  }
  const Matrix w = detail::polar_factor(multiply_tn(a, b));
  return (multiply(a, w) - b).frobenius_norm();
}

// Least-squares non-decreasing fit (pool adjacent violators), unit weights.
inline std::vector<double> isotonic_increasing(std::span<const double> y) {
  std::vector<double> level;
  std::vector<std::size_t> width;
  for (double v : y) {
    level.push_back(v);
    width.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t w = width.back() + width[width.size() - 2];
      const double m = (level.back() * static_cast<double>(width.back()) +
                        level[level.size() - 2] * static_cast<double>(width[width.size() - 2])) /
                       static_cast<double>(w);
      level.pop_back();
      width.pop_back();
      level.back() = m;
      width.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t k = 0; k < level.size(); ++k) out.insert(out.end(), width[k], level[k]);
  return out;
}

inline const std::vector<std::string_view>& registered_metrics() {
  static const std::vector<std::string_view> names = {
      "rank",           "reconstruction_error", "projection_error", "log_projection_error",
      "residual_rho",   "omega",                "batch_width",      "runtime_seconds",
      "value",          "level_rank",           "merge_count",      "schedule_replay_max_diff",
      "qa_signed",      "qa_abs",               "subspace_distance", "depth_measured",
      "depth_bound",    "depth_ok",             "relative_reconstruction_error",
  };
  return names;
}

struct MetricRow {
  std::string run_id;
  std::size_t t = 0;
  std::string metric;
  double value = 0.0;
  std::string params_json = "{}";
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Appends rows as run_id,t,metric,value,params-json. Safe to share between
// threads.
class MetricSink {
 public:
  explicit MetricSink(std::ostream& out, bool header = true) : out_(out) {
    if (header) out_ << "run_id,t,metric,value,params\n";
  }

  void write(const MetricRow& row) {
    const auto& names = registered_metrics();
    if (std::find(names.begin(), names.end(), row.metric) == names.end())
      throw InvalidArgument("MetricSink: unregistered metric '" + row.metric + "'");
    if (!std::isfinite(row.value)) throw NonFiniteInput("MetricSink: non-finite value for " + row.metric);
    std::string line = quote(row.run_id) + "," + std::to_string(row.t) + "," + row.metric + "," +
                       format_double(row.value) + "," + quote(row.params_json) + "\n";
    std::lock_guard lock(mu_);
    out_ << line;
    ++rows_;
  }

  std::size_t rows() const {
    std::lock_guard lock(mu_);
    return rows_;
  }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

 private:
  std::ostream& out_;
  mutable std::mutex mu_;
  std::size_t rows_ = 0;
};

}  // namespace fpca
