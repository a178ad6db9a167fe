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

// Gaussian input perturbation for (ε, δ)-DP covariance estimation.
//
// The streaming mechanism perturbs the covariance (1/n)·X·Xᵀ one column block
// at a time with an independent, non-symmetric d x c Gaussian mask; the
// symmetric variant (one draw per entry on and below the diagonal) is kept as
// a reference comparator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "fpca/error.hpp"
#include "fpca/matrix.hpp"
#include "fpca/random.hpp"

namespace fpca {

struct DpConfig {
  double epsilon = 0.1;
  double delta = 0.1;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("DpConfig: epsilon must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("DpConfig: delta must lie in (0, 1)");
  }
};

enum class NoiseFlavor { streaming_nonsymmetric, sulq_symmetric };

struct NoiseScale {
  double omega = 0.0;  // standard deviation of every mask entry
  NoiseFlavor flavor = NoiseFlavor::streaming_nonsymmetric;
};

struct MaskedCovBlock {
  Matrix block;            // d x (col_end - col_begin)
  std::size_t col_begin;   // covariance columns [col_begin, col_end)
  std::size_t col_end;
};

// c = min(d, 64) unless configured otherwise.
inline std::size_t default_cov_block_width(std::size_t d) { return std::min<std::size_t>(d, 64); }

namespace detail {

inline void require_sizes(std::size_t d, std::size_t n, const char* who) {
  if (d < 1 || n < 1) throw InvalidArgument(std::string(who) + ": d and n must be >= 1");
}

inline double checked_log(double arg, const char* who) {
  if (!(arg > 1.0))
    throw CalibrationError(std::string(who) + ": log argument " + std::to_string(arg) +
                           " <= 1, calibration undefined for these (d, delta)");
  return std::log(arg);
}

// (4d/ε)·√(2·log(d²/(δ√(2π)))) + √(2/ε): n·ω for the streaming mask.
inline double streaming_numerator(const DpConfig& dp, std::size_t d, const char* who) {
  const double dd = static_cast<double>(d);
  const double l = checked_log(dd * dd / (dp.delta * std::sqrt(2.0 * std::numbers::pi)), who);
  return 4.0 * dd / dp.epsilon * std::sqrt(2.0 * l) + std::sqrt(2.0 / dp.epsilon);
}

}  // namespace detail

// ω(ε, δ, d, n) = (4d/(εn))·√(2·log(d²/(δ√(2π)))) + √2/(√ε·n)
inline NoiseScale omega_streaming(const DpConfig& dp, std::size_t d, std::size_t n) {
  dp.validate();
  detail::require_sizes(d, n, "omega_streaming");
  return {detail::streaming_numerator(dp, d, "omega_streaming") / static_cast<double>(n),
          NoiseFlavor::streaming_nonsymmetric};
}

// ω(ε, δ, d, n) = ((d+1)/(nε))·√(2·log((d²+d)/(2δ√(2π)))) + 1/(n√ε)
inline NoiseScale omega_symmetric_sulq(const DpConfig& dp, std::size_t d, std::size_t n) {
  dp.validate();
  detail::require_sizes(d, n, "omega_symmetric_sulq");
  const double dd = static_cast<double>(d);
  const double nn = static_cast<double>(n);
  const double l = detail::checked_log((dd * dd + dd) / (2.0 * dp.delta * std::sqrt(2.0 * std::numbers::pi)),
                                       "omega_symmetric_sulq");
  return {(dd + 1.0) / (nn * dp.epsilon) * std::sqrt(2.0 * l) + 1.0 / (nn * std::sqrt(dp.epsilon)),
          NoiseFlavor::sulq_symmetric};
}

// Smallest n with omega_streaming(dp, d, n) <= omega0.
inline std::size_t min_batch_size(const DpConfig& dp, std::size_t d, double omega0) {
  dp.validate();
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw InvalidArgument("min_batch_size: omega0 must be > 0");
  detail::require_sizes(d, 1, "min_batch_size");
  const double n = std::ceil(detail::streaming_numerator(dp, d, "min_batch_size") / omega0);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

inline std::size_t min_batch_size(const DpConfig& dp, std::size_t d, const NoiseScale& omega0) {
  return min_batch_size(dp, d, omega0.omega);
}

// d x c matrix of i.i.d. N(0, ω²) draws.
inline Matrix gaussian_mask(std::size_t d, std::size_t c, const NoiseScale& scale, CounterRng& rng) {
  Matrix m(d, c);
  rng.fill_normal(m, scale.omega);
  return m;
}

// d x d symmetric mask: entries on and below the diagonal drawn once, mirrored.
inline Matrix symmetric_gaussian_mask(std::size_t d, const NoiseScale& scale, CounterRng& rng) {
  Matrix m(d, d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = j; i < d; ++i) {
      m(i, j) = scale.omega * rng.normal();
      m(j, i) = m(i, j);
    }
  return m;
}

// Streams the blocks (1/b)·B·B[cols]ᵀ + N over covariance column ranges of
// width c (the last one may be narrower), handing each block to `sink`.
// Only one d x c block is alive at a time.
template <typename Sink>
void for_each_masked_block(const Matrix& batch, std::size_t c, const NoiseScale& scale, CounterRng& rng,
                           Sink&& sink) {
  const std::size_t d = batch.rows();
  const std::size_t b = batch.cols();
  if (c < 1 || c > d)
    throw InvalidArgument("masked_cov_blocks: block width " + std::to_string(c) + " out of range [1, " +
                          std::to_string(d) + "]");
  detail::require(b >= 1, "masked_cov_blocks: empty batch");
  require_finite(batch, "masked_cov_blocks");
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t begin = 0; begin < d; begin += c) {
    const std::size_t end = std::min(d, begin + c);
    MaskedCovBlock blk{gaussian_mask(d, end - begin, scale, rng), begin, end};
    for (std::size_t j = 0; j < end - begin; ++j) {
      double* out = blk.block.col(j).data();
      for (std::size_t t = 0; t < b; ++t) {
        const double w = batch(begin + j, t) * inv_b;
        if (w == 0.0) continue;
        const double* x = batch.col(t).data();
        for (std::size_t i = 0; i < d; ++i) out[i] += x[i] * w;
      }
    }
    sink(blk);
  }
}

inline std::vector<MaskedCovBlock> masked_cov_blocks(const Matrix& batch, std::size_t c, const NoiseScale& scale,
                                                     CounterRng& rng) {
  std::vector<MaskedCovBlock> blocks;
  for_each_masked_block(batch, c, scale, rng, [&](MaskedCovBlock& blk) { blocks.push_back(std::move(blk)); });
  return blocks;
}

}  // namespace fpca
