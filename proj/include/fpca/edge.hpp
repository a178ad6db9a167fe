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

// Per-client streaming estimator: block subspace tracking with optional
// Gaussian input perturbation and energy-driven rank adaptation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpca/error.hpp"
#include "fpca/linalg.hpp"
#include "fpca/matrix.hpp"
#include "fpca/privacy.hpp"
#include "fpca/random.hpp"

namespace fpca {

// Admissible band for the energy ratio σ_r / Σ_{i≤r} σ_i. Both bounds are
// fractions, so the familiar "1 and 10" setting is alpha = 0.01, beta = 0.10.
struct EnergyBounds {
  double alpha = 0.01;
  double beta = 0.10;
  std::optional<std::size_t> max_rank;

  void validate() const {
    if (!(alpha > 0.0 && alpha < beta && beta <= 1.0))
      throw InvalidArgument("EnergyBounds: need 0 < alpha < beta <= 1");
    if (max_rank && *max_rank < 1) throw InvalidArgument("EnergyBounds: max_rank must be >= 1");
  }

  // Bands with alpha/beta >= 0.3 tend to oscillate; allowed but reported.
  bool narrow() const noexcept { return alpha / beta >= 0.3; }
};

inline double energy_ratio(std::span<const double> values, std::size_t r) {
  if (r < 1 || r > values.size())
    throw InvalidArgument("energy_ratio: rank " + std::to_string(r) + " out of range [1, " +
                          std::to_string(values.size()) + "]");
  const double total = std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(r), 0.0);
  if (!(total > 0.0)) throw InvalidArgument("energy_ratio: zero total energy");
  return values[r - 1] / total;
}

namespace detail {

// First canonical direction with a substantial component outside span(U),
// orthonormalized against U. Some e_j always has squared residual at least
// the average (d - r)/d, so half of that is a safe acceptance threshold.
inline std::vector<double> fresh_direction(const Matrix& u) {
  const std::size_t d = u.rows();
  const std::size_t r = u.cols();
  const double threshold = 0.5 * static_cast<double>(d - r) / static_cast<double>(d);
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> v(d, 0.0);
    v[j] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < r; ++k) {
        const double c = dot<double>(u.col(k), v);
        const auto uk = u.col(k);
        for (std::size_t i = 0; i < d; ++i) v[i] -= c * uk[i];
      }
    const double n = norm2<double>(v);
    if (n * n >= threshold) {
      for (double& x : v) x /= n;
      return v;
    }
    if (n > best_norm) {
      best_norm = n;
      best = std::move(v);
    }
  }
  for (double& x : best) x /= best_norm;
  return best;
}

}  // namespace detail

// Grows the rank by one (fresh direction, value 0) when the ratio exceeds
// beta, drops the trailing component when it falls below alpha, and leaves
// the estimate alone otherwise. Saturates at rank 1 and min(d, max_rank).
inline SubspaceEstimate adjust_rank(const SubspaceEstimate& est, const EnergyBounds& bounds) {
  bounds.validate();
  if (est.is_empty()) throw InvalidArgument("adjust_rank: empty estimate");
  const std::size_t r = est.rank();
  const double e = energy_ratio(est.values(), r);
  std::size_t cap = est.dim();
  if (bounds.max_rank) cap = std::min(cap, *bounds.max_rank);
  if (e > bounds.beta && r < cap) {
    const auto v = detail::fresh_direction(est.basis());
    Matrix basis(est.dim(), r + 1);
    for (std::size_t j = 0; j < r; ++j) std::copy(est.basis().col(j).begin(), est.basis().col(j).end(), basis.col(j).begin());
    std::copy(v.begin(), v.end(), basis.col(r).begin());
    Vector values = est.values();
    values.push_back(0.0);
    return SubspaceEstimate(std::move(basis), std::move(values));
  }
  if (e < bounds.alpha && r > 1) return est.truncated(r - 1);
  return est;
}

// SVD_r(D) for an empty estimate, otherwise Merge_r(U, Σ, D, I).
inline SubspaceEstimate ssvd(const Matrix& d_block, const SubspaceEstimate& est, std::size_t r) {
  if (d_block.rows() != est.dim())
    throw InvalidArgument("ssvd: block has " + std::to_string(d_block.rows()) + " rows, estimate dimension is " +
                          std::to_string(est.dim()));
  detail::require_merge_rank(r, est.dim(), "ssvd");
  require_finite(d_block, "ssvd");
  if (d_block.cols() == 0) return est.truncated(r);
  if (est.is_empty())
    return SubspaceEstimate::from_svd(truncated_svd(d_block, std::min(r, std::min(d_block.rows(), d_block.cols()))));
  return detail::merge_factors(est.basis(), Matrix::diagonal(std::span<const double>(est.values())), d_block,
                               Matrix::identity(d_block.cols()), r);
}

// How private (covariance-scale) values meet the data-scale history.
// verbatim merges them as produced; data_scale maps each value v to √(b·v).
enum class ScaleBridge { verbatim, data_scale };

struct EdgeConfig {
  std::size_t dim = 0;
  std::size_t rank = 1;        // initial rank r
  std::size_t batch_size = 1;  // b
  std::optional<std::size_t> first_batch_size;  // e.g. the minimum private batch T
  std::optional<EnergyBounds> energy;           // unset: fixed rank
  std::optional<DpConfig> dp;                   // unset: non-private block update
  std::size_t cov_block_width = 0;              // 0: default_cov_block_width(dim)
  double forgetting = 1.0;                      // λ applied to the history
  ScaleBridge scale_bridge = ScaleBridge::verbatim;
  std::optional<double> omega_floor;            // reject batches too small for this ω
  std::optional<double> omega_override;         // fixed mask scale, bypasses calibration
  std::uint64_t seed = 0;
  std::uint64_t client_id = 0;

  void validate() const {
    detail::require(dim >= 1, "EdgeConfig: dim must be >= 1");
    if (rank < 1 || rank > dim)
      throw InvalidArgument("EdgeConfig: rank " + std::to_string(rank) + " out of range [1, " +
                            std::to_string(dim) + "]");
    detail::require(batch_size >= 1, "EdgeConfig: batch_size must be >= 1");
    detail::require(!first_batch_size || *first_batch_size >= 1, "EdgeConfig: first_batch_size must be >= 1");
    detail::require(cov_block_width <= dim, "EdgeConfig: cov_block_width exceeds dim");
    detail::require(forgetting > 0.0 && forgetting <= 1.0, "EdgeConfig: forgetting must lie in (0, 1]");
    detail::require(!omega_override || *omega_override >= 0.0, "EdgeConfig: omega_override must be >= 0");
    detail::require(!omega_floor || *omega_floor > 0.0, "EdgeConfig: omega_floor must be > 0");
    if (energy) energy->validate();
    if (dp) dp->validate();
  }

  std::size_t block_width() const { return cov_block_width == 0 ? default_cov_block_width(dim) : cov_block_width; }
};

struct BatchRecord {
  std::size_t width = 0;
  bool short_batch = false;
  double omega = 0.0;  // 0 on the non-private path
  std::size_t rank = 0;
};

class EdgeClient {
 public:
  explicit EdgeClient(EdgeConfig cfg) : cfg_(std::move(cfg)), estimate_(SubspaceEstimate::empty(cfg_.dim)) {
    cfg_.validate();
    rank_ = cfg_.rank;
    if (cfg_.energy && cfg_.energy->max_rank) rank_ = std::min(rank_, *cfg_.energy->max_rank);
    buffer_ = Matrix(cfg_.dim, expected_width());
  }

  const EdgeConfig& config() const noexcept { return cfg_; }
  const SubspaceEstimate& estimate() const noexcept { return estimate_; }
  std::size_t rank() const noexcept { return rank_; }
  std::size_t blocks_seen() const noexcept { return records_.size(); }
  std::size_t buffered() const noexcept { return fill_; }
  std::size_t short_batches() const noexcept {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.short_batch; }));
  }
  const std::vector<BatchRecord>& records() const noexcept { return records_; }

  // Width the next batch must have.
  std::size_t expected_width() const noexcept {
    return records_.empty() && cfg_.first_batch_size ? *cfg_.first_batch_size : cfg_.batch_size;
  }

  void observe(std::span<const double> y) {
    if (y.size() != cfg_.dim)
      throw InvalidArgument("EdgeClient::observe: sample has " + std::to_string(y.size()) + " entries, expected " +
                            std::to_string(cfg_.dim));
    std::copy(y.begin(), y.end(), buffer_.col(fill_).begin());
    if (++fill_ == buffer_.cols()) {
      process(buffer_, false);
      fill_ = 0;
      if (buffer_.cols() != expected_width()) buffer_ = Matrix(cfg_.dim, expected_width());
    }
  }

  // A batch narrower than expected_width() is accepted and recorded as short.
  void process_batch(const Matrix& batch) {
    if (batch.rows() != cfg_.dim)
      throw InvalidArgument("EdgeClient::process_batch: batch has " + std::to_string(batch.rows()) +
                            " rows, expected " + std::to_string(cfg_.dim));
    const std::size_t want = expected_width();
    if (batch.cols() == 0 || batch.cols() > want)
      throw InvalidArgument("EdgeClient::process_batch: batch width " + std::to_string(batch.cols()) +
                            " does not fit batch size " + std::to_string(want));
    process(batch, batch.cols() < want);
    if (buffer_.cols() != expected_width() && fill_ == 0) buffer_ = Matrix(cfg_.dim, expected_width());
  }

  // Flushes a partial buffer as a short batch.
  const SubspaceEstimate& finalize() {
    if (fill_ > 0) {
      const Matrix partial = buffer_.cols_range(0, fill_);
      fill_ = 0;
      process(partial, true);
    }
    return estimate_;
  }

 private:
  void process(const Matrix& batch, bool is_short) {
    require_finite(batch, "EdgeClient");
    BatchRecord rec{batch.cols(), is_short, 0.0, 0};
    SubspaceEstimate merged;
    if (cfg_.dp) {
      merged = private_update(batch, rec.omega);
    } else if (estimate_.is_empty()) {
      merged = ssvd(batch, estimate_, rank_);
    } else {
      // [λ·U·Σ | B] merged directly; nothing d x d is formed.
      Vector s = estimate_.values();
      for (double& v : s) v *= cfg_.forgetting;
      merged = detail::merge_factors(estimate_.basis(), Matrix::diagonal(std::span<const double>(s)), batch,
                                     Matrix::identity(batch.cols()), rank_);
    }
    if (cfg_.energy && merged.rank() == rank_ && energy_total(merged) > 0.0) {
      merged = adjust_rank(merged, *cfg_.energy);
      rank_ = merged.rank();
    }
    estimate_ = std::move(merged);
    rec.rank = rank_;
    records_.push_back(rec);
  }

  SubspaceEstimate private_update(const Matrix& batch, double& omega_out) {
    const std::size_t w = batch.cols();
    NoiseScale scale;
    if (cfg_.omega_override) {
      scale.omega = *cfg_.omega_override;
    } else {
      if (cfg_.omega_floor && w < min_batch_size(*cfg_.dp, cfg_.dim, *cfg_.omega_floor))
        throw PrivacyInfeasible("batch of " + std::to_string(w) + " samples is below the minimum private batch " +
                                std::to_string(min_batch_size(*cfg_.dp, cfg_.dim, *cfg_.omega_floor)) +
                                " for omega floor " + std::to_string(*cfg_.omega_floor));
      scale = omega_streaming(*cfg_.dp, cfg_.dim, w);
    }
    omega_out = scale.omega;
    CounterRng rng(derive_seed(cfg_.seed, cfg_.client_id, records_.size()));
    SubspaceEstimate local = SubspaceEstimate::empty(cfg_.dim);
    for_each_masked_block(batch, cfg_.block_width(), scale, rng,
                          [&](const MaskedCovBlock& blk) { local = ssvd(blk.block, local, rank_); });
    if (cfg_.scale_bridge == ScaleBridge::data_scale) {
      Vector v = local.values();
      for (double& x : v) x = std::sqrt(static_cast<double>(w) * x);
      local = SubspaceEstimate(local.basis(), std::move(v));
    }
    return merge(local, estimate_.scaled(cfg_.forgetting), rank_);
  }

  static double energy_total(const SubspaceEstimate& e) {
    return std::accumulate(e.values().begin(), e.values().end(), 0.0);
  }

  EdgeConfig cfg_;
  SubspaceEstimate estimate_;
  std::size_t rank_ = 1;
  Matrix buffer_;
  std::size_t fill_ = 0;
  std::vector<BatchRecord> records_;
};

}  // namespace fpca
