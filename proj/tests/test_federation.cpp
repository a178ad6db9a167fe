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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "fpca/datasets.hpp"
#include "fpca/federation.hpp"
#include "oracle.hpp"

namespace fpca {
namespace {

using testing::explicit_projector_distance;
using testing::max_relative_error;
using testing::oracle_left;
using testing::oracle_singular_values;
using testing::random_gaussian;

FederationConfig full_rank(std::size_t d, std::size_t b) {
  FederationConfig c;
  c.edge.rank = d;
  c.edge.batch_size = b;
  return c;
}

std::vector<Matrix> contiguous_streams(const Matrix& y, std::size_t m) {
  return split_streams(y, partition_columns(y.cols(), m, PartitionPolicy::contiguous));
}

TEST(BuildTree, Shapes) {
  const auto single = build_tree(1, 2);
  EXPECT_EQ(single.depth, 0u);
  EXPECT_EQ(single.root(), 0u);
  const auto bin = build_tree(8, 2);
  EXPECT_EQ(bin.depth, 3u);
  EXPECT_EQ(bin.internal_count(), 7u);
  EXPECT_EQ(build_tree(9, 3).depth, 2u);
  const auto odd = build_tree(5, 2);
  EXPECT_EQ(odd.depth, 3u);
  EXPECT_THROW(build_tree(0, 2), InvalidArgument);
  EXPECT_THROW(build_tree(4, 1), InvalidArgument);
}

TEST(BuildTree, EveryLeafReachesRootOnce) {
  for (std::size_t m : {1u, 2u, 5u, 16u, 17u, 30u})
    for (std::size_t f : {2u, 3u, 4u}) {
      const auto t = build_tree(m, f);
      EXPECT_EQ(t.depth, m == 1 ? 0u : static_cast<std::size_t>(std::ceil(std::log(m) / std::log(f) - 1e-12)));
      std::vector<int> parents(t.nodes.size(), 0);
      for (const auto& n : t.nodes) {
        EXPECT_LE(n.children.size(), f);
        for (std::size_t c : n.children) {
          ++parents[c];
          EXPECT_LT(c, n.id);
        }
      }
      for (std::size_t i = 0; i < t.nodes.size(); ++i) EXPECT_EQ(parents[i], i == t.root() ? 0 : 1);
    }
}

TEST(AggregateOnce, Cases) {
  const Matrix y = random_gaussian(6, 20, 4);
  const auto a = SubspaceEstimate::from_svd(truncated_svd(y.cols_range(0, 10), 6));
  const auto b = SubspaceEstimate::from_svd(truncated_svd(y.cols_range(10, 20), 6));
  EXPECT_EQ(aggregate_once({a}, 3).values(), a.truncated(3).values());
  const auto ab = aggregate_once({a, b}, 6);
  EXPECT_LT(max_relative_error(ab.values(), oracle_singular_values(y)), 1e-8);
  const auto ba = aggregate_once({b, SubspaceEstimate::empty(6), a}, 6);
  EXPECT_LT(max_relative_error(ba.values(), ab.values()), 1e-8);
  EXPECT_LT(explicit_projector_distance(ab.truncated(3).basis(), ba.truncated(3).basis()), 1e-8);
  EXPECT_THROW(aggregate_once({a, SubspaceEstimate::empty(5)}, 3), InvalidArgument);
  EXPECT_THROW(aggregate_once({}, 3), InvalidArgument);
}

TEST(RunFederation, SingleLeafEqualsEdge) {
  const Matrix y = random_gaussian(8, 90, 2);
  FederationConfig cfg = full_rank(8, 20);
  cfg.edge.rank = 3;
  const auto g = run_federation({y}, build_tree(1, 2), cfg);
  EdgeConfig ec = cfg.edge;
  ec.dim = 8;
  EdgeClient c(ec);
  for (std::size_t j = 0; j < y.cols(); ++j) c.observe(y.col(j));
  c.finalize();
  EXPECT_EQ(g.subspace.values(), c.estimate().values());
  EXPECT_EQ(g.merge_count, 0u);
  EXPECT_EQ(g.leaf_short_batches[0], 1u);
}

TEST(RunFederation, FullRankMatchesOffline) {
  const Matrix y = random_gaussian(16, 400, 42);
  const auto g = run_federation(contiguous_streams(y, 4), build_tree(4, 2), full_rank(16, 50));
  EXPECT_LT(max_relative_error(g.subspace.values(), oracle_singular_values(y)), 1e-8);
  EXPECT_LT(explicit_projector_distance(g.subspace.truncated(5).basis(), oracle_left(y, 5)), 1e-8);
  EXPECT_EQ(g.merge_count, 3u);
}

TEST(RunFederation, ExactnessAcrossLeafCounts) {
  for (std::size_t m : {2u, 4u, 8u}) {
    const Matrix y = random_gaussian(12, 240, m);
    const auto g = run_federation(contiguous_streams(y, m), build_tree(m, 2), full_rank(12, 15));
    EXPECT_LT(max_relative_error(g.subspace.values(), oracle_singular_values(y)), 1e-8) << m;
    EXPECT_EQ(g.merge_count, m - 1);
    EXPECT_EQ(g.per_level_ranks.size(), build_tree(m, 2).depth + 1);
  }
}

TEST(RunFederation, ScheduleIndependence) {
  const Matrix y = random_gaussian(16, 400, 42);
  const auto streams = contiguous_streams(y, 4);
  const auto tree = build_tree(4, 2);
  FederationConfig cfg = full_rank(16, 50);
  const auto base = run_federation(streams, tree, cfg);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.schedule = {ScheduleKind::random_interleave, seed};
    const auto g = run_federation(streams, tree, cfg);
    EXPECT_LT(max_relative_error(g.subspace.values(), base.subspace.values()), 1e-10);
    EXPECT_LT(explicit_projector_distance(g.subspace.basis(), base.subspace.basis()), 1e-8);
  }
  cfg.schedule = {ScheduleKind::adversarial_permutation, 3};
  EXPECT_EQ(run_federation(streams, tree, cfg).subspace.values(), base.subspace.values());
  cfg.threads = 3;
  EXPECT_EQ(run_federation(streams, tree, cfg).subspace.values(), base.subspace.values());
}

TEST(RunFederation, PermutationInvariance) {
  const Matrix y = random_gaussian(10, 120, 17);
  const auto base = run_federation(contiguous_streams(y, 4), build_tree(4, 2), full_rank(10, 10));
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> perm(y.cols());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    Matrix p(y.rows(), y.cols());
    for (std::size_t j = 0; j < perm.size(); ++j) std::copy(y.col(perm[j]).begin(), y.col(perm[j]).end(), p.col(j).begin());
    const auto g = run_federation(contiguous_streams(p, 4), build_tree(4, 2), full_rank(10, 10));
    EXPECT_LT(max_relative_error(g.subspace.values(), base.subspace.values()), 1e-10);
    EXPECT_LT(explicit_projector_distance(g.subspace.truncated(4).basis(), base.subspace.truncated(4).basis()), 1e-8);
  }
}

TEST(RunFederation, UnevenStreamsAndWarnings) {
  const Matrix y = random_gaussian(6, 50, 3);
  std::vector<Matrix> streams{y.cols_range(0, 40), y.cols_range(40, 44), y.cols_range(44, 50)};
  FederationConfig cfg = full_rank(6, 10);
  cfg.edge.rank = 5;
  cfg.edge.batch_size = 4;
  const auto g = run_federation(streams, build_tree(3, 2), cfg);
  EXPECT_EQ(g.leaf_batches, (std::vector<std::size_t>{10, 1, 2}));
  EXPECT_EQ(g.leaf_short_batches, (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_FALSE(g.warnings.empty());
}

TEST(RunFederation, ErrorsCarryNodeId) {
  const Matrix y = random_gaussian(20, 60, 3);
  FederationConfig cfg;
  cfg.edge.rank = 2;
  cfg.edge.batch_size = 10;
  cfg.edge.dp = DpConfig{0.1, 0.05};
  cfg.edge.omega_floor = 1.0;
  std::vector<Matrix> streams = contiguous_streams(y, 3);
  try {
    run_federation(streams, build_tree(3, 2), cfg);
    FAIL() << "expected PrivacyInfeasible";
  } catch (const PrivacyInfeasible& e) {
    ASSERT_TRUE(e.node().has_value());
    EXPECT_EQ(*e.node(), 0u);
  }
  cfg.threads = 2;
  EXPECT_THROW(run_federation(streams, build_tree(3, 2), cfg), PrivacyInfeasible);
  EXPECT_THROW(run_federation(streams, build_tree(4, 2), cfg), InvalidArgument);
  std::vector<Matrix> mixed{Matrix(3, 4), Matrix(4, 4)};
  EXPECT_THROW(run_federation(mixed, build_tree(2, 2), full_rank(3, 2)), InvalidArgument);
}

TEST(RunFederation, PrivateRunIsDeterministic) {
  const Matrix y = synth({12, 400, 1.0, 8});
  FederationConfig cfg;
  cfg.edge.rank = 3;
  cfg.edge.batch_size = 50;
  cfg.edge.dp = DpConfig{1.0, 0.1};
  cfg.edge.seed = 99;
  const auto streams = contiguous_streams(y, 4);
  const auto a = run_federation(streams, build_tree(4, 2), cfg);
  cfg.threads = 4;
  const auto b = run_federation(streams, build_tree(4, 2), cfg);
  EXPECT_EQ(a.subspace.values(), b.subspace.values());
  EXPECT_EQ(a.subspace.basis(), b.subspace.basis());
}

TEST(DepthProbe, ExactRankHasZeroError) {
  const Matrix y = multiply(random_gaussian(16, 3, 1), random_gaussian(3, 64, 2));
  for (std::size_t q : {1u, 2u, 3u}) {
    const auto p = depth_error_probe(y, 2, q, 3);
    EXPECT_LT(p.measured, 1e-8 * y.frobenius_norm());
    EXPECT_TRUE(p.ok);
  }
}

TEST(DepthProbe, BoundHoldsOnRandomAndSynth) {
  const auto p1 = depth_error_probe(random_gaussian(16, 64, 3), 2, 1, 4);
  EXPECT_EQ(p1.leaves, 2u);
  EXPECT_LE(p1.measured, p1.bound);
  EXPECT_NEAR(p1.bound, depth_bound_factor(1) * residual_rho(random_gaussian(16, 64, 3), 4), 1e-12);
  const auto p3 = depth_error_probe(synth({32, 256, 1.0, 4}), 2, 3, 8);
  EXPECT_EQ(p3.depth, 3u);
  EXPECT_LE(p3.measured, p3.bound);
  EXPECT_TRUE(p3.ok);
}

TEST(DepthProbe, Errors) {
  EXPECT_THROW(depth_error_probe(random_gaussian(4, 10, 1), 2, 2, 2), InvalidArgument);
  EXPECT_THROW(depth_error_probe(random_gaussian(4, 8, 1), 1, 2, 2), InvalidArgument);
  EXPECT_THROW(depth_error_probe(random_gaussian(4, 8, 1), 2, 1, 5), InvalidArgument);
}

}  // namespace
}  // namespace fpca
