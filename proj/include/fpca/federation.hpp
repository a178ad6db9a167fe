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

// Deterministic simulator of the aggregation tree: leaf clients stream their
// columns through EdgeClient, then aggregators merge finalized child
// estimates level by level up to the root.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fpca/edge.hpp"
#include "fpca/error.hpp"
#include "fpca/linalg.hpp"
#include "fpca/metrics.hpp"
#include "fpca/random.hpp"

namespace fpca {

struct TreeNode {
  std::size_t id = 0;
  std::size_t level = 0;                // 0 for leaves
  std::vector<std::size_t> children;    // empty for leaves
};

// Leaves are nodes 0..M-1; aggregators follow level by level, the root last.
struct FederationTree {
  std::size_t leaf_count = 0;
  std::size_t fanout = 2;
  std::size_t depth = 0;
  std::vector<TreeNode> nodes;

  std::size_t root() const noexcept { return nodes.size() - 1; }
  std::size_t internal_count() const noexcept { return nodes.size() - leaf_count; }
};

inline FederationTree build_tree(std::size_t leaves, std::size_t fanout) {
  detail::require(leaves >= 1, "build_tree: need at least one leaf");
  detail::require(fanout >= 2, "build_tree: fanout must be >= 2");
  FederationTree t;
  t.leaf_count = leaves;
  t.fanout = fanout;
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < leaves; ++i) {
    t.nodes.push_back({i, 0, {}});
    frontier.push_back(i);
  }
  while (frontier.size() > 1) {
    ++t.depth;
    std::vector<std::size_t> next;
    for (std::size_t k = 0; k < frontier.size(); k += fanout) {
      TreeNode n{t.nodes.size(), t.depth, {}};
      for (std::size_t j = k; j < std::min(frontier.size(), k + fanout); ++j) n.children.push_back(frontier[j]);
      next.push_back(n.id);
      t.nodes.push_back(std::move(n));
    }
    frontier = std::move(next);
  }
  return t;
}

// Only the interleaving of observation events differs between schedules;
// each client always sees its own columns in order.
enum class ScheduleKind { synchronous_rounds, random_interleave, adversarial_permutation };

struct Schedule {
  ScheduleKind kind = ScheduleKind::synchronous_rounds;
  std::uint64_t seed = 0;
};

struct FederationConfig {
  EdgeConfig edge;                            // dim and client_id are set per leaf
  Schedule schedule;
  std::optional<std::size_t> aggregate_rank;  // default: largest child rank
  std::size_t threads = 1;                    // > 1 runs leaves concurrently
};

struct GlobalEstimate {
  SubspaceEstimate subspace;
  std::size_t merge_count = 0;
  std::vector<std::vector<std::size_t>> per_level_ranks;  // level 0 = leaves
  std::vector<std::size_t> leaf_batches;
  std::vector<std::size_t> leaf_short_batches;
  std::vector<std::string> warnings;
};

namespace detail {

inline SubspaceEstimate fold_merge(const std::vector<const SubspaceEstimate*>& children, std::size_t r,
                                   std::size_t& merges) {
  SubspaceEstimate acc = SubspaceEstimate::empty(children.front()->dim());
  for (const SubspaceEstimate* c : children) {
    require_same_dim(acc, *c, "aggregate_once");
    if (c->is_empty()) continue;
    if (acc.is_empty()) {
      acc = c->truncated(r);
    } else {
      acc = merge(acc, *c, r);
      ++merges;
    }
  }
  return acc;
}

inline std::vector<std::size_t> schedule_events(const std::vector<std::size_t>& lengths, const Schedule& s) {
  std::size_t total = 0;
  for (std::size_t n : lengths) total += n;
  std::vector<std::size_t> events;
  events.reserve(total);
  const std::size_t m = lengths.size();
  switch (s.kind) {
    case ScheduleKind::synchronous_rounds: {
      const std::size_t longest = lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
      for (std::size_t t = 0; t < longest; ++t)
        for (std::size_t i = 0; i < m; ++i)
          if (t < lengths[i]) events.push_back(i);
      break;
    }
    case ScheduleKind::random_interleave: {
      CounterRng rng(s.seed);
      std::vector<std::size_t> left = lengths;
      for (std::size_t remaining = total; remaining > 0; --remaining) {
        std::uint64_t pick = rng.below(remaining);
        std::size_t i = 0;
        while (pick >= left[i]) pick -= left[i++];
        --left[i];
        events.push_back(i);
      }
      break;
    }
    case ScheduleKind::adversarial_permutation: {
      CounterRng rng(s.seed);
      std::vector<std::size_t> order(m);
      for (std::size_t i = 0; i < m; ++i) order[i] = i;
      for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t i : order) events.insert(events.end(), lengths[i], i);
      break;
    }
  }
  return events;
}

}  // namespace detail

// Left fold of merge over the children, skipping empty ones.
inline SubspaceEstimate aggregate_once(const std::vector<SubspaceEstimate>& children, std::size_t r) {
  detail::require(!children.empty(), "aggregate_once: no children");
  detail::require_merge_rank(r, children.front().dim(), "aggregate_once");
  std::vector<const SubspaceEstimate*> ptrs;
  for (const auto& c : children) ptrs.push_back(&c);
  std::size_t merges = 0;
  return detail::fold_merge(ptrs, r, merges);
}

// Merges leaf estimates up the tree. Returns the root estimate and fills
// merge_count and per_level_ranks.
inline GlobalEstimate aggregate_tree(const FederationTree& tree, std::vector<SubspaceEstimate> leaves,
                                     std::optional<std::size_t> aggregate_rank) {
  detail::require(leaves.size() == tree.leaf_count, "aggregate_tree: leaf count does not match the tree");
  GlobalEstimate g;
  std::vector<SubspaceEstimate> est = std::move(leaves);
  est.resize(tree.nodes.size());
  g.per_level_ranks.assign(tree.depth + 1, {});
  for (std::size_t i = 0; i < tree.leaf_count; ++i) g.per_level_ranks[0].push_back(est[i].rank());
  const std::size_t d = est.front().dim();
  for (std::size_t id = tree.leaf_count; id < tree.nodes.size(); ++id) {
    const TreeNode& n = tree.nodes[id];
    std::vector<const SubspaceEstimate*> kids;
    std::size_t r = 0;
    for (std::size_t c : n.children) {
      kids.push_back(&est[c]);
      r = std::max(r, est[c].rank());
    }
    if (aggregate_rank) r = *aggregate_rank;
    r = std::clamp<std::size_t>(r, 1, d);
    try {
      est[id] = detail::fold_merge(kids, r, g.merge_count);
    } catch (Error& e) {
      e.set_node(id);
      throw;
    }
    g.per_level_ranks[n.level].push_back(est[id].rank());
  }
  g.subspace = std::move(est[tree.root()]);
  return g;
}

// Runs every leaf over its stream (d x n_i, columns in arrival order) and
// aggregates. Deterministic given the configuration and seeds.
inline GlobalEstimate run_federation(const std::vector<Matrix>& streams, const FederationTree& tree,
                                     const FederationConfig& cfg) {
  if (streams.size() != tree.leaf_count)
    throw InvalidArgument("run_federation: " + std::to_string(streams.size()) + " streams for " +
                          std::to_string(tree.leaf_count) + " leaves");
  const std::size_t d = streams.front().rows();
  std::vector<std::size_t> lengths;
  for (const auto& s : streams) {
    if (s.rows() != d) throw InvalidArgument("run_federation: streams differ in dimension");
    lengths.push_back(s.cols());
  }

  std::vector<EdgeClient> clients;
  clients.reserve(streams.size());
  for (std::size_t i = 0; i < streams.size(); ++i) {
    EdgeConfig ec = cfg.edge;
    ec.dim = d;
    ec.client_id = i;
    try {
      clients.emplace_back(std::move(ec));
    } catch (Error& e) {
      e.set_node(i);
      throw;
    }
  }

  std::vector<std::exception_ptr> failures(streams.size());
  auto run_leaf_events = [&](std::size_t i, std::size_t& pos) {
    try {
      clients[i].observe(streams[i].col(pos++));
    } catch (Error& e) {
      e.set_node(i);
      throw;
    }
  };
  auto finish_leaf = [&](std::size_t i) {
    try {
      clients[i].finalize();
    } catch (Error& e) {
      e.set_node(i);
      throw;
    }
  };

  if (cfg.threads <= 1 || streams.size() == 1) {
    std::vector<std::size_t> pos(streams.size(), 0);
    for (std::size_t i : detail::schedule_events(lengths, cfg.schedule)) run_leaf_events(i, pos[i]);
    for (std::size_t i = 0; i < streams.size(); ++i) finish_leaf(i);
  } else {
    // Leaves share nothing, so each worker drains whole clients.
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < streams.size(); i = next++) {
        try {
          std::size_t p = 0;
          while (p < lengths[i]) run_leaf_events(i, p);
          finish_leaf(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    };
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(cfg.threads, streams.size()); ++t) pool.emplace_back(worker);
    pool.clear();
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  std::vector<SubspaceEstimate> leaves;
  GlobalEstimate g;
  std::vector<std::size_t> batches, shorts;
  for (auto& c : clients) {
    leaves.push_back(c.estimate());
    batches.push_back(c.blocks_seen());
    shorts.push_back(c.short_batches());
  }
  g = aggregate_tree(tree, std::move(leaves), cfg.aggregate_rank);
  g.leaf_batches = std::move(batches);
  g.leaf_short_batches = std::move(shorts);
  for (std::size_t i = 0; i < streams.size(); ++i)
    if (lengths[i] < cfg.edge.rank)
      g.warnings.push_back("client " + std::to_string(i) + " holds " + std::to_string(lengths[i]) +
                           " samples, fewer than rank " + std::to_string(cfg.edge.rank));
  if (cfg.edge.batch_size < cfg.edge.rank)
    g.warnings.push_back("batch size " + std::to_string(cfg.edge.batch_size) + " is below rank " +
                         std::to_string(cfg.edge.rank) + "; exact merging needs b >= rank");
  if (cfg.edge.energy && cfg.edge.energy->narrow())
    g.warnings.push_back("energy bounds alpha/beta >= 0.3");
  return g;
}

struct DepthProbe {
  std::size_t depth = 0;
  std::size_t leaves = 0;
  double measured = 0.0;  // Procrustes-aligned error of the merged factors
  double bound = 0.0;     // ((1+√2)^{q+1} − 1)·ρ_r(Y)
  bool ok = false;
};

inline double depth_bound_factor(std::size_t q) {
  return std::pow(1.0 + std::sqrt(2.0), static_cast<double>(q + 1)) - 1.0;
}

// Splits Y into fanout^q equal contiguous blocks, truncates each leaf to rank
// r, merges at rank r up a complete tree and compares min_W ‖Y·W − [UΣ | 0]‖_F
// with the depth bound.
inline DepthProbe depth_error_probe(const Matrix& y, std::size_t fanout, std::size_t q, std::size_t r) {
  detail::require(fanout >= 2, "depth_error_probe: fanout must be >= 2");
  const double leaves_f = std::pow(static_cast<double>(fanout), static_cast<double>(q));
  detail::require(leaves_f <= static_cast<double>(y.cols()), "depth_error_probe: more leaves than columns");
  const auto m = static_cast<std::size_t>(leaves_f);
  if (y.cols() % m != 0)
    throw InvalidArgument("depth_error_probe: " + std::to_string(y.cols()) + " columns not divisible by " +
                          std::to_string(m) + " leaves");
  detail::require_merge_rank(r, std::min(y.rows(), y.cols()), "depth_error_probe");
  const std::size_t w = y.cols() / m;
  std::vector<SubspaceEstimate> leaves;
  for (std::size_t i = 0; i < m; ++i) {
    const Matrix block = y.cols_range(i * w, (i + 1) * w);
    leaves.push_back(SubspaceEstimate::from_svd(truncated_svd(block, std::min(r, std::min(block.rows(), w)))));
  }
  const FederationTree tree = build_tree(m, fanout);
  const GlobalEstimate g = aggregate_tree(tree, std::move(leaves), r);

  Matrix target(y.rows(), y.cols());
  const Matrix f = g.subspace.factor();
  for (std::size_t j = 0; j < f.cols(); ++j) std::copy(f.col(j).begin(), f.col(j).end(), target.col(j).begin());

  DepthProbe p;
  p.depth = tree.depth;
  p.leaves = m;
  p.measured = procrustes_align_error(y, target);
  p.bound = depth_bound_factor(tree.depth) * residual_rho(y, r);
  p.ok = p.measured <= p.bound + 1e-10 * std::max(1.0, y.frobenius_norm());
  return p;
}

}  // namespace fpca
