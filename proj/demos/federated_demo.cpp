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

// Streams a synthetic matrix through one edge client, then through a small
// federation, and prints how close each gets to the offline spectrum.

#include <cstdio>

#include "fpca/fpca.hpp"

int main() {
  using namespace fpca;
  const std::size_t d = 40, n = 4000, r = 8;
  const Matrix y = synth({d, n, 1.0, 7});
  const auto offline = truncated_svd(y, r);

  EdgeConfig edge;
  edge.dim = d;
  edge.rank = r;
  edge.batch_size = 50;
  EdgeClient client(edge);
  for (std::size_t k = 0; k < n; k += edge.batch_size) client.process_batch(y.cols_range(k, k + edge.batch_size));
  client.finalize();

  FederationConfig fed;
  fed.edge = edge;
  fed.threads = 4;
  const auto tree = build_tree(8, 2);
  const auto global = run_federation(split_streams(y, partition_columns(n, 8, PartitionPolicy::round_robin, 1)), tree, fed);

  std::printf("%4s %12s %12s %12s\n", "i", "offline", "edge", "federated");
  for (std::size_t i = 0; i < r; ++i)
    std::printf("%4zu %12.6f %12.6f %12.6f\n", i + 1, offline.values[i], client.estimate().values()[i],
                global.subspace.values()[i]);
  std::printf("subspace distance to offline: edge %.3e, federated %.3e (%zu merges, depth %zu)\n",
              subspace_distance(client.estimate().basis(), offline.left),
              subspace_distance(global.subspace.basis(), offline.left), global.merge_count, tree.depth);
  std::printf("best possible error rho_%zu = %.6f, federated error = %.6f\n", r, residual_rho(y, r),
              reconstruction_error(y, global.subspace.basis()));
}
