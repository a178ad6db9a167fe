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

// Private edge run: prints the noise scale, the smallest admissible batch for
// a target noise floor, and the rank trajectory under the energy bounds.

#include <cstdio>

#include "fpca/fpca.hpp"

int main() {
  using namespace fpca;
  const std::size_t d = 20, n = 20000;
  Matrix y = synth_gaussian_cov(d, n, 1.0, 3);
  std::printf("unit-ball scale %.4g\n", normalize_unit_ball(y));

  const DpConfig dp{1.0, 0.05};
  const double floor = 0.5;
  const std::size_t t = min_batch_size(dp, d, floor);
  std::printf("omega(b=50) = %.4f, batch needed for omega <= %.2f: %zu\n", omega_streaming(dp, d, 50).omega, floor, t);

  EdgeConfig cfg;
  cfg.dim = d;
  cfg.rank = 4;
  cfg.batch_size = t;
  cfg.dp = dp;
  cfg.energy = EnergyBounds{};
  cfg.seed = 11;
  EdgeClient client(cfg);
  for (std::size_t k = 0; k + t <= n; k += t) {
    client.process_batch(y.cols_range(k, k + t));
    const auto& rec = client.records().back();
    std::printf("batch %zu: width %zu omega %.4f rank %zu\n", client.blocks_seen(), rec.width, rec.omega, rec.rank);
  }
}
