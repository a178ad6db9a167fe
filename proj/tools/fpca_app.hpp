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

// The fpca command-line application. Kept in a header so tests can drive it
// in-process; tools/fpca.cpp only forwards argv.
//
// Every command writes its primary output plus manifest.txt into --out. The
// manifest echoes the full effective configuration, so `fpca replay
// --manifest <dir>/manifest.txt --out <dir2>` reruns the command and
// reproduces the primary output byte for byte.

#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fpca/fpca.hpp"

namespace fpca::app {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kPrivacyInfeasible = 4 };

struct Options {
  std::string command;
  std::string out = "fpca_out";
  std::uint64_t seed = 1;

  std::string data;
  std::string orientation = "rows";
  std::string normalize = "unit-ball";
  std::string generator = "svd";
  std::size_t d = 20;
  std::size_t n = 5000;
  double alpha = 1.0;

  std::size_t rank = 10;
  std::size_t batch = 50;
  std::size_t cov_block = 0;
  double epsilon = 0.1;
  double delta = 0.1;
  bool no_dp = false;
  double omega_floor = 0.0;
  std::string scale_bridge = "verbatim";
  double energy_alpha = 0.01;
  double energy_beta = 0.10;
  bool fixed_rank = false;
  std::size_t max_rank = 0;
  double lambda = 1.0;

  std::size_t leaves = 4;
  std::size_t fanout = 2;
  std::string schedule = "sync";
  std::uint64_t schedule_seed = 0;
  std::string partition = "contiguous";
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());

  std::vector<double> alphas{0.01, 1.0};
  std::vector<double> epsilons = [] {
    std::vector<double> e;
    for (int k = 1; k <= 40; ++k) e.push_back(k / 10.0);
    return e;
  }();
  std::size_t reps = 20;
  std::vector<std::size_t> depths{1, 2, 3};

  std::string manifest;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"synth",       "run-edge",    "run-federated",
                                             "utility-sweep", "depth-probe", "replay"};
  return c;
}

namespace detail {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += format_double(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

inline std::string b2s(bool b) { return b ? "true" : "false"; }

// Effective configuration in a fixed order. Keys are option names.
inline std::vector<std::pair<std::string, std::string>> echo(const Options& o) {
  return {
      {"seed", std::to_string(o.seed)},
      {"data", o.data},
      {"orientation", o.orientation},
      {"normalize", o.normalize},
      {"generator", o.generator},
      {"d", std::to_string(o.d)},
      {"n", std::to_string(o.n)},
      {"alpha", format_double(o.alpha)},
      {"rank", std::to_string(o.rank)},
      {"batch", std::to_string(o.batch)},
      {"cov-block", std::to_string(o.cov_block)},
      {"epsilon", format_double(o.epsilon)},
      {"delta", format_double(o.delta)},
      {"no-dp", b2s(o.no_dp)},
      {"omega-floor", format_double(o.omega_floor)},
      {"scale-bridge", o.scale_bridge},
      {"energy-alpha", format_double(o.energy_alpha)},
      {"energy-beta", format_double(o.energy_beta)},
      {"fixed-rank", b2s(o.fixed_rank)},
      {"max-rank", std::to_string(o.max_rank)},
      {"lambda", format_double(o.lambda)},
      {"leaves", std::to_string(o.leaves)},
      {"fanout", std::to_string(o.fanout)},
      {"schedule", o.schedule},
      {"schedule-seed", std::to_string(o.schedule_seed)},
      {"partition", o.partition},
      {"threads", std::to_string(o.threads)},
      {"alphas", join(o.alphas)},
      {"epsilons", join(o.epsilons)},
      {"reps", std::to_string(o.reps)},
      {"depths", join(o.depths)},
  };
}

// FNV-1a over the canonical configuration; thread count does not affect
// results and is left out.
inline std::string run_id(const Options& o) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  feed(o.command);
  for (const auto& [k, v] : echo(o))
    if (k != "threads") feed("\n" + k + "=" + v);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  void meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }
  void meta(const std::string& key, double value) { meta(key, format_double(value)); }
  void warn(const std::string& w) { warnings_.push_back(w); }

  void write(const std::filesystem::path& path, const Options& o, double runtime) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "command=" << o.command << "\n";
    for (const auto& [k, v] : echo(o)) out << k << "=" << v << "\n";
    out << "meta.run_id=" << run_id(o) << "\n";
    out << "meta.version=" << kVersion << "\n";
    out << "meta.timestamp=" << utc_timestamp() << "\n";
    out << "meta.runtime_seconds=" << format_double(runtime) << "\n";
    for (const auto& [k, v] : meta_) out << "meta." << k << "=" << v << "\n";
    for (std::size_t i = 0; i < warnings_.size(); ++i) out << "meta.warning." << i << "=" << warnings_[i] << "\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::string> warnings_;
};

inline std::string params(const nlohmann::json& j) { return j.dump(); }

inline Orientation orientation(const Options& o) {
  return o.orientation == "columns" ? Orientation::samples_as_columns : Orientation::samples_as_rows;
}

// Loads --data or generates from the synthetic spec, then normalizes.
inline Matrix obtain_data(const Options& o, Manifest& m) {
  Matrix y;
  if (!o.data.empty()) {
    y = load_csv(o.data, orientation(o)).matrix;
    m.meta("data_rows", std::to_string(y.rows()));
    m.meta("data_cols", std::to_string(y.cols()));
  } else if (o.generator == "gauss") {
    y = synth_gaussian_cov(o.d, o.n, o.alpha, o.seed);
  } else {
    y = synth({o.d, o.n, o.alpha, o.seed});
  }
  double scale = 1.0;
  if (o.normalize == "unit-ball") scale = normalize_unit_ball(y);
  if (o.normalize == "max-norm") scale = normalize_max_norm(y);
  m.meta("normalization_scale", scale);
  return y;
}

inline EdgeConfig edge_config(const Options& o, std::size_t d, Manifest& m) {
  EdgeConfig c;
  c.dim = d;
  c.rank = o.rank;
  c.batch_size = o.batch;
  c.cov_block_width = o.cov_block;
  c.forgetting = o.lambda;
  c.seed = o.seed;
  c.scale_bridge = o.scale_bridge == "data" ? ScaleBridge::data_scale : ScaleBridge::verbatim;
  if (!o.fixed_rank) {
    EnergyBounds e{o.energy_alpha, o.energy_beta, std::nullopt};
    if (o.max_rank > 0) e.max_rank = o.max_rank;
    e.validate();
    if (e.narrow()) m.warn("energy bounds alpha/beta = " + format_double(e.alpha / e.beta) + " >= 0.3");
    c.energy = e;
  }
  if (!o.no_dp) {
    c.dp = DpConfig{o.epsilon, o.delta};
    if (o.omega_floor > 0.0) {
      c.omega_floor = o.omega_floor;
      c.first_batch_size = min_batch_size(*c.dp, d, o.omega_floor);
      m.meta("first_batch_size", std::to_string(*c.first_batch_size));
    }
  }
  if (o.rank > d)
    throw InvalidArgument("rank " + std::to_string(o.rank) + " exceeds data dimension " + std::to_string(d));
  c.validate();
  return c;
}

inline Schedule schedule(const Options& o) {
  if (o.schedule == "interleave") return {ScheduleKind::random_interleave, o.schedule_seed};
  if (o.schedule == "adversarial") return {ScheduleKind::adversarial_permutation, o.schedule_seed};
  return {ScheduleKind::synchronous_rounds, o.schedule_seed};
}

inline PartitionPolicy partition(const Options& o) {
  if (o.partition == "round-robin") return PartitionPolicy::round_robin;
  if (o.partition == "shuffle") return PartitionPolicy::seeded_shuffle;
  return PartitionPolicy::contiguous;
}

inline void write_final_rows(MetricSink& sink, const std::string& id, const Matrix& y, const SubspaceEstimate& est) {
  for (std::size_t i = 0; i < est.rank(); ++i) sink.write({id, i + 1, "value", est.values()[i], "{}"});
  const double err = est.is_empty() ? y.frobenius_norm() : reconstruction_error(y, est.basis());
  const double norm = y.frobenius_norm();
  const std::string p = params({{"scope", "final"}});
  sink.write({id, 0, "reconstruction_error", err, p});
  sink.write({id, 0, "relative_reconstruction_error", norm > 0.0 ? err / norm : 0.0, p});
}

// ---- commands -------------------------------------------------------------

inline void cmd_synth(const Options& o, const std::filesystem::path& dir, Manifest& m) {
  const Matrix y = o.generator == "gauss" ? synth_gaussian_cov(o.d, o.n, o.alpha, o.seed)
                                          : synth({o.d, o.n, o.alpha, o.seed});
  save_csv((dir / "matrix.csv").string(), y, orientation(o));
  m.meta("output", "matrix.csv");
}

inline void cmd_run_edge(const Options& o, const std::filesystem::path& dir, Manifest& m) {
  const Matrix y = obtain_data(o, m);
  EdgeClient client(edge_config(o, y.rows(), m));
  std::ofstream file(dir / "metrics.csv", std::ios::binary);
  MetricSink sink(file);
  const std::string id = run_id(o);
  const std::string batch_scope = params({{"scope", "batch"}});
  std::size_t pos = 0;
  while (pos < y.cols()) {
    const std::size_t w = std::min(client.expected_width(), y.cols() - pos);
    const Matrix b = y.cols_range(pos, pos + w);
    pos += w;
    client.process_batch(b);
    const auto& rec = client.records().back();
    const std::size_t k = client.blocks_seen();
    sink.write({id, k, "rank", static_cast<double>(rec.rank), batch_scope});
    sink.write({id, k, "batch_width", static_cast<double>(rec.width), batch_scope});
    if (client.config().dp) sink.write({id, k, "omega", rec.omega, batch_scope});
    const auto& est = client.estimate();
    sink.write({id, k, "reconstruction_error", est.is_empty() ? b.frobenius_norm() : reconstruction_error(b, est.basis()),
                batch_scope});
  }
  write_final_rows(sink, id, y, client.estimate());
  m.meta("client.0.batches", std::to_string(client.blocks_seen()));
  m.meta("client.0.short_batches", std::to_string(client.short_batches()));
  if (client.short_batches() > 0) m.warn("final batch shorter than the batch size");
  if (client.config().dp)
    m.warn("each batch is perturbed at the full (epsilon, delta) budget; " + std::to_string(client.blocks_seen()) +
           " releases");
}

inline double max_relative_diff(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return 1.0;
  double e = 0.0;
  const double scale = a.empty() ? 1.0 : std::max(a.front(), 1e-300);
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]) / scale);
  return e;
}

inline void cmd_run_federated(const Options& o, const std::filesystem::path& dir, Manifest& m) {
  const Matrix y = obtain_data(o, m);
  if (o.leaves < 1) throw InvalidArgument("leaves must be >= 1");
  FederationConfig cfg;
  cfg.edge = edge_config(o, y.rows(), m);
  cfg.schedule = schedule(o);
  cfg.threads = o.threads;
  const auto streams = split_streams(y, partition_columns(y.cols(), o.leaves, partition(o), o.seed));
  const FederationTree tree = build_tree(o.leaves, o.fanout);
  const GlobalEstimate g = run_federation(streams, tree, cfg);

  // Re-run under a different interleaving; the estimate must not move.
  FederationConfig alt = cfg;
  alt.schedule = {cfg.schedule.kind == ScheduleKind::adversarial_permutation ? ScheduleKind::random_interleave
                                                                            : ScheduleKind::adversarial_permutation,
                  derive_seed(o.schedule_seed, 1)};
  const GlobalEstimate replay = run_federation(streams, tree, alt);

  std::ofstream file(dir / "metrics.csv", std::ios::binary);
  MetricSink sink(file);
  const std::string id = run_id(o);
  for (std::size_t level = 0; level < g.per_level_ranks.size(); ++level)
    for (std::size_t k = 0; k < g.per_level_ranks[level].size(); ++k)
      sink.write({id, level, "level_rank", static_cast<double>(g.per_level_ranks[level][k]),
                  params({{"position", k}})});
  sink.write({id, 0, "merge_count", static_cast<double>(g.merge_count), params({{"depth", tree.depth}})});
  sink.write({id, 0, "schedule_replay_max_diff", max_relative_diff(g.subspace.values(), replay.subspace.values()),
              params({{"replay_schedule", alt.schedule.kind == ScheduleKind::random_interleave ? "interleave"
                                                                                             : "adversarial"}})});
  write_final_rows(sink, id, y, g.subspace);
  for (std::size_t i = 0; i < g.leaf_batches.size(); ++i) {
    m.meta("client." + std::to_string(i) + ".batches", std::to_string(g.leaf_batches[i]));
    m.meta("client." + std::to_string(i) + ".short_batches", std::to_string(g.leaf_short_batches[i]));
  }
  m.meta("tree.depth", std::to_string(tree.depth));
  for (const auto& w : g.warnings) m.warn(w);
}

// Leading left singular vector of a d x d matrix.
inline std::vector<double> top_left_vector(const Matrix& a) {
  const auto f = truncated_svd(a, 1);
  if (f.rank() == 0) {
    std::vector<double> e(a.rows(), 0.0);
    e[0] = 1.0;
    return e;
  }
  return {f.left.col(0).begin(), f.left.col(0).end()};
}

inline void cmd_utility_sweep(const Options& o, const std::filesystem::path& dir, Manifest& m) {
  if (o.reps < 1) throw InvalidArgument("reps must be >= 1");
  if (o.alphas.empty() || o.epsilons.empty()) throw InvalidArgument("alphas and epsilons must be non-empty");
  std::ofstream file(dir / "metrics.csv", std::ios::binary);
  MetricSink sink(file);
  const std::string id = run_id(o);
  const std::size_t d = o.d;
  const std::size_t n = o.n;
  const std::size_t r = std::min(o.rank, d);
  for (std::size_t ai = 0; ai < o.alphas.size(); ++ai) {
    for (std::size_t rep = 0; rep < o.reps; ++rep) {
      Matrix x = o.generator == "gauss" ? synth_gaussian_cov(d, n, o.alphas[ai], derive_seed(o.seed, ai, rep))
                                        : synth({d, n, o.alphas[ai], derive_seed(o.seed, ai, rep)});
      // Synthetic samples sit deep inside the unit ball; rescale so the
      // largest one lies on it, the most signal the privacy bound admits.
      normalize_max_norm(x);
      const auto v1 = top_left_vector(x);
      Matrix cov = multiply_nt(x, x);
      cov *= 1.0 / static_cast<double>(n);
      for (std::size_t ei = 0; ei < o.epsilons.size(); ++ei) {
        const double eps = o.epsilons[ei];
        const DpConfig dp{eps, o.delta};
        const std::uint64_t s = derive_seed(derive_seed(o.seed, 7, ai), ei, rep);
        auto emit = [&](const char* method, const std::vector<double>& vhat) {
          const auto q = qa_overlap(v1, vhat);
          const std::string p = params({{"method", method}, {"alpha", o.alphas[ai]}, {"epsilon", eps}});
          sink.write({id, rep, "qa_signed", q.signed_value, p});
          sink.write({id, rep, "qa_abs", q.abs_value, p});
        };

        // FPCA-Edge over the whole sample as one private batch.
        EdgeConfig ec;
        ec.dim = d;
        ec.rank = r;
        ec.batch_size = n;
        ec.cov_block_width = o.cov_block;
        ec.seed = s;
        if (!o.no_dp) ec.dp = dp;
        EdgeClient edge(ec);
        edge.process_batch(x);
        const auto& u = edge.estimate().basis();
        emit("fpca", {u.col(0).begin(), u.col(0).end()});

        const double w_stream = o.no_dp ? 0.0 : omega_streaming(dp, d, n).omega;
        CounterRng rng_a(derive_seed(s, 1));
        emit("mod_sulq_streaming", top_left_vector(cov + gaussian_mask(d, d, {w_stream}, rng_a)));

        const double w_sym = o.no_dp ? 0.0 : omega_symmetric_sulq(dp, d, n).omega;
        CounterRng rng_b(derive_seed(s, 2));
        const Matrix a = cov + symmetric_gaussian_mask(d, {w_sym, NoiseFlavor::sulq_symmetric}, rng_b);
        const auto eig = fpca::detail::symmetric_eigen(a);
        emit("mod_sulq_symmetric", {eig.second.col(0).begin(), eig.second.col(0).end()});
      }
    }
  }
  m.meta("rows", std::to_string(sink.rows()));
  m.meta("sweep_normalization", "max-norm");
}

inline void cmd_depth_probe(const Options& o, const std::filesystem::path& dir, Manifest& m) {
  const Matrix y = obtain_data(o, m);
  std::ofstream file(dir / "metrics.csv", std::ios::binary);
  MetricSink sink(file);
  const std::string id = run_id(o);
  std::size_t failures = 0;
  for (std::size_t q : o.depths) {
    const DepthProbe p = depth_error_probe(y, o.fanout, q, o.rank);
    const std::string pj = params({{"rank", o.rank}, {"fanout", o.fanout}, {"leaves", p.leaves}});
    sink.write({id, q, "depth_measured", p.measured, pj});
    sink.write({id, q, "depth_bound", p.bound, pj});
    sink.write({id, q, "depth_ok", p.ok ? 1.0 : 0.0, pj});
    if (!p.ok) ++failures;
  }
  m.meta("bound_violations", std::to_string(failures));
}

inline std::map<std::string, std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!kv.contains("command")) throw DataError("manifest '" + path + "' has no command");
  return kv;
}

}  // namespace detail

int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

namespace detail {

inline int replay(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.manifest.empty()) throw InvalidArgument("replay needs --manifest");
  const auto kv = read_manifest(o.manifest);
  std::vector<std::string> args{"fpca", kv.at("command")};
  for (const auto& [k, v] : echo(Options{})) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw DataError("manifest lacks key '" + k + "'");
    if (k == "data" && it->second.empty()) continue;
    args.push_back("--" + k + "=" + it->second);
  }
  args.push_back("--out=" + o.out);
  return run(args, out, err);
}

inline void add_options(CLI::App& app, Options& o) {
  app.add_option("command", o.command, "synth | run-edge | run-federated | utility-sweep | depth-probe | replay")
      ->required()
      ->check(CLI::IsMember(commands()));
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Global seed")->capture_default_str();
  app.add_option("--data", o.data, "Input CSV (otherwise synthetic data)");
  app.add_option("--orientation", o.orientation, "CSV layout: rows (one sample per row) or columns")
      ->check(CLI::IsMember({"rows", "columns"}))
      ->capture_default_str();
  app.add_option("--normalize", o.normalize, "none | unit-ball | max-norm (utility-sweep always uses max-norm)")
      ->check(CLI::IsMember({"none", "unit-ball", "max-norm"}))
      ->capture_default_str();
  app.add_option("--generator", o.generator, "svd | gauss")->check(CLI::IsMember({"svd", "gauss"}))->capture_default_str();
  app.add_option("--d", o.d, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--n", o.n, "Samples")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--alpha", o.alpha, "Spectrum exponent")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--rank", o.rank, "Initial rank")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--batch", o.batch, "Edge batch size")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--cov-block", o.cov_block, "Covariance block width (0: min(d, 64))")->capture_default_str();
  app.add_option("--epsilon", o.epsilon, "DP epsilon")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--delta", o.delta, "DP delta")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app.add_flag("--no-dp", o.no_dp, "Disable the Gaussian mask");
  app.add_option("--omega-floor", o.omega_floor, "Reject batches too small for this noise level (0: off)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--scale-bridge", o.scale_bridge, "verbatim | data")
      ->check(CLI::IsMember({"verbatim", "data"}))
      ->capture_default_str();
  app.add_option("--energy-alpha", o.energy_alpha, "Lower energy bound")->capture_default_str();
  app.add_option("--energy-beta", o.energy_beta, "Upper energy bound")->capture_default_str();
  app.add_flag("--fixed-rank", o.fixed_rank, "Disable rank adaptation");
  app.add_option("--max-rank", o.max_rank, "Rank cap for adaptation (0: none)")->capture_default_str();
  app.add_option("--lambda", o.lambda, "Forgetting factor in (0, 1]")->capture_default_str();
  app.add_option("--leaves", o.leaves, "Number of clients")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--fanout", o.fanout, "Tree fanout")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  app.add_option("--schedule", o.schedule, "sync | interleave | adversarial")
      ->check(CLI::IsMember({"sync", "interleave", "adversarial"}))
      ->capture_default_str();
  app.add_option("--schedule-seed", o.schedule_seed, "Seed for interleaved schedules")->capture_default_str();
  app.add_option("--partition", o.partition, "contiguous | round-robin | shuffle")
      ->check(CLI::IsMember({"contiguous", "round-robin", "shuffle"}))
      ->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads for leaves")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--alphas", o.alphas, "Spectrum exponents for utility-sweep")->delimiter(',');
  app.add_option("--epsilons", o.epsilons, "Epsilon grid for utility-sweep")->delimiter(',');
  app.add_option("--reps", o.reps, "Repetitions for utility-sweep")->capture_default_str();
  app.add_option("--depths", o.depths, "Tree depths for depth-probe")->delimiter(',');
  app.add_option("--manifest", o.manifest, "Manifest to replay");
  app.set_config("--config", "", "Flat key=value configuration file");
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Federated, streaming and differentially private PCA", "fpca"};
  detail::add_options(app, o);
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (o.command == "replay") return detail::replay(o, out, err);
    namespace fs = std::filesystem;
    const fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + o.out + "': " + ec.message());
    detail::Manifest m;
    const auto start = std::chrono::steady_clock::now();
    if (o.command == "synth") detail::cmd_synth(o, dir, m);
    else if (o.command == "run-edge") detail::cmd_run_edge(o, dir, m);
    else if (o.command == "run-federated") detail::cmd_run_federated(o, dir, m);
    else if (o.command == "utility-sweep") detail::cmd_utility_sweep(o, dir, m);
    else if (o.command == "depth-probe") detail::cmd_depth_probe(o, dir, m);
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.write(dir / "manifest.txt", o, runtime);
    out << o.command << ": wrote " << (dir / (o.command == "synth" ? "matrix.csv" : "metrics.csv")).string() << "\n";
    return kOk;
  } catch (const PrivacyInfeasible& e) {
    err << "privacy-infeasible: " << e.what() << (e.node() ? " (node " + std::to_string(*e.node()) + ")" : "") << "\n";
    return kPrivacyInfeasible;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NonFiniteInput& e) {
    err << "data error: " << e.what() << (e.node() ? " (node " + std::to_string(*e.node()) + ")" : "") << "\n";
    return kDataError;
  } catch (const Error& e) {
    err << "config error: " << e.what() << (e.node() ? " (node " + std::to_string(*e.node()) + ")" : "") << "\n";
    return kConfigError;
  }
}

}  // namespace fpca::app
