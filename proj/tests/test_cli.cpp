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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fpca/fpca.hpp"
#include "fpca_app.hpp"
#include "oracle.hpp"

namespace fpca {
namespace {

namespace fs = std::filesystem;

struct Row {
  std::string run_id;
  std::size_t t;
  std::string metric;
  double value;
  std::string params;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

std::vector<Row> read_rows(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "run_id,t,metric,value,params");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    EXPECT_EQ(f.size(), 5u) << line;
    rows.push_back({f[0], std::stoul(f[1]), f[2], std::stod(f[3]), f[4]});
  }
  return rows;
}

std::vector<double> values_of(const std::vector<Row>& rows, const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.metric == metric) v.push_back(r.value);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> manifest(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("fpca_cli_" + std::string(info->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path dir(const std::string& name) const { return root_ / name; }

  int cli(std::vector<std::string> args, const std::string& out_name) {
    args.insert(args.begin(), "fpca");
    args.push_back("--out=" + dir(out_name).string());
    std::ostringstream out, err;
    const int rc = app::run(args, out, err);
    last_err_ = err.str();
    return rc;
  }

  fs::path root_;
  std::string last_err_;
};

TEST_F(CliTest, SynthRoundTripsSpectrum) {
  ASSERT_EQ(cli({"synth", "--d=4", "--n=8", "--alpha=1", "--seed=1", "--generator=svd"}, "s"), 0);
  const auto loaded = load_csv(dir("s/matrix.csv").string(), Orientation::samples_as_rows, Normalization::none);
  ASSERT_EQ(loaded.matrix.rows(), 4u);
  ASSERT_EQ(loaded.matrix.cols(), 8u);
  const auto sv = testing::oracle_singular_values(loaded.matrix);
  const std::vector<double> want{1.0, 0.5, 1.0 / 3.0, 0.25};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(sv[i], want[i], 1e-12);
}

TEST_F(CliTest, SynthIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(cli({"synth", "--d=5", "--n=30", "--seed=9"}, "a"), 0);
  ASSERT_EQ(cli({"synth", "--d=5", "--n=30", "--seed=9"}, "b"), 0);
  EXPECT_EQ(slurp(dir("a/matrix.csv")), slurp(dir("b/matrix.csv")));
}

TEST_F(CliTest, SynthFlatSpectrumAtAlphaZero) {
  ASSERT_EQ(cli({"synth", "--d=6", "--n=12", "--alpha=0"}, "s"), 0);
  const auto loaded = load_csv(dir("s/matrix.csv").string(), Orientation::samples_as_rows, Normalization::none);
  for (double s : testing::oracle_singular_values(loaded.matrix)) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST_F(CliTest, SynthGaussWritesColumnsOrientation) {
  ASSERT_EQ(cli({"synth", "--generator=gauss", "--d=3", "--n=7", "--orientation=columns"}, "s"), 0);
  const auto loaded = load_csv(dir("s/matrix.csv").string(), Orientation::samples_as_columns, Normalization::none);
  EXPECT_EQ(loaded.matrix.rows(), 3u);
  EXPECT_EQ(loaded.matrix.cols(), 7u);
}

TEST_F(CliTest, FullRankEdgeRunIsExact) {
  ASSERT_EQ(cli({"run-edge", "--d=20", "--n=1000", "--rank=20", "--no-dp", "--fixed-rank"}, "e"), 0);
  const auto rows = read_rows(dir("e/metrics.csv"));
  const auto rel = values_of(rows, "relative_reconstruction_error");
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_LE(rel[0], 1e-8);
}

TEST_F(CliTest, AdaptiveRankMovesAtMostOnePerBlock) {
  ASSERT_EQ(cli({"run-edge", "--d=30", "--n=3000", "--alpha=2", "--rank=3", "--energy-alpha=0.05",
                 "--energy-beta=0.2"},
                "e"),
            0);
  const auto ranks = values_of(read_rows(dir("e/metrics.csv")), "rank");
  ASSERT_GT(ranks.size(), 2u);
  bool moved = false;
  for (std::size_t i = 1; i < ranks.size(); ++i) {
    EXPECT_LE(std::abs(ranks[i] - ranks[i - 1]), 1.0);
    moved = moved || ranks[i] != ranks[i - 1];
  }
  EXPECT_TRUE(moved);
}

TEST_F(CliTest, DefaultBatchIsFifty) {
  ASSERT_EQ(cli({"run-edge", "--n=500", "--no-dp"}, "e"), 0);
  const auto widths = values_of(read_rows(dir("e/metrics.csv")), "batch_width");
  ASSERT_EQ(widths.size(), 10u);
  for (double w : widths) EXPECT_EQ(w, 50.0);
  const auto m = manifest(dir("e/manifest.txt"));
  EXPECT_EQ(m.at("batch"), "50");
  EXPECT_EQ(m.at("rank"), "10");
  EXPECT_EQ(m.at("epsilon"), "0.10000000000000001");
  EXPECT_EQ(m.at("delta"), "0.10000000000000001");
}

TEST_F(CliTest, PrivateEdgeRunEmitsOmegaAndBudgetWarning) {
  ASSERT_EQ(cli({"run-edge", "--n=500"}, "e"), 0);
  const auto rows = read_rows(dir("e/metrics.csv"));
  const auto omega = values_of(rows, "omega");
  ASSERT_EQ(omega.size(), 10u);
  EXPECT_NEAR(omega[0], omega_streaming({0.1, 0.1}, 20, 50).omega, 1e-15);
  const auto m = manifest(dir("e/manifest.txt"));
  EXPECT_EQ(m.at("meta.client.0.batches"), "10");
  EXPECT_TRUE(m.contains("meta.warning.0"));
}

TEST_F(CliTest, NarrowEnergyBoundsAreWarned) {
  ASSERT_EQ(cli({"run-edge", "--n=200", "--no-dp", "--energy-alpha=0.05", "--energy-beta=0.1"}, "e"), 0);
  const auto m = manifest(dir("e/manifest.txt"));
  ASSERT_TRUE(m.contains("meta.warning.0"));
  EXPECT_NE(m.at("meta.warning.0").find("alpha/beta"), std::string::npos);
}

TEST_F(CliTest, SingleLeafFederationMatchesEdgeRun) {
  ASSERT_EQ(cli({"run-edge", "--n=1000"}, "e"), 0);
  ASSERT_EQ(cli({"run-federated", "--n=1000", "--leaves=1"}, "f"), 0);
  const auto a = values_of(read_rows(dir("e/metrics.csv")), "value");
  const auto b = values_of(read_rows(dir("f/metrics.csv")), "value");
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10 * a[0]);
}

TEST_F(CliTest, FourLeafFullRankMatchesOfflineSvd) {
  ASSERT_EQ(cli({"run-federated", "--d=12", "--n=800", "--rank=12", "--leaves=4", "--no-dp", "--fixed-rank",
                 "--normalize=none", "--alpha=0.7", "--seed=3"},
                "f"),
            0);
  const auto got = values_of(read_rows(dir("f/metrics.csv")), "value");
  const auto want = testing::oracle_singular_values(synth({12, 800, 0.7, 3}));
  ASSERT_EQ(got.size(), 12u);
  EXPECT_LE(testing::max_relative_error(got, want), 1e-8);
}

TEST_F(CliTest, InterleaveSeedsGiveIdenticalValues) {
  const std::vector<std::string> base{"run-federated", "--n=1200", "--leaves=5", "--no-dp", "--schedule=interleave"};
  auto a = base;
  a.push_back("--schedule-seed=1");
  auto b = base;
  b.push_back("--schedule-seed=77");
  ASSERT_EQ(cli(a, "a"), 0);
  ASSERT_EQ(cli(b, "b"), 0);
  EXPECT_EQ(values_of(read_rows(dir("a/metrics.csv")), "value"), values_of(read_rows(dir("b/metrics.csv")), "value"));
  EXPECT_EQ(values_of(read_rows(dir("a/metrics.csv")), "schedule_replay_max_diff").at(0), 0.0);
}

TEST_F(CliTest, FederatedRowsCarryLevelRanksAndMergeCount) {
  ASSERT_EQ(cli({"run-federated", "--n=800", "--leaves=4", "--fanout=2", "--no-dp"}, "f"), 0);
  const auto rows = read_rows(dir("f/metrics.csv"));
  EXPECT_EQ(values_of(rows, "level_rank").size(), 4u + 2u + 1u);
  EXPECT_EQ(values_of(rows, "merge_count").at(0), 3.0);
}

TEST_F(CliTest, UtilitySweepCoversTheEpsilonGrid) {
  ASSERT_EQ(cli({"utility-sweep", "--delta=0.05", "--d=20", "--n=5000", "--reps=1", "--alphas=1"}, "u"), 0);
  const auto rows = read_rows(dir("u/metrics.csv"));
  std::set<std::string> methods;
  std::set<long> eps_tenths;
  for (const auto& r : rows) {
    const auto j = nlohmann::json::parse(r.params);
    methods.insert(j.at("method").get<std::string>());
    eps_tenths.insert(std::lround(j.at("epsilon").get<double>() * 10.0));
    if (r.metric == "qa_abs") {
      EXPECT_GE(r.value, 0.0);
      EXPECT_LE(r.value, 1.0 + 1e-12);
    }
  }
  EXPECT_EQ(methods, (std::set<std::string>{"fpca", "mod_sulq_streaming", "mod_sulq_symmetric"}));
  ASSERT_EQ(eps_tenths.size(), 40u);
  EXPECT_EQ(*eps_tenths.begin(), 1);
  EXPECT_EQ(*eps_tenths.rbegin(), 40);
  EXPECT_EQ(rows.size(), 40u * 3u * 2u);
}

TEST_F(CliTest, UtilityWithoutMaskIsExact) {
  ASSERT_EQ(cli({"utility-sweep", "--no-dp", "--alphas=1", "--epsilons=1", "--reps=3"}, "u"), 0);
  const auto qa = values_of(read_rows(dir("u/metrics.csv")), "qa_abs");
  ASSERT_EQ(qa.size(), 9u);
  for (double q : qa) EXPECT_GE(q, 0.999);
}

TEST_F(CliTest, UtilityAtVanishingEpsilonLooksLikeRandomOverlap) {
  const std::size_t d = 20;
  ASSERT_EQ(cli({"utility-sweep", "--alphas=1", "--epsilons=0.001", "--reps=60", "--delta=0.05", "--n=2000"}, "u"), 0);
  const auto rows = read_rows(dir("u/metrics.csv"));

  // Baseline: |<v, u>| for u uniform on the sphere.
  CounterRng rng(2024);
  const std::size_t trials = 20000;
  double bsum = 0.0, bsq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<double> u(d);
    double nn = 0.0;
    for (double& x : u) {
      x = rng.normal();
      nn += x * x;
    }
    const double q = std::abs(u[0]) / std::sqrt(nn);
    bsum += q;
    bsq += q * q;
  }
  const double bmean = bsum / trials;
  const double bvar = bsq / trials - bmean * bmean;

  for (const char* method : {"fpca", "mod_sulq_streaming", "mod_sulq_symmetric"}) {
    std::vector<double> qa;
    for (const auto& r : rows)
      if (r.metric == "qa_abs" && nlohmann::json::parse(r.params).at("method") == method) qa.push_back(r.value);
    ASSERT_EQ(qa.size(), 60u);
    double s = 0.0;
    for (double q : qa) s += q;
    const double mean = s / qa.size();
    const double se = std::sqrt(bvar / qa.size() + bvar / trials);
    EXPECT_LE(std::abs(mean - bmean), 4.0 * se) << method << " mean " << mean << " baseline " << bmean;
  }
}

TEST_F(CliTest, DepthProbeOnSynthIsWithinBound) {
  ASSERT_EQ(cli({"depth-probe", "--d=32", "--n=256", "--rank=4", "--normalize=none"}, "p"), 0);
  const auto rows = read_rows(dir("p/metrics.csv"));
  const auto ok = values_of(rows, "depth_ok");
  ASSERT_EQ(ok.size(), 3u);
  for (double f : ok) EXPECT_EQ(f, 1.0);

  const double rho = residual_rho(synth({32, 256, 1.0, 1}), 4);
  const auto bound = values_of(rows, "depth_bound");
  for (std::size_t q = 1; q <= 3; ++q)
    EXPECT_NEAR(bound[q - 1], (std::pow(1.0 + std::numbers::sqrt2, q + 1.0) - 1.0) * rho, 1e-12 * bound[q - 1]);
}

TEST_F(CliTest, DepthProbeOnExactRankInputIsExact) {
  const Matrix y = multiply(testing::random_gaussian(16, 3, 5), testing::random_gaussian(3, 64, 6));
  save_csv(dir("y.csv").string(), y);
  ASSERT_EQ(cli({"depth-probe", "--data=" + dir("y.csv").string(), "--rank=3", "--normalize=none"}, "p"), 0);
  for (double m : values_of(read_rows(dir("p/metrics.csv")), "depth_measured")) EXPECT_LE(m, 1e-8);
}

TEST_F(CliTest, DepthProbeRejectsIndivisibleColumns) {
  EXPECT_EQ(cli({"depth-probe", "--d=8", "--n=30", "--rank=2", "--depths=3"}, "p"), app::kConfigError);
}

TEST_F(CliTest, EveryRowCarriesTheManifestRunId) {
  ASSERT_EQ(cli({"run-federated", "--n=600", "--leaves=3"}, "f"), 0);
  const auto id = manifest(dir("f/manifest.txt")).at("meta.run_id");
  for (const auto& r : read_rows(dir("f/metrics.csv"))) EXPECT_EQ(r.run_id, id);
}

TEST_F(CliTest, ReplayReproducesEveryCommand) {
  const std::vector<std::vector<std::string>> runs = {
      {"synth", "--d=5", "--n=40", "--seed=4"},
      {"run-edge", "--n=700", "--seed=5"},
      {"run-federated", "--n=900", "--leaves=3", "--schedule=adversarial", "--seed=6"},
      {"utility-sweep", "--reps=2", "--epsilons=0.5,2", "--n=800", "--seed=7"},
      {"depth-probe", "--d=16", "--n=64", "--rank=3", "--seed=8"},
  };
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string a = "a" + std::to_string(i), b = "b" + std::to_string(i);
    ASSERT_EQ(cli(runs[i], a), 0) << last_err_;
    ASSERT_EQ(cli({"replay", "--manifest=" + (dir(a) / "manifest.txt").string()}, b), 0) << last_err_;
    const std::string file = runs[i][0] == "synth" ? "matrix.csv" : "metrics.csv";
    EXPECT_EQ(slurp(dir(a) / file), slurp(dir(b) / file)) << runs[i][0];
  }
}

TEST_F(CliTest, ConfigFileSitsBetweenDefaultsAndFlags) {
  {
    std::ofstream cfg(dir("run.cfg"));
    cfg << "n=300\nd=12\nbatch=30\nno-dp=true\n";
  }
  ASSERT_EQ(cli({"run-edge", "--config=" + dir("run.cfg").string(), "--batch=60"}, "e"), 0) << last_err_;
  const auto m = manifest(dir("e/manifest.txt"));
  EXPECT_EQ(m.at("n"), "300");
  EXPECT_EQ(m.at("d"), "12");
  EXPECT_EQ(m.at("batch"), "60");
  EXPECT_EQ(m.at("no-dp"), "true");
  EXPECT_EQ(m.at("rank"), "10");
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli({"no-such-command"}, "x"), app::kConfigError);
  EXPECT_EQ(cli({"run-edge", "--lambda=1.5"}, "x"), app::kConfigError);
  EXPECT_EQ(cli({"run-edge", "--rank=30"}, "x"), app::kConfigError);
  EXPECT_EQ(cli({"run-edge", "--data=" + dir("missing.csv").string()}, "x"), app::kDataError);
  {
    std::ofstream bad(dir("bad.csv"));
    bad << "1,2\n3,nan\n";
  }
  EXPECT_EQ(cli({"run-edge", "--data=" + dir("bad.csv").string(), "--rank=1"}, "x"), app::kDataError);
  EXPECT_EQ(cli({"run-edge", "--omega-floor=0.001"}, "x"), app::kPrivacyInfeasible);
  EXPECT_EQ(cli({"replay", "--manifest=" + dir("missing.txt").string()}, "x"), app::kDataError);
}

TEST_F(CliTest, CsvDataInEitherOrientation) {
  const Matrix y = synth({6, 40, 1.0, 2});
  save_csv(dir("rows.csv").string(), y, Orientation::samples_as_rows);
  save_csv(dir("cols.csv").string(), y, Orientation::samples_as_columns);
  ASSERT_EQ(cli({"run-edge", "--data=" + dir("rows.csv").string(), "--rank=6", "--no-dp", "--fixed-rank"}, "r"), 0);
  ASSERT_EQ(cli({"run-edge", "--data=" + dir("cols.csv").string(), "--orientation=columns", "--rank=6", "--no-dp",
                 "--fixed-rank"},
                "c"),
            0);
  EXPECT_EQ(values_of(read_rows(dir("r/metrics.csv")), "value"), values_of(read_rows(dir("c/metrics.csv")), "value"));
}

}  // namespace
}  // namespace fpca
