#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cellfree/config.hpp"
#include "cellfree/errors.hpp"
#include "cellfree/harness.hpp"

using namespace cellfree;

namespace {

const char* kMinimal =
    "M = 3\nK = 2\nradius = 20\nvarsigma0 = -30 dB\ntau_l = 2\ndelta_l = 20 dBm\n"
    "p_u = 16 dBm\nsigma2 = -80 dBm\nP_AP = 20 dBm\nP_UE = 20 dBm\nP_s = 1 dBm\n";

ExperimentSpec tiny_spec(ExperimentKind kind) {
  std::istringstream is(kMinimal);
  ExperimentSpec spec = parse_config(is);
  spec.experiment = kind;
  spec.hyper.episodes = 3;
  spec.hyper.steps_per_episode = 8;
  spec.hyper.batch_size = 4;
  spec.hyper.hidden_dims = {8, 4};
  spec.replicates = 2;
  return spec;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST(Config, ReferenceFile) {
  const ExperimentSpec spec = load_config(CELLFREE_SOURCE_DIR "/configs/paper.cfg");
  EXPECT_EQ(spec.network.num_aps, 10);
  EXPECT_EQ(spec.network.num_ues, 6);
  EXPECT_EQ(spec.network.tau_l, 6);
  EXPECT_EQ(spec.hyper.zeta, 0.7);
  EXPECT_EQ(spec.hyper.batch_size, 32);
  EXPECT_NEAR(spec.network.p_u, 39.8107, 39.8107e-4);
  EXPECT_NEAR(spec.network.varsigma0, 1e-3, 1e-15);
  EXPECT_NEAR(spec.network.sigma2, 1e-8, 1e-20);
  EXPECT_EQ(spec.hyper.hidden_dims, (std::vector<int>{256, 128}));
}

TEST(Config, PowerUnits) {
  EXPECT_NEAR(parse_power("16 dBm"), 39.8107, 39.8107e-4);
  EXPECT_NEAR(parse_power("-30 dB"), 1e-3, 1e-15);
  EXPECT_DOUBLE_EQ(parse_power("2.5 mW"), 2.5);
  EXPECT_DOUBLE_EQ(parse_power("7"), 7.0);
  EXPECT_NEAR(mw_to_dbm(dbm_to_mw(13.0)), 13.0, 1e-12);
  EXPECT_ANY_THROW(parse_power("12 furlongs"));
}

TEST(Config, MissingKeyIsNamed) {
  std::istringstream is("M = 3\nK = 2\n");
  try {
    parse_config(is);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("radius"), std::string::npos);
  }
}

TEST(Config, ParseErrorCarriesLine) {
  std::istringstream is(std::string(kMinimal) + "# comment\nbogus line\n");
  try {
    parse_config(is);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 13u);
  }
  std::istringstream unknown(std::string(kMinimal) + "colour = blue\n");
  EXPECT_THROW(parse_config(unknown), ParseError);
}

TEST(Config, InvariantViolation) {
  std::istringstream is(std::string(kMinimal) + "zeta = 2\n");
  EXPECT_THROW(parse_config(is), ConfigError);
}

TEST(Config, ResolvedConfigRoundTrips) {
  ExperimentSpec spec = tiny_spec(ExperimentKind::kSweepHidden);
  spec.sweep_values = {"8x4", "16x8"};
  std::stringstream ss;
  write_resolved_config(ss, spec);
  const ExperimentSpec back = parse_config(ss);
  std::stringstream again;
  write_resolved_config(again, back);
  EXPECT_EQ(ss.str(), again.str());
  EXPECT_EQ(back.network.p_u, spec.network.p_u);
  EXPECT_EQ(back.sweep_values, spec.sweep_values);
}

TEST(Config, HiddenDims) {
  EXPECT_EQ(parse_hidden_dims("512x256"), (std::vector<int>{512, 256}));
  EXPECT_EQ(format_hidden_dims({256, 128}), "256x128");
  EXPECT_ANY_THROW(parse_hidden_dims("x"));
}

TEST(Spec, SweepNeedsValues) {
  ExperimentSpec spec = tiny_spec(ExperimentKind::kSweepPower);
  EXPECT_ANY_THROW(spec.validate());
  spec.sweep_values = {"4"};
  spec.replicates = 0;
  EXPECT_ANY_THROW(spec.validate());
}

TEST(Setup, SweepAxes) {
  ExperimentSpec spec = tiny_spec(ExperimentKind::kSweepPower);
  EXPECT_NEAR(setup_for(spec, "16", 0).network.p_u, 39.8107, 1e-3);
  EXPECT_DOUBLE_EQ(setup_for(spec, "5 mW", 0).network.p_u, 5.0);
  EXPECT_EQ(setup_for(spec, "16", 3).seed, spec.hyper.seed + 3);
  spec.experiment = ExperimentKind::kSweepDiscount;
  EXPECT_DOUBLE_EQ(setup_for(spec, "1e-10", 0).hyper.zeta, 1e-10);
  spec.experiment = ExperimentKind::kSweepHidden;
  EXPECT_EQ(setup_for(spec, "512x256", 0).hyper.hidden_dims, (std::vector<int>{512, 256}));
  EXPECT_THROW(setup_for(spec, "bad", 0), ConfigError);
}

TEST(Convergence, RowsAndConstantBaselines) {
  const ExperimentSpec spec = tiny_spec(ExperimentKind::kConvergence);
  const ConvergenceResult r = run_convergence(spec);
  ASSERT_EQ(r.runs.size(), 2u);
  std::ostringstream os;
  write_history_csv(os, spec.experiment, r.runs, true);
  const auto rows = lines(os.str());
  EXPECT_EQ(rows.size(), 1u + 2 * 3 * 3);
  std::string wf_value;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].find(",waterfilling,") == std::string::npos) continue;
    if (rows[i].find(",1,waterfilling,") == std::string::npos) continue;
    const std::string value = rows[i].substr(rows[i].find(',', rows[i].find(",waterfilling,") + 14));
    if (wf_value.empty()) wf_value = value.substr(0, value.find(',', 1));
    EXPECT_EQ(value.substr(0, value.find(',', 1)), wf_value);
  }
  EXPECT_FALSE(wf_value.empty());
}

TEST(Sweep, SummaryRowsPerValueAndReplicate) {
  ExperimentSpec spec = tiny_spec(ExperimentKind::kSweepPower);
  spec.sweep_values = {"4", "8", "12"};
  spec.jobs = 3;
  const SweepResult r = run_sweep(spec);
  EXPECT_EQ(r.summary.size(), 6u);
  ASSERT_EQ(r.stats.size(), 3u);
  EXPECT_EQ(r.stats[1].value, "8");
  const double m = (r.summary[2].final_ee + r.summary[3].final_ee) / 2;
  EXPECT_NEAR(r.stats[1].mean, m, 1e-15);
  std::ostringstream os;
  write_sweep_summary_csv(os, r);
  EXPECT_EQ(lines(os.str()).size(), 7u);
}

TEST(Sweep, ParallelMatchesSerial) {
  ExperimentSpec spec = tiny_spec(ExperimentKind::kSweepDiscount);
  spec.sweep_values = {"0.1", "0.9"};
  const SweepResult serial = run_sweep(spec);
  spec.jobs = 4;
  const SweepResult parallel = run_sweep(spec);
  std::ostringstream a, b;
  write_history_csv(a, spec.experiment, serial.runs, false);
  write_history_csv(b, spec.experiment, parallel.runs, false);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Baselines, UniformMatchesDirectEvaluation) {
  const ExperimentSpec spec = tiny_spec(ExperimentKind::kBaselines);
  const BaselineReport r = run_baselines(spec);
  const CellFreeEnv env = make_environment(spec.network, spec.penalty, replicate_seed(spec, 0));
  const BeamformingMatrix u = uniform_beamforming(3, 2);
  for (const auto& row : r.rows) {
    EXPECT_LT(row.max_column_error, 1e-9);
    EXPECT_TRUE(row.flags.norm_ok);
    if (row.method == "uniform") {
      EXPECT_EQ(row.ee, energy_efficiency(u, env.stats(), env.order(), spec.network));
    }
  }
  EXPECT_EQ(r.rows.size(), 2u + 2);
}

TEST(Flops, CsvHasTwoNamedColumns) {
  ExperimentSpec spec = tiny_spec(ExperimentKind::kFlops);
  const FlopsReport r = run_flops_report(spec);
  EXPECT_EQ(r.reference.policy, 41984);
  EXPECT_EQ(r.reference.value, 49792);
  std::ostringstream os;
  write_flops_csv(os, r.configured);
  const auto rows = lines(os.str());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "policy_flops,value_flops");
  EXPECT_EQ(std::stoll(rows[1].substr(0, rows[1].find(','))), r.configured.policy);
}

TEST(Experiment, RerunIsByteIdentical) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "cellfree_harness_test";
  fs::remove_all(root);
  ExperimentSpec spec = tiny_spec(ExperimentKind::kConvergence);
  std::ostringstream log;
  for (const char* d : {"a", "b"}) {
    spec.output_dir = (root / d).string();
    EXPECT_EQ(run_experiment(spec, log), 0);
  }
  for (const char* f : {"history.csv", "summary.csv", "resolved-config.txt"})
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  EXPECT_TRUE(fs::exists(root / "a" / "timing.csv"));
  EXPECT_TRUE(fs::exists(root / "a" / "checkpoints" / "seed1_actor.mlp"));
  const MlpParams actor = load_params((root / "a" / "checkpoints" / "seed1_actor.mlp").string());
  EXPECT_TRUE(actor.all_finite());
  fs::remove_all(root);
}

TEST(Experiment, EpisodesToFraction) {
  TrainingHistory h(4);
  h[0].mean_ee = 1;
  h[1].mean_ee = 5;
  h[2].mean_ee = 10;
  h[3].mean_ee = 10;
  EXPECT_EQ(episodes_to_fraction(h, 0.9, 2), 2);
  EXPECT_EQ(episodes_to_fraction(h, 0.4, 2), 1);
}
