#include "cellfree/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "cellfree/errors.hpp"

namespace cellfree {

namespace {

constexpr std::uint64_t kTrainStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kBaselineStream = 0xD1B54A32D192ED03ull;

std::ostream& precise(std::ostream& os) {
  return os << std::setprecision(std::numeric_limits<double>::max_digits10);
}

std::string sweep_label(ExperimentKind kind, std::string_view value) {
  return value.empty() ? std::string(experiment_name(kind)) : std::string(value);
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << contents;
}

template <typename F>
std::string render(F&& f) {
  std::ostringstream os;
  precise(os);
  f(os);
  return os.str();
}

}  // namespace

CellFreeEnv make_environment(const NetworkConfig& network, const PenaltyConfig& penalty,
                             std::uint64_t seed) {
  Rng rng(seed);
  const Topology topo = generate_topology(network, rng);
  const PilotBook pilots = generate_pilots(network, rng);
  return CellFreeEnv(network, effective_channel_stats(topo, pilots, network), penalty);
}

RunOutcome run_training(const RunSetup& setup) {
  const auto start = std::chrono::steady_clock::now();
  NetworkConfig network = setup.network;
  network.seed = setup.seed;
  Hyperparameters hp = setup.hyper;
  hp.seed = setup.seed;

  CellFreeEnv env = make_environment(network, setup.penalty, setup.seed);
  RunOutcome out;
  out.seed = setup.seed;
  out.sweep_value = setup.sweep_value;

  const BeamformingMatrix wf = baseline_waterfilling(env.stats());
  out.waterfilling_ee = energy_efficiency(wf, env.stats(), env.order(), network);
  out.waterfilling_violations =
      hp.steps_per_episode * check_constraints(wf, env.stats(), env.order(), network).violations();

  Rng baseline_rng(setup.seed ^ kBaselineStream);
  double random_sum = 0.0;
  for (int t = 0; t < hp.steps_per_episode; ++t) {
    const BeamformingMatrix w = baseline_random(network, baseline_rng);
    random_sum += energy_efficiency(w, env.stats(), env.order(), network);
    out.random_violations += check_constraints(w, env.stats(), env.order(), network).violations();
  }
  out.random_ee = random_sum / hp.steps_per_episode;

  Rng rng(setup.seed ^ kTrainStream);
  out.agent = new_agent(network.num_aps, network.num_ues, hp, rng);
  out.history = train(env, out.agent, hp, rng);
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<RunOutcome> run_all(const std::vector<RunSetup>& setups, int jobs) {
  std::vector<RunOutcome> results(setups.size());
  std::vector<std::exception_ptr> errors(setups.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < setups.size(); i = next++) {
      try {
        results[i] = run_training(setups[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(setups.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

std::uint64_t replicate_seed(const ExperimentSpec& spec, int replicate) {
  return spec.hyper.seed + static_cast<std::uint64_t>(replicate);
}

RunSetup setup_for(const ExperimentSpec& spec, std::string_view sweep_value, int replicate) {
  RunSetup s;
  s.network = spec.network;
  s.hyper = spec.hyper;
  s.penalty = spec.penalty;
  s.seed = replicate_seed(spec, replicate);
  s.sweep_value = std::string(sweep_value);
  if (sweep_value.empty()) return s;

  try {
    switch (spec.experiment) {
      case ExperimentKind::kSweepPower: {
        const bool has_unit = sweep_value.find_first_of("dmW") != std::string_view::npos;
        s.network.p_u = has_unit ? parse_power(sweep_value)
                                 : dbm_to_mw(parse_power(sweep_value));
        break;
      }
      case ExperimentKind::kSweepDiscount:
        s.hyper.zeta = parse_power(sweep_value);
        break;
      case ExperimentKind::kSweepHidden:
        s.hyper.hidden_dims = parse_hidden_dims(sweep_value);
        break;
      default:
        break;
    }
  } catch (const std::invalid_argument& e) {
    throw ValidationError("bad sweep value '" + std::string(sweep_value) + "': " + e.what());
  }
  s.network.validate();
  s.hyper.validate();
  return s;
}

int episodes_to_fraction(const TrainingHistory& history, double fraction, int window) {
  const double target = fraction * final_mean_ee(history, window);
  for (std::size_t i = 0; i < history.size(); ++i)
    if (history[i].mean_ee >= target) return static_cast<int>(i);
  return -1;
}

ConvergenceResult run_convergence(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<RunSetup> setups;
  for (int r = 0; r < spec.replicates; ++r) setups.push_back(setup_for(spec, "", r));
  return {run_all(setups, spec.jobs)};
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  SweepResult result;
  result.axis = spec.experiment;
  std::vector<RunSetup> setups;
  for (const auto& value : spec.sweep_values)
    for (int r = 0; r < spec.replicates; ++r) setups.push_back(setup_for(spec, value, r));
  result.runs = run_all(setups, spec.jobs);

  std::size_t i = 0;
  for (const auto& value : spec.sweep_values) {
    SweepStatsRow stats;
    stats.value = value;
    stats.replicates = spec.replicates;
    std::vector<double> finals;
    for (int r = 0; r < spec.replicates; ++r, ++i) {
      const RunOutcome& run = result.runs[i];
      const double f = final_mean_ee(run.history, spec.final_window);
      finals.push_back(f);
      result.summary.push_back({value, run.seed, f});
    }
    for (double f : finals) stats.mean += f;
    stats.mean /= static_cast<double>(finals.size());
    if (finals.size() > 1) {
      double ss = 0.0;
      for (double f : finals) ss += (f - stats.mean) * (f - stats.mean);
      stats.stddev = std::sqrt(ss / static_cast<double>(finals.size() - 1));
    }
    result.stats.push_back(stats);
  }
  return result;
}

BaselineReport run_baselines(const ExperimentSpec& spec) {
  spec.validate();
  const NetworkConfig& cfg = spec.network;
  const std::uint64_t seed = replicate_seed(spec, 0);
  const CellFreeEnv env = make_environment(cfg, spec.penalty, seed);

  auto evaluate = [&](std::string method, std::uint64_t row_seed, const BeamformingMatrix& w) {
    BaselineRow row;
    row.method = std::move(method);
    row.seed = row_seed;
    const EnvState state = sinr(w, env.stats(), env.order(), SinrMode::kSic);
    row.gamma = state.gamma;
    row.rates = rate(state);
    row.p_total = total_power(w, cfg);
    row.ee = row.rates.sum() / row.p_total;
    row.flags = check_constraints(w, env.stats(), env.order(), cfg);
    for (Eigen::Index k = 0; k < w.w.cols(); ++k)
      row.max_column_error = std::max(row.max_column_error, std::abs(w.w.col(k).sum() - 1.0));
    return row;
  };

  BaselineReport report;
  report.rows.push_back(evaluate("waterfilling", seed, baseline_waterfilling(env.stats())));
  report.rows.push_back(
      evaluate("uniform", seed, uniform_beamforming(cfg.num_aps, cfg.num_ues)));
  for (int r = 0; r < spec.replicates; ++r) {
    const std::uint64_t s = replicate_seed(spec, r);
    Rng rng(s ^ kBaselineStream);
    report.rows.push_back(evaluate("random", s, baseline_random(cfg, rng)));
    report.random_mean_ee += report.rows.back().ee;
  }
  report.random_mean_ee /= spec.replicates;
  return report;
}

FlopsReport run_flops_report(const ExperimentSpec& spec) {
  FlopsReport report;
  const int m = spec.network.num_aps;
  const int k = spec.network.num_ues;
  report.configured =
      flops_inference(actor_spec_for(m, k, spec.hyper), critic_spec_for(m, k, spec.hyper));
  const Hyperparameters reference_hp;
  report.reference =
      flops_inference(actor_spec_for(10, 6, reference_hp), critic_spec_for(10, 6, reference_hp));
  return report;
}

void write_history_csv(std::ostream& os, ExperimentKind kind, const std::vector<RunOutcome>& runs,
                       bool include_baselines) {
  precise(os);
  os << "experiment,sweep_value,replicate_seed,method,episode,mean_ee,mean_reward,critic_loss,"
        "constraint_violations\n";
  for (const RunOutcome& run : runs) {
    const std::string prefix = std::string(experiment_name(kind)) + "," +
                               sweep_label(kind, run.sweep_value) + "," + std::to_string(run.seed);
    for (const EpisodeMetrics& m : run.history) {
      os << prefix << ",ddpg," << m.episode << ',' << m.mean_ee << ',' << m.mean_reward << ','
         << m.critic_loss << ',' << m.constraint_violations << '\n';
      if (!include_baselines) continue;
      os << prefix << ",waterfilling," << m.episode << ',' << run.waterfilling_ee << ",0,0,"
         << run.waterfilling_violations << '\n';
      os << prefix << ",random," << m.episode << ',' << run.random_ee << ",0,0,"
         << run.random_violations << '\n';
    }
  }
}

void write_convergence_summary_csv(std::ostream& os, const ConvergenceResult& result, int window) {
  precise(os);
  os << "replicate_seed,method,final_ee,episodes_to_90pct\n";
  for (const RunOutcome& run : result.runs) {
    os << run.seed << ",ddpg," << final_mean_ee(run.history, window) << ','
       << episodes_to_fraction(run.history, 0.9, window) << '\n';
    os << run.seed << ",waterfilling," << run.waterfilling_ee << ",0\n";
    os << run.seed << ",random," << run.random_ee << ",0\n";
  }
}

void write_sweep_summary_csv(std::ostream& os, const SweepResult& result) {
  precise(os);
  os << "experiment,sweep_value,replicate_seed,final_ee\n";
  for (const auto& row : result.summary)
    os << experiment_name(result.axis) << ',' << row.value << ',' << row.seed << ','
       << row.final_ee << '\n';
}

void write_sweep_stats_csv(std::ostream& os, const SweepResult& result) {
  precise(os);
  os << "experiment,sweep_value,mean_final_ee,std_final_ee,replicates\n";
  for (const auto& row : result.stats)
    os << experiment_name(result.axis) << ',' << row.value << ',' << row.mean << ',' << row.stddev
       << ',' << row.replicates << '\n';
}

void write_timing_csv(std::ostream& os, const std::vector<RunOutcome>& runs) {
  os << "sweep_value,replicate_seed,wall_seconds\n";
  for (const RunOutcome& run : runs)
    os << run.sweep_value << ',' << run.seed << ',' << std::fixed << std::setprecision(3)
       << run.wall_seconds << std::defaultfloat << '\n';
}

void write_baselines_csv(std::ostream& os, const BaselineReport& report) {
  precise(os);
  const Eigen::Index k_count = report.rows.empty() ? 0 : report.rows.front().gamma.size();
  os << "method,replicate_seed,ee,p_total,sic_ok,norm_ok,power_ok,max_column_error";
  for (Eigen::Index k = 0; k < k_count; ++k) os << ",gamma_" << k + 1;
  for (Eigen::Index k = 0; k < k_count; ++k) os << ",rate_" << k + 1;
  os << '\n';
  for (const auto& row : report.rows) {
    os << row.method << ',' << row.seed << ',' << row.ee << ',' << row.p_total << ','
       << row.flags.sic_ok << ',' << row.flags.norm_ok << ',' << row.flags.power_ok << ','
       << row.max_column_error;
    for (Eigen::Index k = 0; k < k_count; ++k) os << ',' << row.gamma(k);
    for (Eigen::Index k = 0; k < k_count; ++k) os << ',' << row.rates(k);
    os << '\n';
  }
}

void write_flops_csv(std::ostream& os, const FlopsCount& flops) {
  os << "policy_flops,value_flops\n" << flops.policy << ',' << flops.value << '\n';
}

int run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  namespace fs = std::filesystem;
  const fs::path out(spec.output_dir);
  fs::create_directories(out);
  write_file(out / "resolved-config.txt",
             render([&](std::ostream& os) { write_resolved_config(os, spec); }));

  auto save_checkpoints = [&](const std::vector<RunOutcome>& runs) {
    const fs::path dir = out / "checkpoints";
    fs::create_directories(dir);
    for (const RunOutcome& run : runs) {
      const std::string stem =
          (run.sweep_value.empty() ? std::string() : run.sweep_value + "_") + "seed" +
          std::to_string(run.seed);
      save_params((dir / (stem + "_actor.mlp")).string(), run.agent.actor);
      save_params((dir / (stem + "_critic.mlp")).string(), run.agent.critic);
    }
  };

  switch (spec.experiment) {
    case ExperimentKind::kConvergence: {
      const ConvergenceResult result = run_convergence(spec);
      write_file(out / "history.csv", render([&](std::ostream& os) {
                   write_history_csv(os, spec.experiment, result.runs, true);
                 }));
      write_file(out / "summary.csv", render([&](std::ostream& os) {
                   write_convergence_summary_csv(os, result, spec.final_window);
                 }));
      write_file(out / "timing.csv",
                 render([&](std::ostream& os) { write_timing_csv(os, result.runs); }));
      save_checkpoints(result.runs);
      for (const RunOutcome& run : result.runs)
        log << "seed " << run.seed << ": ddpg " << final_mean_ee(run.history, spec.final_window)
            << "  waterfilling " << run.waterfilling_ee << "  random " << run.random_ee << '\n';
      break;
    }
    case ExperimentKind::kSweepPower:
    case ExperimentKind::kSweepDiscount:
    case ExperimentKind::kSweepHidden: {
      const SweepResult result = run_sweep(spec);
      write_file(out / "history.csv", render([&](std::ostream& os) {
                   write_history_csv(os, spec.experiment, result.runs, false);
                 }));
      write_file(out / "summary.csv",
                 render([&](std::ostream& os) { write_sweep_summary_csv(os, result); }));
      write_file(out / "summary_stats.csv",
                 render([&](std::ostream& os) { write_sweep_stats_csv(os, result); }));
      write_file(out / "timing.csv",
                 render([&](std::ostream& os) { write_timing_csv(os, result.runs); }));
      save_checkpoints(result.runs);
      for (const auto& row : result.stats)
        log << experiment_name(spec.experiment) << ' ' << row.value << ": mean " << row.mean
            << "  std " << row.stddev << '\n';
      break;
    }
    case ExperimentKind::kBaselines: {
      const BaselineReport report = run_baselines(spec);
      write_file(out / "baselines.csv",
                 render([&](std::ostream& os) { write_baselines_csv(os, report); }));
      for (const auto& row : report.rows)
        log << row.method << " seed " << row.seed << ": ee " << row.ee << '\n';
      log << "random mean: ee " << report.random_mean_ee << '\n';
      break;
    }
    case ExperimentKind::kFlops: {
      const FlopsReport report = run_flops_report(spec);
      write_file(out / "flops.csv",
                 render([&](std::ostream& os) { write_flops_csv(os, report.configured); }));
      log << "configured: policy " << report.configured.policy << "  value "
          << report.configured.value << '\n';
      log << "reference (M=10, K=6, 256x128): policy " << report.reference.policy << "  value "
          << report.reference.value << '\n';
      break;
    }
  }
  return 0;
}

}  // namespace cellfree
