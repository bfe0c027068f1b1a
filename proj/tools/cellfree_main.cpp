#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cellfree/config.hpp"
#include "cellfree/errors.hpp"
#include "cellfree/harness.hpp"

namespace {

std::vector<std::string> default_sweep(cellfree::ExperimentKind kind) {
  using cellfree::ExperimentKind;
  switch (kind) {
    case ExperimentKind::kSweepPower:
      return {"4", "8", "12", "16", "20", "24"};
    case ExperimentKind::kSweepDiscount:
      return {"1e-10", "0.1", "0.7", "0.8", "0.9", "0.9999999999"};
    case ExperimentKind::kSweepHidden:
      return {"256x128", "512x256"};
    default:
      return {};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-free massive MIMO beamforming with DDPG"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> replicates, episodes, steps, jobs;
  std::vector<std::string> values;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "train DDPG and log the convergence curves"},
      {"sweep-power", "final EE over uplink power values (dBm)"},
      {"sweep-discount", "final EE over discount factors"},
      {"sweep-hidden", "final EE over hidden-layer shapes"},
      {"baselines", "evaluate water-filling, uniform and random matrices"},
      {"flops", "report inference FLOPS"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--replicates", replicates, "replicate count")->check(CLI::PositiveNumber);
    sub->add_option("--episodes", episodes, "episodes per run")->check(CLI::PositiveNumber);
    sub->add_option("--steps", steps, "steps per episode")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
    if (name.starts_with("sweep-"))
      sub->add_option("--values", values, "sweep values")->delimiter(',');
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    cellfree::ExperimentSpec spec =
        config_path.empty() ? cellfree::paper_defaults() : cellfree::load_config(config_path);
    spec.experiment = cellfree::parse_experiment(command);
    if (seed) spec.network.seed = spec.hyper.seed = *seed;
    if (out_dir) spec.output_dir = *out_dir;
    if (replicates) spec.replicates = *replicates;
    if (episodes) spec.hyper.episodes = *episodes;
    if (steps) spec.hyper.steps_per_episode = *steps;
    if (jobs) spec.jobs = *jobs;
    if (!values.empty()) spec.sweep_values = values;
    if (spec.sweep_values.empty()) spec.sweep_values = default_sweep(spec.experiment);
    spec.network.validate();
    spec.hyper.validate();
    return cellfree::run_experiment(spec, std::cout);
  } catch (const cellfree::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cellfree::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
