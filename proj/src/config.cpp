#include "cellfree/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "cellfree/errors.hpp"

namespace cellfree {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_integer(std::string_view text) {
  text = trim(text);
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(text) + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = trim(text.substr(start, comma == std::string_view::npos ? text.npos
                                                                               : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

constexpr const char* kRequiredKeys[] = {"M",     "K",      "radius", "varsigma0",
                                         "tau_l", "delta_l", "p_u",   "sigma2",
                                         "P_AP",  "P_UE",   "P_s"};

using Setter = void (*)(ExperimentSpec&, std::string_view);

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"M", [](ExperimentSpec& s, std::string_view v) { s.network.num_aps = int(parse_integer(v)); }},
      {"K", [](ExperimentSpec& s, std::string_view v) { s.network.num_ues = int(parse_integer(v)); }},
      {"radius", [](ExperimentSpec& s, std::string_view v) { s.network.radius = parse_number(v); }},
      {"d_min", [](ExperimentSpec& s, std::string_view v) { s.network.d_min = parse_number(v); }},
      {"varsigma0", [](ExperimentSpec& s, std::string_view v) { s.network.varsigma0 = parse_power(v); }},
      {"tau_l", [](ExperimentSpec& s, std::string_view v) { s.network.tau_l = int(parse_integer(v)); }},
      {"delta_l", [](ExperimentSpec& s, std::string_view v) { s.network.delta_l = parse_power(v); }},
      {"p_u", [](ExperimentSpec& s, std::string_view v) { s.network.p_u = parse_power(v); }},
      {"P_u_max", [](ExperimentSpec& s, std::string_view v) { s.network.p_u_max = parse_power(v); }},
      {"sigma2", [](ExperimentSpec& s, std::string_view v) { s.network.sigma2 = parse_power(v); }},
      {"P_AP", [](ExperimentSpec& s, std::string_view v) { s.network.p_ap = parse_power(v); }},
      {"P_UE", [](ExperimentSpec& s, std::string_view v) { s.network.p_ue = parse_power(v); }},
      {"P_s", [](ExperimentSpec& s, std::string_view v) { s.network.p_s = parse_power(v); }},
      {"P_max", [](ExperimentSpec& s, std::string_view v) { s.network.p_max = parse_power(v); }},
      {"pilot_mode",
       [](ExperimentSpec& s, std::string_view v) {
         v = trim(v);
         if (v == "orthonormal-reuse")
           s.network.pilot_mode = PilotMode::kOrthonormalReuse;
         else if (v == "random-unit")
           s.network.pilot_mode = PilotMode::kRandomUnit;
         else
           throw std::invalid_argument("unknown pilot_mode '" + std::string(v) + "'");
       }},
      {"mmse_index_mode",
       [](ExperimentSpec& s, std::string_view v) {
         v = trim(v);
         if (v == "as-printed")
           s.network.mmse_index_mode = MmseIndexMode::kAsPrinted;
         else if (v == "per-n")
           s.network.mmse_index_mode = MmseIndexMode::kPerInterferer;
         else
           throw std::invalid_argument("unknown mmse_index_mode '" + std::string(v) + "'");
       }},
      {"seed",
       [](ExperimentSpec& s, std::string_view v) {
         const auto seed = static_cast<std::uint64_t>(parse_integer(v));
         s.network.seed = seed;
         s.hyper.seed = seed;
       }},
      {"zeta", [](ExperimentSpec& s, std::string_view v) { s.hyper.zeta = parse_number(v); }},
      {"lr_u", [](ExperimentSpec& s, std::string_view v) { s.hyper.lr_actor = parse_number(v); }},
      {"lr_Q", [](ExperimentSpec& s, std::string_view v) { s.hyper.lr_critic = parse_number(v); }},
      {"tau", [](ExperimentSpec& s, std::string_view v) { s.hyper.tau = parse_number(v); }},
      {"N", [](ExperimentSpec& s, std::string_view v) { s.hyper.batch_size = int(parse_integer(v)); }},
      {"episodes", [](ExperimentSpec& s, std::string_view v) { s.hyper.episodes = int(parse_integer(v)); }},
      {"steps_per_episode",
       [](ExperimentSpec& s, std::string_view v) { s.hyper.steps_per_episode = int(parse_integer(v)); }},
      {"noise_sigma0", [](ExperimentSpec& s, std::string_view v) { s.hyper.noise_sigma0 = parse_number(v); }},
      {"noise_decay", [](ExperimentSpec& s, std::string_view v) { s.hyper.noise_decay = parse_number(v); }},
      {"buffer_capacity",
       [](ExperimentSpec& s, std::string_view v) {
         const auto n = parse_integer(v);
         if (n < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
         s.hyper.buffer_capacity = static_cast<std::size_t>(n);
       }},
      {"buffer_reset_per_episode",
       [](ExperimentSpec& s, std::string_view v) { s.hyper.buffer_reset_per_episode = parse_bool(v); }},
      {"update_cadence",
       [](ExperimentSpec& s, std::string_view v) {
         v = trim(v);
         if (v == "per-step")
           s.hyper.cadence = UpdateCadence::kPerStep;
         else if (v == "per-episode")
           s.hyper.cadence = UpdateCadence::kPerEpisode;
         else
           throw std::invalid_argument("unknown update_cadence '" + std::string(v) + "'");
       }},
      {"hidden_dims", [](ExperimentSpec& s, std::string_view v) { s.hyper.hidden_dims = parse_hidden_dims(v); }},
      {"leaky_slope", [](ExperimentSpec& s, std::string_view v) { s.hyper.leaky_slope = parse_number(v); }},
      {"adam_beta1", [](ExperimentSpec& s, std::string_view v) { s.hyper.adam_beta1 = parse_number(v); }},
      {"adam_beta2", [](ExperimentSpec& s, std::string_view v) { s.hyper.adam_beta2 = parse_number(v); }},
      {"adam_epsilon", [](ExperimentSpec& s, std::string_view v) { s.hyper.adam_epsilon = parse_number(v); }},
      {"reward_scale", [](ExperimentSpec& s, std::string_view v) { s.hyper.reward_scale = parse_number(v); }},
      {"penalty_enabled", [](ExperimentSpec& s, std::string_view v) { s.penalty.enabled = parse_bool(v); }},
      {"penalty_factor", [](ExperimentSpec& s, std::string_view v) { s.penalty.factor = parse_number(v); }},
      {"experiment", [](ExperimentSpec& s, std::string_view v) { s.experiment = parse_experiment(trim(v)); }},
      {"sweep_values", [](ExperimentSpec& s, std::string_view v) { s.sweep_values = split_list(v); }},
      {"replicates", [](ExperimentSpec& s, std::string_view v) { s.replicates = int(parse_integer(v)); }},
      {"final_window", [](ExperimentSpec& s, std::string_view v) { s.final_window = int(parse_integer(v)); }},
      {"jobs", [](ExperimentSpec& s, std::string_view v) { s.jobs = int(parse_integer(v)); }},
      {"output_dir", [](ExperimentSpec& s, std::string_view v) { s.output_dir = std::string(trim(v)); }},
  };
  return table;
}

}  // namespace

std::string_view experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kConvergence: return "convergence";
    case ExperimentKind::kSweepPower: return "sweep-power";
    case ExperimentKind::kSweepDiscount: return "sweep-discount";
    case ExperimentKind::kSweepHidden: return "sweep-hidden";
    case ExperimentKind::kBaselines: return "baselines";
    case ExperimentKind::kFlops: return "flops";
  }
  return "unknown";
}

ExperimentKind parse_experiment(std::string_view name) {
  for (auto k : {ExperimentKind::kConvergence, ExperimentKind::kSweepPower,
                 ExperimentKind::kSweepDiscount, ExperimentKind::kSweepHidden,
                 ExperimentKind::kBaselines, ExperimentKind::kFlops})
    if (experiment_name(k) == name) return k;
  if (name == "train") return ExperimentKind::kConvergence;
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

double parse_power(std::string_view text) {
  text = trim(text);
  const auto space = text.find_first_of(" \t");
  if (space == std::string_view::npos) {
    // Allow suffixes glued to the number ("16dBm").
    for (std::string_view unit : {"dBm", "dB", "mW"}) {
      if (text.size() > unit.size() && text.ends_with(unit))
        return parse_power(std::string(text.substr(0, text.size() - unit.size())) + " " +
                           std::string(unit));
    }
    return parse_number(text);
  }
  const double value = parse_number(text.substr(0, space));
  const auto unit = trim(text.substr(space));
  if (unit == "dBm" || unit == "dB") return dbm_to_mw(value);
  if (unit == "mW") return value;
  throw std::invalid_argument("unknown power unit '" + std::string(unit) + "'");
}

std::vector<int> parse_hidden_dims(std::string_view text) {
  text = trim(text);
  std::vector<int> dims;
  std::size_t start = 0;
  while (true) {
    const auto x = text.find_first_of("xX", start);
    const auto piece = text.substr(start, x == std::string_view::npos ? text.npos : x - start);
    const auto v = parse_integer(piece);
    if (v <= 0) throw std::invalid_argument("hidden layer widths must be positive");
    dims.push_back(static_cast<int>(v));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  return dims;
}

std::string format_hidden_dims(const std::vector<int>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(dims[i]);
  }
  return out;
}

void ExperimentSpec::validate() const {
  network.validate();
  hyper.validate();
  if (replicates < 1) throw ValidationError("invalid experiment: replicates >= 1");
  if (final_window < 1) throw ValidationError("invalid experiment: final_window >= 1");
  if (jobs < 1) throw ValidationError("invalid experiment: jobs >= 1");
  const bool sweep = experiment == ExperimentKind::kSweepPower ||
                     experiment == ExperimentKind::kSweepDiscount ||
                     experiment == ExperimentKind::kSweepHidden;
  if (sweep && sweep_values.empty())
    throw ValidationError("invalid experiment: sweep_values nonempty for sweep experiments");
}

ExperimentSpec paper_defaults() { return ExperimentSpec{}; }

ExperimentSpec parse_config(std::istream& is) {
  ExperimentSpec spec = paper_defaults();
  std::set<std::string, std::less<>> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
    if (value.empty()) throw ParseError(line_no, "empty value for '" + std::string(key) + "'");
    try {
      it->second(spec, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, std::string(key) + ": " + e.what());
    }
    seen.emplace(key);
  }
  for (const char* key : kRequiredKeys)
    if (!seen.contains(key)) throw ValidationError("missing required key '" + std::string(key) + "'");
  if (!seen.contains("P_max")) spec.network.p_max = default_p_max(spec.network);
  spec.validate();
  return spec;
}

ExperimentSpec load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(is);
}

void write_resolved_config(std::ostream& os, const ExperimentSpec& spec) {
  const auto& n = spec.network;
  const auto& h = spec.hyper;
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# resolved configuration, all powers linear (mW)\n";
  out << "experiment = " << experiment_name(spec.experiment) << '\n';
  out << "M = " << n.num_aps << '\n';
  out << "K = " << n.num_ues << '\n';
  out << "radius = " << n.radius << '\n';
  out << "d_min = " << n.d_min << '\n';
  out << "varsigma0 = " << n.varsigma0 << '\n';
  out << "tau_l = " << n.tau_l << '\n';
  out << "delta_l = " << n.delta_l << '\n';
  out << "p_u = " << n.p_u << " mW\n";
  out << "P_u_max = " << n.p_u_max << " mW\n";
  out << "sigma2 = " << n.sigma2 << " mW\n";
  out << "P_AP = " << n.p_ap << " mW\n";
  out << "P_UE = " << n.p_ue << " mW\n";
  out << "P_s = " << n.p_s << " mW\n";
  out << "P_max = " << n.p_max << " mW\n";
  out << "pilot_mode = "
      << (n.pilot_mode == PilotMode::kOrthonormalReuse ? "orthonormal-reuse" : "random-unit") << '\n';
  out << "mmse_index_mode = "
      << (n.mmse_index_mode == MmseIndexMode::kAsPrinted ? "as-printed" : "per-n") << '\n';
  out << "seed = " << n.seed << '\n';
  out << "zeta = " << h.zeta << '\n';
  out << "lr_u = " << h.lr_actor << '\n';
  out << "lr_Q = " << h.lr_critic << '\n';
  out << "tau = " << h.tau << '\n';
  out << "N = " << h.batch_size << '\n';
  out << "episodes = " << h.episodes << '\n';
  out << "steps_per_episode = " << h.steps_per_episode << '\n';
  out << "noise_sigma0 = " << h.noise_sigma0 << '\n';
  out << "noise_decay = " << h.noise_decay << '\n';
  out << "buffer_capacity = " << h.buffer_capacity << '\n';
  out << "buffer_reset_per_episode = " << (h.buffer_reset_per_episode ? "true" : "false") << '\n';
  out << "update_cadence = " << (h.cadence == UpdateCadence::kPerStep ? "per-step" : "per-episode")
      << '\n';
  out << "hidden_dims = " << format_hidden_dims(h.hidden_dims) << '\n';
  out << "leaky_slope = " << h.leaky_slope << '\n';
  out << "adam_beta1 = " << h.adam_beta1 << '\n';
  out << "adam_beta2 = " << h.adam_beta2 << '\n';
  out << "adam_epsilon = " << h.adam_epsilon << '\n';
  out << "reward_scale = " << h.reward_scale << '\n';
  out << "penalty_enabled = " << (spec.penalty.enabled ? "true" : "false") << '\n';
  out << "penalty_factor = " << spec.penalty.factor << '\n';
  if (!spec.sweep_values.empty()) {
    out << "sweep_values = ";
    for (std::size_t i = 0; i < spec.sweep_values.size(); ++i)
      out << (i ? ", " : "") << spec.sweep_values[i];
    out << '\n';
  }
  out << "replicates = " << spec.replicates << '\n';
  out << "final_window = " << spec.final_window << '\n';
  os << out.str();
}

}  // namespace cellfree
