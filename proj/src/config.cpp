#include "mfal/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace mfal {

namespace {

template <typename T> bool on_grid(const std::vector<T> &grid, T v) {
  return std::any_of(grid.begin(), grid.end(), [&](T g) {
    if constexpr (std::is_floating_point_v<T>)
      return std::abs(g - v) <= 1e-12 * std::abs(g);
    else
      return g == v;
  });
}

} // namespace

void ExperimentConfig::validate() const {
  if (strategies.empty())
    throw ConfigError("strategies: at least one strategy is required");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    const Strategy &s = strategies[i];
    if (s.kind == StrategyKind::FixedFidelity &&
        (s.fidelity < 1 || s.fidelity > problem.num_fidelities()))
      throw ConfigError("strategies[" + std::to_string(i) + "]: fidelity index " +
                        std::to_string(s.fidelity) + " is outside 1.." +
                        std::to_string(problem.num_fidelities()));
  }
  if (num_queries < 1)
    throw ConfigError("num_queries: must be at least 1");
  if (seeds.empty())
    throw ConfigError("seeds: at least one seed is required");
  if (test_size < 1)
    throw ConfigError("test_size: must be at least 1");
  if (jobs < 1)
    throw ConfigError("jobs: must be at least 1");
  if (problem.num_fidelities() < 1 || problem.num_fidelities() > 3)
    throw ConfigError("fidelities: between 1 and 3 levels are supported");
  for (int m = 1; m <= problem.num_fidelities(); ++m) {
    const auto &f = problem.fidelity(m);
    const std::string field = "fidelities[" + std::to_string(m - 1) + "]";
    if (f.mesh_nx < 3 || f.mesh_nt_or_ny < 2)
      throw ConfigError(field + ": mesh too small");
    if (!(f.cost_lambda > 0))
      throw ConfigError(field + ".cost_lambda: must be positive");
  }

  const LoopSettings &s = settings;
  if (s.latent_dim < 1)
    throw ConfigError("surrogate.latent_dim: must be positive");
  if (s.hidden_width < 1)
    throw ConfigError("surrogate.hidden_width: must be positive");
  if (s.hidden_layers < 1)
    throw ConfigError("surrogate.hidden_layers: must be positive");
  if (s.epochs < 0)
    throw ConfigError("surrogate.epochs: must be non-negative");
  if (!(s.learning_rate > 0))
    throw ConfigError("surrogate.learning_rate: must be positive");
  if (!(s.dropout_rate > 0 && s.dropout_rate < 1))
    throw ConfigError("surrogate.dropout_rate: must lie in (0, 1)");
  const auto &a = s.acquisition;
  if (a.num_starts < 1)
    throw ConfigError("acquisition.num_starts: must be positive");
  if (a.top_k < 1)
    throw ConfigError("acquisition.top_k: must be positive");
  if (a.iterations < 0)
    throw ConfigError("acquisition.iterations: must be non-negative");
  if (!(a.initial_step > 0))
    throw ConfigError("acquisition.initial_step: must be positive");
  if (a.dropout_samples < 2)
    throw ConfigError("acquisition.dropout_samples: must be at least 2");
  if (!(a.dropout_shrinkage >= 0))
    throw ConfigError("acquisition.dropout_shrinkage: must be non-negative");

  if (!override_grid) {
    if (!on_grid(grids::latent_dim, s.latent_dim))
      throw ConfigError("surrogate.latent_dim: not in {5, 10, 15, 20} (set override_grid)");
    if (!on_grid(grids::hidden_width, s.hidden_width))
      throw ConfigError(
          "surrogate.hidden_width: not in {8, 16, 32, 64, 128} (set override_grid)");
    if (!on_grid(grids::learning_rate, s.learning_rate))
      throw ConfigError("surrogate.learning_rate: not in {1e-4, 5e-4, 1e-3, 5e-3, "
                        "1e-2} (set override_grid)");
    if (!on_grid(grids::dropout_rate, s.dropout_rate))
      throw ConfigError(
          "surrogate.dropout_rate: not in {0.1, ..., 0.5} (set override_grid)");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["preset"] = preset;
  j["problem"] = problem.name;
  for (const auto &f : problem.fidelities)
    j["fidelities"].push_back({{"mesh_nx", f.mesh_nx},
                               {"mesh_nt_or_ny", f.mesh_nt_or_ny},
                               {"cost_lambda", f.cost_lambda}});
  j["surrogate"] = settings.to_json();
  for (const auto &s : strategies)
    j["strategies"].push_back(s.name());
  j["num_queries"] = num_queries;
  j["seeds"] = seeds;
  j["test_size"] = test_size;
  j["output_dir"] = output_dir.string();
  j["cache_dir"] = cache_dir.string();
  j["override_grid"] = override_grid;
  j["jobs"] = jobs;
  return j;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto &p : problem_names()) {
    out.push_back(p + "-desk");
    out.push_back(p + "-paper");
  }
  return out;
}

ExperimentConfig preset_config(const std::string &name) {
  const auto dash = name.rfind('-');
  if (dash == std::string::npos)
    throw ConfigError("preset: unknown preset '" + name + "'");
  const std::string problem = name.substr(0, dash);
  const std::string scale = name.substr(dash + 1);
  const auto names = problem_names();
  if (std::find(names.begin(), names.end(), problem) == names.end() ||
      (scale != "desk" && scale != "paper"))
    throw ConfigError("preset: unknown preset '" + name + "'");

  ExperimentConfig c;
  c.preset = name;
  c.problem = make_problem(problem);
  for (const char *s : {"dmfal", "mf_bald", "mf_predvar", "dropout_latent",
                        "mf_random"})
    c.strategies.push_back(Strategy::parse(s));
  for (int m = 1; m <= c.problem.num_fidelities(); ++m)
    c.strategies.push_back({StrategyKind::FixedFidelity, m});
  c.output_dir = "runs/" + name;
  if (scale == "desk") {
    c.num_queries = 30;
    c.test_size = 200;
    c.seeds = {0, 1, 2};
    c.settings.epochs = 2000;
  } else {
    c.num_queries = 100;
    c.test_size = 500;
    c.seeds = {0, 1, 2, 3, 4};
    c.settings.epochs = 2000;
  }
  return c;
}

// ---------------------------------------------------------------------------
// TOML
// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const toml::table &t, const std::set<std::string> &known,
                    const std::string &prefix) {
  for (const auto &[k, v] : t) {
    const std::string key(k.str());
    if (!known.count(key))
      throw ConfigError(prefix + key + ": unknown key");
  }
}

template <typename T, typename View>
T required(const View &node, const std::string &field) {
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node.template value<double>())
      return *v;
  } else if (auto v = node.template value_exact<T>()) {
    return *v;
  }
  throw ConfigError(field + ": wrong type");
}

template <typename T>
void read_into(const toml::table &t, const char *key, T &dst, const std::string &prefix) {
  const auto node = t[key];
  if (!node)
    return;
  const std::string field = prefix + key;
  if constexpr (std::is_same_v<T, bool>) {
    dst = required<bool>(node, field);
  } else if constexpr (std::is_same_v<T, double>) {
    dst = required<double>(node, field);
  } else if constexpr (std::is_integral_v<T>) {
    const auto v = required<std::int64_t>(node, field);
    if (v < 0 && std::is_unsigned_v<T>)
      throw ConfigError(field + ": must be non-negative");
    dst = static_cast<T>(v);
  } else {
    dst = T(required<std::string>(node, field));
  }
}

} // namespace

ExperimentConfig parse_config(const std::string &text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error &e) {
    std::ostringstream os;
    os << "TOML parse error at line " << e.source().begin.line << ": "
       << e.description();
    throw ConfigError(os.str());
  }
  reject_unknown(root,
                 {"preset", "problem", "fidelities", "strategies", "num_queries",
                  "seeds", "test_size", "output_dir", "cache_dir", "override_grid",
                  "jobs", "count_initial_cost", "surrogate", "acquisition"},
                 "");

  ExperimentConfig c;
  if (auto p = root["preset"]) {
    c = preset_config(required<std::string>(p, "preset"));
  } else {
    c = preset_config("poisson2-desk");
    c.preset.clear();
  }

  if (auto p = root["problem"]) {
    const auto name = required<std::string>(p, "problem");
    try {
      c.problem = make_problem(name);
    } catch (const ConfigError &) {
      throw ConfigError("problem: unknown problem '" + name + "'");
    }
    if (!root["strategies"]) {
      std::erase_if(c.strategies, [&](const Strategy &s) {
        return s.kind == StrategyKind::FixedFidelity &&
               s.fidelity > c.problem.num_fidelities();
      });
      for (int m = 1; m <= c.problem.num_fidelities(); ++m)
        if (std::find(c.strategies.begin(), c.strategies.end(),
                      Strategy{StrategyKind::FixedFidelity, m}) == c.strategies.end())
          c.strategies.push_back({StrategyKind::FixedFidelity, m});
    }
  }

  if (auto f = root["fidelities"]) {
    const toml::array *arr = f.as_array();
    if (!arr)
      throw ConfigError("fidelities: expected an array of tables");
    std::vector<FidelitySpec> specs;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string prefix = "fidelities[" + std::to_string(i) + "].";
      const toml::table *t = (*arr)[i].as_table();
      if (!t)
        throw ConfigError("fidelities[" + std::to_string(i) + "]: expected a table");
      reject_unknown(*t, {"mesh_nx", "mesh_nt_or_ny", "cost_lambda"}, prefix);
      FidelitySpec spec = i < c.problem.fidelities.size() ? c.problem.fidelities[i]
                                                          : FidelitySpec{};
      read_into(*t, "mesh_nx", spec.mesh_nx, prefix);
      read_into(*t, "mesh_nt_or_ny", spec.mesh_nt_or_ny, prefix);
      read_into(*t, "cost_lambda", spec.cost_lambda, prefix);
      specs.push_back(spec);
    }
    c.problem.fidelities = std::move(specs);
  }

  if (auto s = root["strategies"]) {
    const toml::array *arr = s.as_array();
    if (!arr)
      throw ConfigError("strategies: expected an array of strings");
    c.strategies.clear();
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string field = "strategies[" + std::to_string(i) + "]";
      const auto name = (*arr)[i].value<std::string>();
      if (!name)
        throw ConfigError(field + ": expected a string");
      try {
        c.strategies.push_back(Strategy::parse(*name));
      } catch (const ConfigError &) {
        throw ConfigError(field + ": unknown strategy '" + *name + "'");
      }
    }
  }

  if (auto s = root["seeds"]) {
    const toml::array *arr = s.as_array();
    if (!arr)
      throw ConfigError("seeds: expected an array of integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto v = (*arr)[i].value<std::int64_t>();
      if (!v || *v < 0)
        throw ConfigError("seeds[" + std::to_string(i) +
                          "]: expected a non-negative integer");
      c.seeds.push_back(static_cast<std::uint64_t>(*v));
    }
  }

  read_into(root, "num_queries", c.num_queries, "");
  read_into(root, "test_size", c.test_size, "");
  read_into(root, "output_dir", c.output_dir, "");
  read_into(root, "cache_dir", c.cache_dir, "");
  read_into(root, "override_grid", c.override_grid, "");
  read_into(root, "jobs", c.jobs, "");
  read_into(root, "count_initial_cost", c.settings.count_initial_cost, "");

  if (auto s = root["surrogate"]) {
    const toml::table *t = s.as_table();
    if (!t)
      throw ConfigError("surrogate: expected a table");
    reject_unknown(*t,
                   {"latent_dim", "hidden_width", "hidden_layers", "epochs",
                    "learning_rate", "dropout_rate", "warm_start"},
                   "surrogate.");
    read_into(*t, "latent_dim", c.settings.latent_dim, "surrogate.");
    read_into(*t, "hidden_width", c.settings.hidden_width, "surrogate.");
    read_into(*t, "hidden_layers", c.settings.hidden_layers, "surrogate.");
    read_into(*t, "epochs", c.settings.epochs, "surrogate.");
    read_into(*t, "learning_rate", c.settings.learning_rate, "surrogate.");
    read_into(*t, "dropout_rate", c.settings.dropout_rate, "surrogate.");
    read_into(*t, "warm_start", c.settings.warm_start, "surrogate.");
  }

  if (auto s = root["acquisition"]) {
    const toml::table *t = s.as_table();
    if (!t)
      throw ConfigError("acquisition: expected a table");
    reject_unknown(*t,
                   {"num_starts", "top_k", "iterations", "initial_step",
                    "dropout_samples", "dropout_shrinkage", "top_fidelity_mode"},
                   "acquisition.");
    auto &a = c.settings.acquisition;
    read_into(*t, "num_starts", a.num_starts, "acquisition.");
    read_into(*t, "top_k", a.top_k, "acquisition.");
    read_into(*t, "iterations", a.iterations, "acquisition.");
    read_into(*t, "initial_step", a.initial_step, "acquisition.");
    read_into(*t, "dropout_samples", a.dropout_samples, "acquisition.");
    read_into(*t, "dropout_shrinkage", a.dropout_shrinkage, "acquisition.");
    std::string mode;
    read_into(*t, "top_fidelity_mode", mode, "acquisition.");
    if (mode == "two_views")
      a.top_mode = TopFidelityMode::TwoViews;
    else if (mode == "output_information")
      a.top_mode = TopFidelityMode::OutputInformation;
    else if (!mode.empty())
      throw ConfigError("acquisition.top_fidelity_mode: expected two_views or "
                        "output_information");
  }

  if (c.cache_dir.empty())
    c.cache_dir = c.output_dir / "cache";
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

} // namespace mfal
