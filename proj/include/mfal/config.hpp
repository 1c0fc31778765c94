#ifndef MFAL_CONFIG_HPP
#define MFAL_CONFIG_HPP

#include "mfal/acquisition.hpp"
#include "mfal/loop.hpp"
#include "mfal/pde.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfal {

struct ExperimentConfig {
  std::string preset;
  PdeProblem problem = make_problem("poisson2");
  LoopSettings settings;
  std::vector<Strategy> strategies;
  int num_queries = 30;
  std::vector<std::uint64_t> seeds;
  std::size_t test_size = 200;
  std::filesystem::path output_dir = "runs";
  /// Defaults to <output_dir>/cache.
  std::filesystem::path cache_dir;
  /// Permit hyperparameters outside the search grids.
  bool override_grid = false;
  /// Concurrent (strategy, seed) runs.
  int jobs = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

namespace grids {
inline const std::vector<Index> latent_dim{5, 10, 15, 20};
inline const std::vector<Index> hidden_width{8, 16, 32, 64, 128};
inline const std::vector<double> learning_rate{1e-4, 5e-4, 1e-3, 5e-3, 1e-2};
inline const std::vector<double> dropout_rate{0.1, 0.2, 0.3, 0.4, 0.5};
} // namespace grids

/// Named presets: <problem>-desk and <problem>-paper for every built-in problem.
ExperimentConfig preset_config(const std::string &name);
std::vector<std::string> preset_names();

/// Parse TOML text. A top-level `preset` key selects the base configuration;
/// other keys override it. Relative paths are left relative to the working
/// directory.
ExperimentConfig parse_config(const std::string &toml_text);
ExperimentConfig load_config(const std::filesystem::path &path);

} // namespace mfal

#endif
