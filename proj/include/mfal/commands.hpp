#ifndef MFAL_COMMANDS_HPP
#define MFAL_COMMANDS_HPP

#include "mfal/ablation.hpp"
#include "mfal/config.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mfal {

/// (cumulative cost, nRMSE) observations of one run, cost non-decreasing.
using CostSeries = std::vector<std::pair<double, double>>;

struct CurvePoint {
  double cum_cost = 0.0;
  double mean = 0.0;
  /// Population standard deviation across runs.
  double std = 0.0;
  std::size_t runs = 0;
};

/// Last-observation-carried-forward alignment on the union of cost points.
/// A run contributes at cost c once it has an observation at or below c.
std::vector<CurvePoint> aggregate_curves(const std::vector<CostSeries> &runs);

/// Directory name for a strategy, e.g. fixed_fidelity(2) -> fixed_fidelity_2.
std::string strategy_dir_name(const Strategy &s);

/// Exit status: 0 success, 1 solver or runtime failure, 2 invalid input.
int cmd_run(const std::filesystem::path &config_path, std::ostream &log);
int cmd_run(const ExperimentConfig &config, std::ostream &log);

int cmd_ablate_delta(const std::string &function, const std::vector<std::size_t> &grid,
                     std::uint64_t seed, const std::filesystem::path &out_dir,
                     const AblationOptions &options, std::ostream &log);

int cmd_plotdata(const std::filesystem::path &dir, std::ostream &log);

int cmd_gen_test(const std::string &problem, std::size_t n, std::uint64_t seed,
                 const std::filesystem::path &out_dir, std::ostream &log);

/// Runs below `dir`, grouped by strategy name, each as its cost series
/// (initial point from manifest.json followed by history.csv rows).
std::map<std::string, std::vector<CostSeries>>
collect_runs(const std::filesystem::path &dir);

void write_curves_csv(const std::filesystem::path &path,
                      const std::map<std::string, std::vector<CostSeries>> &runs,
                      bool with_run_count);

} // namespace mfal

#endif
