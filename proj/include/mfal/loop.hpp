#ifndef MFAL_LOOP_HPP
#define MFAL_LOOP_HPP

#include "mfal/acquisition.hpp"
#include "mfal/pde.hpp"
#include "mfal/surrogate.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfal {

struct CostLedger {
  double active_learning_cost = 0.0;
  double prediction_cost_per_solution = 0.0;
};

/// (AL cost + n * prediction cost) / n.
double average_cost(const CostLedger &ledger, std::size_t n_solutions);

/// RMSE over every coordinate divided by the mean of all truth values.
double nrmse(const std::vector<VectorXd> &predictions,
             const std::vector<VectorXd> &truth);

/// nRMSE of the top-fidelity predictive mean on the test set.
double evaluate_nrmse(const SurrogateModel &model, const TestSet &test);

/// Uniform initial design: 10/2 examples for two fidelities, 10/5/2 for three.
MultiFidelityDataset initialize_design(const PdeProblem &problem,
                                       std::mt19937_64 &rng);

/// Per-fidelity example counts used by initialize_design.
std::vector<int> initial_design_counts(int num_fidelities);

struct LoopSettings {
  Index latent_dim = 10;
  Index hidden_width = 32;
  int hidden_layers = 2;
  int epochs = 2000;
  double learning_rate = 1e-3;
  double dropout_rate = 0.2;
  bool count_initial_cost = false;
  /// Resume each refit from the previous parameters. When false, every refit
  /// starts from the run's initial parameters.
  bool warm_start = true;
  AcquisitionConfig acquisition;

  nlohmann::json to_json() const;
};

struct QueryRecord {
  int step = 0;
  VectorXd input;
  int fidelity = 1;
  double cost = 0.0;
  double cum_cost = 0.0;
  double nrmse = 0.0;
};

struct RunHistory {
  std::string problem;
  std::string strategy;
  std::uint64_t seed = 0;
  /// nRMSE of the model fitted to the initial design, before any query.
  double initial_nrmse = 0.0;
  /// Cumulative cost before the first query (nonzero only when the initial
  /// design is counted).
  double initial_cost = 0.0;
  std::vector<QueryRecord> records;
  nlohmann::json config_snapshot;
  /// Set when a query failed and the run stopped early.
  std::optional<std::string> aborted;
};

using RecordCallback = std::function<void(const QueryRecord &)>;

/// Fit, evaluate, acquire, query, append; repeated num_queries times.
/// Deterministic in the seed. A failing oracle query stops the loop and
/// returns the partial history with `aborted` set.
RunHistory run_active_learning(const PdeProblem &problem, const Strategy &strategy,
                               int num_queries, std::uint64_t seed,
                               const LoopSettings &settings, const TestSet &test,
                               const RecordCallback &on_record = {});

/// Seed for an independent stream derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index = 0);

void write_history_csv(const std::filesystem::path &path, const RunHistory &history,
                       Index input_dim);

struct HistoryRow {
  int step;
  int fidelity;
  double cost;
  double cum_cost;
  double nrmse;
};

std::vector<HistoryRow> read_history_csv(const std::filesystem::path &path);

void write_manifest(const std::filesystem::path &path, const RunHistory &history,
                    const std::string &started, const std::string &finished);

/// Test set for a run seed (sampled from a stream derived from it), read from
/// `cache_dir` when present and written there otherwise. An empty cache_dir
/// disables caching.
TestSet cached_test_set(const PdeProblem &problem, std::size_t n,
                        std::uint64_t seed,
                        const std::filesystem::path &cache_dir);

} // namespace mfal

#endif
