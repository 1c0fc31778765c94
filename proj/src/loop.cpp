#include "mfal/loop.hpp"
#include "mfal/parallel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mfal {

double average_cost(const CostLedger &ledger, std::size_t n_solutions) {
  if (n_solutions < 1)
    throw ConfigError("average_cost needs at least one solution");
  if (ledger.active_learning_cost < 0 || ledger.prediction_cost_per_solution < 0)
    throw ConfigError("costs must be non-negative");
  const double n = double(n_solutions);
  return (ledger.active_learning_cost + n * ledger.prediction_cost_per_solution) / n;
}

double nrmse(const std::vector<VectorXd> &predictions,
             const std::vector<VectorXd> &truth) {
  if (truth.empty())
    throw ShapeMismatch("nrmse needs a nonempty test set");
  if (predictions.size() != truth.size())
    throw ShapeMismatch("nrmse: prediction and truth counts differ");
  double sq = 0.0, total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predictions[i].size() != truth[i].size())
      throw ShapeMismatch("nrmse: prediction and truth lengths differ");
    sq += (predictions[i] - truth[i]).squaredNorm();
    total += truth[i].sum();
    count += static_cast<std::size_t>(truth[i].size());
  }
  const double mean = total / double(count);
  if (std::abs(mean) < 1e-12)
    throw ZeroNormalizer("mean of test outputs is zero");
  return std::sqrt(sq / double(count)) / mean;
}

double evaluate_nrmse(const SurrogateModel &model, const TestSet &test) {
  model.require_fitted("evaluate_nrmse");
  return nrmse(predict_mean(model, test.inputs, model.num_fidelities()),
               test.outputs);
}

std::vector<int> initial_design_counts(int num_fidelities) {
  switch (num_fidelities) {
  case 1:
    return {10};
  case 2:
    return {10, 2};
  case 3:
    return {10, 5, 2};
  default:
    throw ConfigError("no initial design defined for " +
                      std::to_string(num_fidelities) + " fidelities");
  }
}

MultiFidelityDataset initialize_design(const PdeProblem &problem,
                                       std::mt19937_64 &rng) {
  const auto counts = initial_design_counts(problem.num_fidelities());
  std::vector<std::pair<VectorXd, int>> plan;
  for (int m = 1; m <= problem.num_fidelities(); ++m)
    for (int i = 0; i < counts[m - 1]; ++i)
      plan.emplace_back(sample_input(problem, rng), m);
  std::vector<FieldSample> solved(plan.size());
  parallel_for(plan.size(), [&](std::size_t i) {
    solved[i] = query_oracle(problem, plan[i].first, plan[i].second);
  });
  MultiFidelityDataset data(problem.num_fidelities());
  for (auto &s : solved)
    data.add(std::move(s));
  return data;
}

nlohmann::json LoopSettings::to_json() const {
  nlohmann::json j;
  j["latent_dim"] = latent_dim;
  j["hidden_width"] = hidden_width;
  j["hidden_layers"] = hidden_layers;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["dropout_rate"] = dropout_rate;
  j["count_initial_cost"] = count_initial_cost;
  j["warm_start"] = warm_start;
  j["acquisition"] = {
      {"num_starts", acquisition.num_starts},
      {"top_k", acquisition.top_k},
      {"iterations", acquisition.iterations},
      {"initial_step", acquisition.initial_step},
      {"dropout_samples", acquisition.dropout_samples},
      {"dropout_shrinkage", acquisition.dropout_shrinkage},
      {"top_fidelity_mode", acquisition.top_mode == TopFidelityMode::TwoViews
                                ? "two_views"
                                : "output_information"},
  };
  return j;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index) {
  // splitmix64 over a mix of the three words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1) +
                    0xbf58476d1ce4e5b9ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

enum Stream : std::uint64_t {
  kDesign = 1,
  kInit = 2,
  kFit = 3,
  kAcquire = 4,
  kDropoutScore = 5,
  kTest = 6,
};

} // namespace

RunHistory run_active_learning(const PdeProblem &problem, const Strategy &strategy,
                               int num_queries, std::uint64_t seed,
                               const LoopSettings &settings, const TestSet &test,
                               const RecordCallback &on_record) {
  if (num_queries < 1)
    throw ConfigError("num_queries must be at least 1");
  if (strategy.kind == StrategyKind::FixedFidelity &&
      (strategy.fidelity < 1 || strategy.fidelity > problem.num_fidelities()))
    throw UnknownFidelity("fixed_fidelity(" + std::to_string(strategy.fidelity) +
                          ") on " + problem.name);

  RunHistory history;
  history.problem = problem.name;
  history.strategy = strategy.name();
  history.seed = seed;
  history.config_snapshot = settings.to_json();

  std::mt19937_64 design_rng(derive_seed(seed, kDesign));
  MultiFidelityDataset data = initialize_design(problem, design_rng);
  if (settings.count_initial_cost)
    for (const auto &level : data.by_fidelity)
      for (const auto &s : level)
        history.initial_cost += s.cost;

  std::vector<double> costs;
  for (const auto &f : problem.fidelities)
    costs.push_back(f.cost_lambda);

  const SurrogateSpec spec = SurrogateSpec::for_problem(
      problem, settings.latent_dim, settings.hidden_width, settings.hidden_layers);
  const SurrogateModel initial =
      SurrogateModel::initialize(spec, problem.input_box, derive_seed(seed, kInit));

  FitOptions fit_opts;
  fit_opts.epochs = settings.epochs;
  fit_opts.learning_rate = settings.learning_rate;
  fit_opts.dropout_rate = settings.dropout_rate;
  fit_opts.mode = strategy.kind == StrategyKind::DropoutLatent
                      ? TrainingMode::Dropout
                      : TrainingMode::Variational;

  AcquisitionConfig acq = settings.acquisition;
  acq.dropout_rate = settings.dropout_rate;

  fit_opts.seed = derive_seed(seed, kFit, 0);
  SurrogateModel model = fit(initial, data, fit_opts);
  history.initial_nrmse = evaluate_nrmse(model, test);

  double cum_cost = history.initial_cost;
  for (int step = 1; step <= num_queries; ++step) {
    const std::uint64_t s = static_cast<std::uint64_t>(step);
    const ScoringContext ctx(model, costs, acq, derive_seed(seed, kDropoutScore, s));
    std::mt19937_64 acq_rng(derive_seed(seed, kAcquire, s));
    const QueryDecision q = optimize_query(ctx, strategy, acq_rng);

    FieldSample sample;
    try {
      sample = query_oracle(problem, q.input, q.fidelity);
    } catch (const Error &e) {
      history.aborted = "step " + std::to_string(step) + ": " + e.what();
      return history;
    }
    cum_cost += sample.cost;
    data.add(sample);

    fit_opts.seed = derive_seed(seed, kFit, s);
    model = fit(settings.warm_start ? std::move(model) : initial, data, fit_opts);

    QueryRecord rec;
    rec.step = step;
    rec.input = q.input;
    rec.fidelity = q.fidelity;
    rec.cost = sample.cost;
    rec.cum_cost = cum_cost;
    rec.nrmse = evaluate_nrmse(model, test);
    history.records.push_back(rec);
    if (on_record)
      on_record(rec);
  }
  return history;
}

void write_history_csv(const std::filesystem::path &path, const RunHistory &history,
                       Index input_dim) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << "step,fidelity,cost,cum_cost,nrmse";
  for (Index i = 0; i < input_dim; ++i)
    out << ",x_" << i;
  out << '\n' << std::setprecision(17);
  for (const auto &r : history.records) {
    out << r.step << ',' << r.fidelity << ',' << r.cost << ',' << r.cum_cost << ','
        << r.nrmse;
    for (Index i = 0; i < input_dim; ++i)
      out << ',' << r.input[i];
    out << '\n';
  }
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw MissingArtifacts("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,fidelity,cost,cum_cost,nrmse", 0) != 0)
    throw IoError(path.string() + ": not a history file");
  std::vector<HistoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::stringstream ss(line);
    std::string cell;
    HistoryRow r{};
    try {
      std::getline(ss, cell, ',');
      r.step = std::stoi(cell);
      std::getline(ss, cell, ',');
      r.fidelity = std::stoi(cell);
      std::getline(ss, cell, ',');
      r.cost = std::stod(cell);
      std::getline(ss, cell, ',');
      r.cum_cost = std::stod(cell);
      std::getline(ss, cell, ',');
      r.nrmse = std::stod(cell);
    } catch (const std::exception &) {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_manifest(const std::filesystem::path &path, const RunHistory &history,
                    const std::string &started, const std::string &finished) {
  nlohmann::json j;
  j["problem"] = history.problem;
  j["strategy"] = history.strategy;
  j["seed"] = history.seed;
  j["config"] = history.config_snapshot;
  j["initial_nrmse"] = history.initial_nrmse;
  j["initial_cost"] = history.initial_cost;
  j["num_records"] = history.records.size();
  j["started"] = started;
  j["finished"] = finished;
  if (history.aborted)
    j["aborted"] = *history.aborted;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

TestSet cached_test_set(const PdeProblem &problem, std::size_t n,
                        std::uint64_t seed,
                        const std::filesystem::path &cache_dir) {
  const std::uint64_t test_seed = derive_seed(seed, kTest);
  if (cache_dir.empty())
    return generate_test_set(problem, n, test_seed);
  const std::string stem =
      problem.name + "_test_n" + std::to_string(n) + "_seed" + std::to_string(seed);
  const auto csv = cache_dir / (stem + ".csv");
  if (std::filesystem::exists(csv)) {
    SampleTable t = read_samples_csv(csv);
    const Index d = problem.fidelities.back().output_dim();
    bool ok = t.inputs.size() == n;
    for (const auto &y : t.outputs)
      ok = ok && y.size() == d;
    if (ok)
      return {std::move(t.inputs), std::move(t.outputs)};
  }
  TestSet test = generate_test_set(problem, n, test_seed);
  std::filesystem::create_directories(cache_dir);
  write_samples_csv(csv, problem.input_dim(), test.inputs, test.outputs);
  write_dataset_sidecar(cache_dir / (stem + ".json"), problem, test_seed, "test");
  return test;
}

} // namespace mfal
