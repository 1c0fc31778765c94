#include "mfal/commands.hpp"
#include "mfal/loop.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace mfal {

std::vector<CurvePoint> aggregate_curves(const std::vector<CostSeries> &runs) {
  std::set<double> costs;
  for (const auto &r : runs)
    for (const auto &[c, v] : r)
      costs.insert(c);
  std::vector<CurvePoint> out;
  std::vector<std::size_t> cursor(runs.size(), 0);
  for (double c : costs) {
    CurvePoint p;
    p.cum_cost = c;
    std::vector<double> vals;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto &r = runs[i];
      while (cursor[i] < r.size() && r[cursor[i]].first <= c)
        ++cursor[i];
      if (cursor[i] > 0)
        vals.push_back(r[cursor[i] - 1].second);
    }
    if (vals.empty())
      continue;
    p.runs = vals.size();
    for (double v : vals)
      p.mean += v;
    p.mean /= double(vals.size());
    for (double v : vals)
      p.std += (v - p.mean) * (v - p.mean);
    p.std = std::sqrt(p.std / double(vals.size()));
    out.push_back(p);
  }
  return out;
}

std::string strategy_dir_name(const Strategy &s) {
  if (s.kind == StrategyKind::FixedFidelity)
    return "fixed_fidelity_" + std::to_string(s.fidelity);
  return s.name();
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_json(const std::filesystem::path &path, const nlohmann::json &j) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

template <typename F> int guarded(std::ostream &log, F &&body) {
  try {
    return body();
  } catch (const ConfigError &e) {
    log << "error: " << e.what() << '\n';
    return 2;
  } catch (const MissingArtifacts &e) {
    log << "error: " << e.what() << '\n';
    return 2;
  } catch (const UnknownFidelity &e) {
    log << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

} // namespace

void write_curves_csv(const std::filesystem::path &path,
                      const std::map<std::string, std::vector<CostSeries>> &runs,
                      bool with_run_count) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << "strategy,cum_cost,nrmse_mean,nrmse_std" << (with_run_count ? ",runs" : "")
      << '\n'
      << std::setprecision(17);
  for (const auto &[name, series] : runs)
    for (const auto &p : aggregate_curves(series)) {
      out << name << ',' << p.cum_cost << ',' << p.mean << ',' << p.std;
      if (with_run_count)
        out << ',' << p.runs;
      out << '\n';
    }
}

std::map<std::string, std::vector<CostSeries>>
collect_runs(const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw MissingArtifacts(dir.string() + " is not a directory");
  std::vector<fs::path> manifests;
  for (const auto &e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "manifest.json")
      manifests.push_back(e.path());
  std::sort(manifests.begin(), manifests.end());

  std::map<std::string, std::vector<CostSeries>> runs;
  for (const auto &m : manifests) {
    const auto history = m.parent_path() / "history.csv";
    if (!fs::exists(history))
      throw MissingArtifacts(history.string() + " is missing");
    std::ifstream in(m, std::ios::binary);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception &e) {
      throw IoError(m.string() + ": " + e.what());
    }
    CostSeries s;
    s.emplace_back(j.value("initial_cost", 0.0), j.at("initial_nrmse").get<double>());
    for (const auto &r : read_history_csv(history))
      s.emplace_back(r.cum_cost, r.nrmse);
    runs[j.at("strategy").get<std::string>()].push_back(std::move(s));
  }
  if (runs.empty())
    throw MissingArtifacts("no runs (manifest.json + history.csv) under " + dir.string());
  return runs;
}

int cmd_run(const std::filesystem::path &config_path, std::ostream &log) {
  return guarded(log, [&] { return cmd_run(load_config(config_path), log); });
}

int cmd_run(const ExperimentConfig &config, std::ostream &log) {
  return guarded(log, [&] {
    config.validate();
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    write_json(config.output_dir / "config.json", config.to_json());

    std::map<std::uint64_t, TestSet> tests;
    for (auto seed : config.seeds) {
      log << "test set for seed " << seed << " (" << config.test_size
          << " samples)\n";
      tests[seed] = cached_test_set(config.problem, config.test_size, seed,
                                    config.cache_dir);
    }

    struct Job {
      Strategy strategy;
      std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto &s : config.strategies)
      for (auto seed : config.seeds)
        jobs.push_back({s, seed});

    std::mutex log_mu;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        const Job &job = jobs[i];
        const std::string tag =
            "[" + job.strategy.name() + " seed " + std::to_string(job.seed) + "]";
        const fs::path dir = config.output_dir / strategy_dir_name(job.strategy) /
                             ("seed_" + std::to_string(job.seed));
        const std::string started = utc_now();
        try {
          RunHistory h = run_active_learning(
              config.problem, job.strategy, config.num_queries, job.seed,
              config.settings, tests.at(job.seed), [&](const QueryRecord &r) {
                std::lock_guard lock(log_mu);
                log << tag << " step " << r.step << "/" << config.num_queries
                    << " m=" << r.fidelity << " cum_cost=" << r.cum_cost
                    << " nrmse=" << r.nrmse << '\n';
              });
          h.config_snapshot = config.to_json();
          write_history_csv(dir / "history.csv", h, config.problem.input_dim());
          write_manifest(dir / "manifest.json", h, started, utc_now());
          if (h.aborted) {
            std::lock_guard lock(log_mu);
            log << tag << " aborted: " << *h.aborted << '\n';
            failed = true;
          }
        } catch (const std::exception &e) {
          std::lock_guard lock(log_mu);
          log << tag << " failed: " << e.what() << '\n';
          failed = true;
        }
      }
    };
    const int n_workers = std::min<int>(config.jobs, static_cast<int>(jobs.size()));
    if (n_workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < n_workers; ++w)
        pool.emplace_back(worker);
    }

    write_curves_csv(config.output_dir / "curves.csv", collect_runs(config.output_dir),
                     true);
    log << "wrote " << (config.output_dir / "curves.csv").string() << '\n';
    return failed ? 1 : 0;
  });
}

int cmd_ablate_delta(const std::string &function, const std::vector<std::size_t> &grid,
                     std::uint64_t seed, const std::filesystem::path &out_dir,
                     const AblationOptions &options, std::ostream &log) {
  return guarded(log, [&] {
    const BenchmarkFunction f = benchmark_function(function);
    if (grid.empty())
      throw ConfigError("grid: at least one training size is required");
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / "ratio.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw IoError("cannot write " + path.string());
    out << "n_train,mean,std\n" << std::setprecision(17);
    for (std::size_t n : grid) {
      const RatioSummary r = delta_ratio_study(f, n, seed, options);
      out << n << ',' << r.mean << ',' << r.std << '\n';
      log << function << " N=" << n << " ratio mean=" << r.mean << " std=" << r.std
          << '\n';
    }
    return 0;
  });
}

int cmd_plotdata(const std::filesystem::path &dir, std::ostream &log) {
  return guarded(log, [&] {
    const auto runs = collect_runs(dir);
    write_curves_csv(dir / "plot.csv", runs, false);
    log << "wrote " << (dir / "plot.csv").string() << '\n';
    return 0;
  });
}

int cmd_gen_test(const std::string &problem, std::size_t n, std::uint64_t seed,
                 const std::filesystem::path &out_dir, std::ostream &log) {
  return guarded(log, [&] {
    if (n < 1)
      throw ConfigError("n: must be at least 1");
    const PdeProblem p = make_problem(problem);
    const TestSet t = cached_test_set(p, n, seed, out_dir);
    log << "test set with " << t.size() << " samples in " << out_dir.string() << '\n';
    return 0;
  });
}

} // namespace mfal
