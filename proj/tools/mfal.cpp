#include "mfal/commands.hpp"

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

int main(int argc, char **argv) {
  CLI::App app{"Multi-fidelity active learning for PDE surrogates"};
  app.require_subcommand(1);

  std::string config_path;
  auto *run = app.add_subcommand("run", "Run an experiment from a TOML config");
  run->add_option("config", config_path, "Config file")->required();

  std::string fn = "branin";
  std::vector<std::size_t> grid{50, 100, 150, 200};
  std::uint64_t seed = 0;
  std::string out_dir;
  mfal::AblationOptions ablation;
  auto *ablate = app.add_subcommand(
      "ablate-delta", "First- vs second-order expansion ratio of a trained BNN");
  ablate->add_option("--fn", fn, "Benchmark function")
      ->check(CLI::IsMember({"branin", "levy"}));
  ablate->add_option("--grid", grid, "Training set sizes")->delimiter(',');
  ablate->add_option("--seed", seed, "Random seed");
  ablate->add_option("--out", out_dir, "Output directory (default ablation/<fn>)");
  ablate->add_option("--epochs", ablation.epochs, "Training epochs");

  std::string plot_dir;
  auto *plot = app.add_subcommand("plotdata", "Write plot.csv for a run directory");
  plot->add_option("dir", plot_dir, "Run directory")->required();

  std::string problem;
  std::size_t n = 500;
  std::string test_out = "testsets";
  auto *gen = app.add_subcommand("gen-test", "Generate a dense-mesh test set");
  gen->add_option("--problem", problem, "Problem name")->required();
  gen->add_option("--n", n, "Number of samples");
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", test_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run)
    return mfal::cmd_run(config_path, std::cerr);
  if (*ablate) {
    if (out_dir.empty())
      out_dir = "ablation/" + fn;
    return mfal::cmd_ablate_delta(fn, grid, seed, out_dir, ablation, std::cerr);
  }
  if (*plot)
    return mfal::cmd_plotdata(plot_dir, std::cerr);
  return mfal::cmd_gen_test(problem, n, seed, test_out, std::cerr);
}
