#ifndef MFAL_ABLATION_HPP
#define MFAL_ABLATION_HPP

#include "mfal/belief.hpp"
#include "mfal/pde.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mfal {

/// Negated, shifted Branin variant on [-5, 10] x [0, 15].
double branin(const VectorXd &x);

/// Levy-like function on [-10, 10]^2 with its bracket closed after the last
/// sin^2 term.
double levy(const VectorXd &x);

struct BenchmarkFunction {
  std::string name;
  double (*fn)(const VectorXd &);
  std::vector<Interval> box;
};

/// "branin" or "levy".
BenchmarkFunction benchmark_function(const std::string &name);

struct AblationOptions {
  std::vector<Index> hidden{40, 40, 40};
  int epochs = 2000;
  double learning_rate = 1e-3;
  std::size_t num_inputs = 100;
  std::size_t weight_samples = 10;
};

/// Mean-field BNN fitted to n_train uniform samples of f. The returned network
/// maps unit-box inputs to f's scale: the output projection and standardizer
/// are folded into the last layer, posterior std included.
MlpPosterior train_scalar_bnn(const BenchmarkFunction &f, std::size_t n_train,
                              std::uint64_t seed, const AblationOptions &opts = {});

/// Taylor ratio statistics over opts.num_inputs uniform inputs with
/// opts.weight_samples draws each.
RatioSummary delta_ratio_study(const BenchmarkFunction &f, std::size_t n_train,
                               std::uint64_t seed, const AblationOptions &opts = {});

} // namespace mfal

#endif
