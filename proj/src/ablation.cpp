#include "mfal/ablation.hpp"
#include "mfal/loop.hpp"
#include "mfal/surrogate.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace mfal {

double branin(const VectorXd &x) {
  using std::numbers::pi;
  const double x1 = x[0], x2 = x[1];
  const double q = -1.275 * x1 * x1 / (pi * pi) + 5 * x1 / pi + x2 - 6;
  return -q * q - (10 - 5 / (4 * pi)) * std::cos(x1) - 10;
}

double levy(const VectorXd &x) {
  using std::numbers::pi;
  const double x1 = x[0], x2 = x[1];
  auto sin2 = [](double t) { return std::sin(t) * std::sin(t); };
  return -sin2(3 * pi * x1) - (x1 - 1) * (x1 - 1) * (1 + sin2(3 * pi * x2)) -
         (x2 - 1) * (x2 - 1) * (1 + sin2(2 * pi * x2));
}

BenchmarkFunction benchmark_function(const std::string &name) {
  if (name == "branin")
    return {name, &branin, {Interval{-5, 10}, Interval{0, 15}}};
  if (name == "levy")
    return {name, &levy, {Interval{-10, 10}, Interval{-10, 10}}};
  throw ConfigError("unknown benchmark function '" + name + "'");
}

MlpPosterior train_scalar_bnn(const BenchmarkFunction &f, std::size_t n_train,
                              std::uint64_t seed, const AblationOptions &opts) {
  if (n_train < 1)
    throw ConfigError("n_train must be at least 1");
  SurrogateSpec spec;
  spec.num_fidelities = 1;
  spec.input_dim = static_cast<Index>(f.box.size());
  spec.latent_dim = 1;
  spec.hidden_widths = {opts.hidden};
  spec.output_dims = {1};

  std::mt19937_64 rng(derive_seed(seed, 11));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MultiFidelityDataset data(1);
  for (std::size_t i = 0; i < n_train; ++i) {
    VectorXd x(spec.input_dim);
    for (Index d = 0; d < x.size(); ++d)
      x[d] = f.box[d].lo + unif(rng) * (f.box[d].hi - f.box[d].lo);
    data.add({x, 1, VectorXd::Constant(1, f.fn(x)), 0.0});
  }

  SurrogateModel model = SurrogateModel::initialize(spec, f.box, derive_seed(seed, 12));
  FitOptions fo;
  fo.epochs = opts.epochs;
  fo.learning_rate = opts.learning_rate;
  fo.seed = derive_seed(seed, 13);
  model = fit(std::move(model), data, fo);

  MlpPosterior net{model.shapes[0], model.posterior.mean, model.posterior.log_std};
  const double c = model.standardizers[0].scale * model.projections[0](0, 0);
  const Index L = net.shape.num_layers();
  const Index start = net.shape.layer_offset(L - 1);
  const Index n = net.mean.size() - start;
  net.mean.segment(start, n) *= c;
  net.mean[net.mean.size() - 1] += model.standardizers[0].mean;
  net.log_std.segment(start, n).array() += std::log(std::abs(c));
  return net;
}

RatioSummary delta_ratio_study(const BenchmarkFunction &f, std::size_t n_train,
                               std::uint64_t seed, const AblationOptions &opts) {
  const MlpPosterior net = train_scalar_bnn(f, n_train, seed, opts);
  std::mt19937_64 rng(derive_seed(seed, 14));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < opts.num_inputs; ++i) {
    VectorXd u(static_cast<Index>(f.box.size()));
    for (Index d = 0; d < u.size(); ++d)
      u[d] = unif(rng);
    const auto r = taylor_ratio_samples(net, u, opts.weight_samples, rng);
    ratios.insert(ratios.end(), r.begin(), r.end());
  }
  return summarize(ratios);
}

} // namespace mfal
