#ifndef MFAL_SURROGATE_HPP
#define MFAL_SURROGATE_HPP

#include "mfal/numkit.hpp"
#include "mfal/pde.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace mfal {

/// Architecture of the multi-fidelity surrogate. Net m maps [x; h_{m-1}] to the
/// latent h_m (net 1 maps x alone); A_m lifts h_m to the d_m-dimensional field.
struct SurrogateSpec {
  int num_fidelities = 1;
  Index input_dim = 1;
  Index latent_dim = 10;
  std::vector<std::vector<Index>> hidden_widths;
  std::vector<Index> output_dims;
  Activation activation = Activation::Tanh;

  /// Two hidden layers of `width` per fidelity, output dims from the problem.
  static SurrogateSpec for_problem(const PdeProblem &problem, Index latent_dim,
                                   Index width, int hidden_layers = 2);

  std::vector<MlpShape> net_shapes() const;
  void validate() const;
};

/// Scalar affine standardization of one fidelity's outputs.
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  static Standardizer fit(const std::vector<FieldSample> &samples);
  VectorXd apply(const VectorXd &y) const { return (y.array() - mean) / scale; }
  VectorXd invert(const VectorXd &z) const { return (z.array() * scale + mean).matrix(); }
};

/// Mean-field Gaussian over all network weights.
struct VariationalPosterior {
  VectorXd mean;
  VectorXd log_std;

  VectorXd variance() const { return (2.0 * log_std.array()).exp().matrix(); }
};

struct SurrogateModel {
  SurrogateSpec spec;
  std::vector<MlpShape> shapes;
  /// Start of net m's parameters in the flat weight vector; size M + 1.
  std::vector<Index> offsets;
  VariationalPosterior posterior;
  std::vector<MatrixXd> projections;
  VectorXd noise_log_var;
  std::vector<Interval> input_box;
  std::vector<Standardizer> standardizers;
  bool fitted = false;

  /// Fresh model: weights ~ N(0, 1/fan_in), zero biases, log_std = -3,
  /// projection entries ~ N(0, 0.1), noise variance 0.01.
  static SurrogateModel initialize(const SurrogateSpec &spec,
                                   std::vector<Interval> input_box,
                                   std::uint64_t seed);

  int num_fidelities() const { return spec.num_fidelities; }
  Index latent_dim() const { return spec.latent_dim; }
  Index param_count() const { return offsets.back(); }
  Index output_dim(int m) const { return spec.output_dims.at(m - 1); }
  double noise_var(int m) const { return std::exp(noise_log_var[m - 1]); }
  VectorXd to_unit(const VectorXd &x) const;
  void require_fitted(const char *what) const;
};

// ---------------------------------------------------------------------------
// Forward maps
// ---------------------------------------------------------------------------

/// h_1..h_M at the given flat weights for a unit-box input.
std::vector<VectorXd> forward_latents(const SurrogateModel &model,
                                      const Eigen::Ref<const VectorXd> &weights,
                                      const VectorXd &x_unit);

/// Jacobians of h_m with respect to all weights at the posterior mean, for each
/// requested fidelity (1-based). Columns of nets above m are zero.
std::vector<MatrixXd> latent_jacobians(const SurrogateModel &model,
                                       const VectorXd &x_unit,
                                       const std::vector<int> &fidelities,
                                       std::vector<VectorXd> *latents = nullptr);

struct Prediction {
  VectorXd mean;
  VectorXd variance;
};

/// De-standardized predictive mean and diagonal variance at fidelity m for an
/// input in the problem's box.
Prediction predict(const SurrogateModel &model, const VectorXd &x, int m);

/// Predictive mean only (no Jacobian), for many inputs at once.
std::vector<VectorXd> predict_mean(const SurrogateModel &model,
                                   const std::vector<VectorXd> &inputs, int m);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class TrainingMode {
  /// Reparameterized mean-field ELBO.
  Variational,
  /// MC-dropout: point weights, Bernoulli masks on hidden units, N(0, I)
  /// prior as weight decay.
  Dropout,
};

/// Per-fidelity standardized design matrices (columns are examples).
struct TrainingBatch {
  std::vector<MatrixXd> inputs;
  std::vector<MatrixXd> targets;

  static TrainingBatch from_dataset(const SurrogateModel &model,
                                    const MultiFidelityDataset &data);
  bool empty() const;
};

struct ElboTerms {
  double value = 0.0;
  double log_likelihood = 0.0;
  double kl = 0.0;
  VectorXd d_mean;
  VectorXd d_log_std;
  std::vector<MatrixXd> d_projections;
  VectorXd d_noise_log_var;
};

/// KL(q || N(0, I)) for the mean-field posterior.
double kl_to_standard_normal(const VariationalPosterior &q);

/// ELBO and its gradient at a fixed reparameterization draw eps (length P).
ElboTerms elbo_with_gradient(const SurrogateModel &model,
                             const TrainingBatch &batch, const VectorXd &eps);

/// Single-sample reparameterized ELBO estimate.
double elbo_estimate(const SurrogateModel &model, const TrainingBatch &batch,
                     std::mt19937_64 &rng);

/// Dropout-mode objective and gradient for given per-net masks.
ElboTerms dropout_objective_with_gradient(
    const SurrogateModel &model, const TrainingBatch &batch,
    const std::vector<std::vector<DropoutScales>> &masks);

struct FitOptions {
  int epochs = 2000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  TrainingMode mode = TrainingMode::Variational;
  double dropout_rate = 0.2;
};

/// ADAM ascent on the training objective (full batch, one noise draw per
/// step). Standardizers are refreshed from the data first. Deterministic in
/// the seed.
SurrogateModel fit(SurrogateModel model, const MultiFidelityDataset &data,
                   const FitOptions &options);

/// n dropout draws of (h_1..h_M) at the posterior mean weights.
std::vector<std::vector<VectorXd>>
dropout_latent_samples(const SurrogateModel &model, const VectorXd &x,
                       std::size_t n, double rate, std::mt19937_64 &rng);

// ---------------------------------------------------------------------------
// Checkpoints: model.json manifest + model.bin with little-endian doubles in
// the order: posterior mean (nets 1..M, layerwise W row-major then b),
// A_1..A_M row-major, noise log variances, posterior log_std.
// ---------------------------------------------------------------------------

void save_checkpoint(const SurrogateModel &model,
                     const std::filesystem::path &dir);
SurrogateModel load_checkpoint(const std::filesystem::path &dir);

} // namespace mfal

#endif
