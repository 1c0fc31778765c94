#ifndef MFAL_ACQUISITION_HPP
#define MFAL_ACQUISITION_HPP

#include "mfal/belief.hpp"
#include "mfal/surrogate.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace mfal {

enum class StrategyKind {
  Dmfal,
  MfBald,
  MfPredVar,
  DropoutLatent,
  MfRandom,
  FixedFidelity,
};

struct Strategy {
  StrategyKind kind = StrategyKind::Dmfal;
  /// Only meaningful for FixedFidelity (1-based).
  int fidelity = 0;

  /// dmfal, mf_bald, mf_predvar, dropout_latent, mf_random, fixed_fidelity(m)
  static Strategy parse(const std::string &name);
  std::string name() const;
  bool score_based() const;

  friend bool operator==(const Strategy &, const Strategy &) = default;
};

/// How a(x, M) is defined at the top fidelity.
enum class TopFidelityMode {
  /// I(y_M; y'_M): two conditionally independent noisy views of h_M.
  TwoViews,
  /// I(y_M; f_M) = 0.5 log det(I + S A^T A / sigma^2).
  OutputInformation,
};

struct AcquisitionConfig {
  int num_starts = 64;
  int top_k = 5;
  int iterations = 40;
  double initial_step = 0.05;
  int dropout_samples = 100;
  double dropout_rate = 0.2;
  double dropout_shrinkage = 1e-6;
  TopFidelityMode top_mode = TopFidelityMode::TwoViews;
};

struct QueryDecision {
  VectorXd input;
  int fidelity = 1;
  double score = 0.0;
  Strategy strategy;
};

/// Per-model scoring state: the fitted model, query costs, and the projection
/// factors (A_m^T A_m) computed once per fidelity.
class ScoringContext {
public:
  ScoringContext(const SurrogateModel &model, std::vector<double> costs,
                 AcquisitionConfig config = {}, std::uint64_t dropout_seed = 0);

  const SurrogateModel &model() const { return *model_; }
  double cost(int m) const { return costs_.at(m - 1); }
  const ProjectionFactor &factor(int m) const { return factors_.at(m - 1); }
  const AcquisitionConfig &config() const { return config_; }
  std::uint64_t dropout_seed() const { return dropout_seed_; }

private:
  const SurrogateModel *model_;
  std::vector<double> costs_;
  std::vector<ProjectionFactor> factors_;
  AcquisitionConfig config_;
  std::uint64_t dropout_seed_;
};

/// I(y_m(x); y_M(x)) / lambda_m under the delta-method joint latent belief.
double score_dmfal(const ScoringContext &ctx, const VectorXd &x, int m);

/// I(y_m(x); W) / lambda_m = 0.5 log det(I + S_m A_m^T A_m / sigma_m^2) / lambda_m.
double score_mf_bald(const ScoringContext &ctx, const VectorXd &x, int m);

/// Mean predictive variance over the d_m outputs, divided by lambda_m.
double score_mf_predvar(const ScoringContext &ctx, const VectorXd &x, int m);

/// As score_dmfal, with the joint latent belief moment-matched to dropout
/// draws. Every call reuses the same masks (common random numbers).
double score_dropout_latent(const ScoringContext &ctx, const VectorXd &x, int m);

double score(const ScoringContext &ctx, const Strategy &strategy,
             const VectorXd &x, int m);

struct BoxOptimum {
  VectorXd point;
  int fidelity = 1;
  double score = 0.0;
  /// Best raw start score over all fidelities, before refinement.
  double best_start_score = 0.0;
};

/// Multi-start maximization of score(u, m) over the unit box and fidelities
/// 1..M: uniform starts per fidelity, top-k refined by projected coordinate
/// pattern search. Ties go to the lowest start index, then lowest fidelity.
BoxOptimum maximize_over_box(
    const std::function<double(const VectorXd &, int)> &score, Index dim,
    int num_fidelities, const AcquisitionConfig &config, std::mt19937_64 &rng);

/// Choose the next (input, fidelity) for the strategy. Inputs are returned in
/// the problem's coordinates.
QueryDecision optimize_query(const ScoringContext &ctx, const Strategy &strategy,
                             std::mt19937_64 &rng);

} // namespace mfal

#endif
