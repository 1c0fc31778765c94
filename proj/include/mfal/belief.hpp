#ifndef MFAL_BELIEF_HPP
#define MFAL_BELIEF_HPP

#include "mfal/numkit.hpp"
#include "mfal/surrogate.hpp"

#include <random>
#include <vector>

namespace mfal {

struct GaussianBelief {
  VectorXd mean;
  MatrixXd cov;

  Index dim() const { return mean.size(); }
};

/// Gaussian over h_m(x): mean at the posterior mean weights, covariance
/// J diag(var) J^T with J the weight Jacobian of x -> h_m.
GaussianBelief latent_delta_posterior(const SurrogateModel &model,
                                      const VectorXd &x, int m);

/// Joint Gaussian over [h_m; h_M] from the stacked Jacobian [J_m; J_M].
GaussianBelief joint_latent_posterior(const SurrogateModel &model,
                                      const VectorXd &x, int m);

/// Gaussian fitted to samples by their empirical mean and covariance (1/n
/// normalization) plus shrinkage * I.
GaussianBelief empirical_belief(const std::vector<VectorXd> &samples,
                                double shrinkage);

/// Triangular R with A^T A = R^T R, so log det(I + S A^T A / s2) equals
/// log det(I + R S R^T / s2) with a symmetric argument.
struct ProjectionFactor {
  MatrixXd R;
  Index output_dim = 0;

  static ProjectionFactor from(const MatrixXd &A);
};

/// 0.5 * log det(I_k + S A^T A / sigma2): the information the noisy output
/// y = A h + eps carries about h.
double latent_information(const MatrixXd &S, const ProjectionFactor &A,
                          double sigma2);

/// Entropy (nats) of y = A h + eps, h ~ belief, eps ~ N(0, sigma2 I), evaluated
/// in latent space.
double output_entropy_wa(const GaussianBelief &belief, const ProjectionFactor &A,
                         double sigma2);
double output_entropy_wa(const GaussianBelief &belief, const MatrixXd &A,
                         double sigma2);

/// I(y_m; y_M) for the joint latent belief over [h_m; h_M] with projections
/// A_m, A_M and independent noises. Values in [-1e-6, 0) clamp to zero;
/// anything lower raises NegativeMI.
double pairwise_mutual_information(const GaussianBelief &joint,
                                   const ProjectionFactor &A_m,
                                   const ProjectionFactor &A_M, double sigma2_m,
                                   double sigma2_M);
double pairwise_mutual_information(const GaussianBelief &joint,
                                   const MatrixXd &A_m, const MatrixXd &A_M,
                                   double sigma2_m, double sigma2_M);

// ---------------------------------------------------------------------------
// First- vs second-order expansion diagnostic
// ---------------------------------------------------------------------------

/// Mean-field posterior over the parameters of a single MLP.
struct MlpPosterior {
  MlpShape shape;
  VectorXd mean;
  VectorXd log_std;
};

struct RatioSummary {
  double mean = 0.0;
  double std = 0.0;
};

/// |first-order| / |second-order| Taylor expansions of a scalar network output
/// about the posterior mean, one value per weight draw. The second-order term
/// uses a central finite difference of analytic gradients along the draw.
std::vector<double> taylor_ratio_samples(const MlpPosterior &net,
                                         const VectorXd &x, std::size_t n,
                                         std::mt19937_64 &rng);

RatioSummary taylor_ratio(const MlpPosterior &net, const VectorXd &x,
                          std::size_t n, std::mt19937_64 &rng);

RatioSummary summarize(const std::vector<double> &values);

} // namespace mfal

#endif
