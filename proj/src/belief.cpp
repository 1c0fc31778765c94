#include "mfal/belief.hpp"

#include <cmath>
#include <numbers>

namespace mfal {

namespace {

MatrixXd weighted_gram(const MatrixXd &J, const VectorXd &sd) {
  const MatrixXd Js = J * sd.asDiagonal();
  return Js * Js.transpose();
}

} // namespace

GaussianBelief latent_delta_posterior(const SurrogateModel &model,
                                      const VectorXd &x, int m) {
  model.require_fitted("latent_delta_posterior");
  std::vector<VectorXd> h;
  const auto J = latent_jacobians(model, model.to_unit(x), {m}, &h);
  return {h[m - 1], weighted_gram(J[0], model.posterior.log_std.array().exp())};
}

GaussianBelief joint_latent_posterior(const SurrogateModel &model,
                                      const VectorXd &x, int m) {
  model.require_fitted("joint_latent_posterior");
  const int M = model.num_fidelities();
  const Index k = model.latent_dim();
  std::vector<VectorXd> h;
  const auto J = latent_jacobians(model, model.to_unit(x), {m, M}, &h);
  MatrixXd stacked(2 * k, model.param_count());
  stacked.topRows(k) = J[0];
  stacked.bottomRows(k) = J[1];
  GaussianBelief b;
  b.mean.resize(2 * k);
  b.mean << h[m - 1], h[M - 1];
  b.cov = weighted_gram(stacked, model.posterior.log_std.array().exp());
  return b;
}

GaussianBelief empirical_belief(const std::vector<VectorXd> &samples,
                                double shrinkage) {
  if (samples.empty())
    throw ShapeMismatch("empirical_belief needs at least one sample");
  const Index d = samples.front().size();
  MatrixXd X(d, static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i)
    X.col(static_cast<Index>(i)) = samples[i];
  GaussianBelief b;
  b.mean = X.rowwise().mean();
  const MatrixXd C = X.colwise() - b.mean;
  b.cov = (C * C.transpose()) / double(X.cols());
  b.cov.diagonal().array() += shrinkage;
  return b;
}

ProjectionFactor ProjectionFactor::from(const MatrixXd &A) {
  ProjectionFactor f;
  f.output_dim = A.rows();
  Eigen::HouseholderQR<MatrixXd> qr(A);
  const Index r = std::min(A.rows(), A.cols());
  f.R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  return f;
}

double latent_information(const MatrixXd &S, const ProjectionFactor &A,
                          double sigma2) {
  if (!(sigma2 > 0))
    throw NotPositiveDefinite("noise variance must be positive");
  if (S.rows() != A.R.cols() || S.cols() != A.R.cols())
    throw ShapeMismatch("latent covariance does not match projection");
  return 0.5 * logdet_identity_plus(MatrixXd(A.R * S * A.R.transpose() / sigma2));
}

double output_entropy_wa(const GaussianBelief &belief, const ProjectionFactor &A,
                         double sigma2) {
  const double d = double(A.output_dim);
  return 0.5 * d * std::log(2 * std::numbers::pi * std::numbers::e * sigma2) +
         latent_information(belief.cov, A, sigma2);
}

double output_entropy_wa(const GaussianBelief &belief, const MatrixXd &A,
                         double sigma2) {
  return output_entropy_wa(belief, ProjectionFactor::from(A), sigma2);
}

double pairwise_mutual_information(const GaussianBelief &joint,
                                   const ProjectionFactor &A_m,
                                   const ProjectionFactor &A_M, double sigma2_m,
                                   double sigma2_M) {
  const Index k = A_m.R.cols();
  if (joint.cov.rows() != 2 * k || joint.cov.cols() != 2 * k ||
      A_M.R.cols() != k)
    throw ShapeMismatch("joint belief must be 2k x 2k for projections with k columns");
  if (!(sigma2_m > 0 && sigma2_M > 0))
    throw NotPositiveDefinite("noise variances must be positive");

  const MatrixXd S_mm = joint.cov.topLeftCorner(k, k);
  const MatrixXd S_MM = joint.cov.bottomRightCorner(k, k);
  const Index rm = A_m.R.rows(), rM = A_M.R.rows();
  MatrixXd R_joint = MatrixXd::Zero(rm + rM, 2 * k);
  R_joint.topLeftCorner(rm, k) = A_m.R / std::sqrt(sigma2_m);
  R_joint.bottomRightCorner(rM, k) = A_M.R / std::sqrt(sigma2_M);

  const double joint_term =
      0.5 * logdet_identity_plus(MatrixXd(R_joint * joint.cov * R_joint.transpose()));
  const double mi = latent_information(S_mm, A_m, sigma2_m) +
                    latent_information(S_MM, A_M, sigma2_M) - joint_term;
  if (mi < -1e-6)
    throw NegativeMI("mutual information evaluated to " + std::to_string(mi));
  return std::max(mi, 0.0);
}

double pairwise_mutual_information(const GaussianBelief &joint,
                                   const MatrixXd &A_m, const MatrixXd &A_M,
                                   double sigma2_m, double sigma2_M) {
  return pairwise_mutual_information(joint, ProjectionFactor::from(A_m),
                                     ProjectionFactor::from(A_M), sigma2_m,
                                     sigma2_M);
}

// ---------------------------------------------------------------------------
// Taylor ratio
// ---------------------------------------------------------------------------

namespace {

struct ValueAndGradient {
  double value;
  VectorXd grad;
};

ValueAndGradient scalar_value_and_gradient(const MlpShape &shape,
                                           const VectorXd &theta,
                                           const VectorXd &x) {
  const MlpCache cache = mlp_forward_batch(shape, theta, x);
  VectorXd g = VectorXd::Zero(theta.size());
  mlp_backward_batch(shape, theta, cache, MatrixXd::Ones(1, 1), g);
  return {cache.output(0, 0), std::move(g)};
}

} // namespace

std::vector<double> taylor_ratio_samples(const MlpPosterior &net,
                                         const VectorXd &x, std::size_t n,
                                         std::mt19937_64 &rng) {
  if (net.shape.output_dim() != 1)
    throw ShapeMismatch("taylor_ratio needs a scalar-output network");
  if (net.mean.size() != net.shape.param_count() ||
      net.log_std.size() != net.shape.param_count())
    throw ShapeMismatch("taylor_ratio: posterior vectors have wrong length");
  constexpr double fd_step = 1e-5;

  const auto at_mean = scalar_value_and_gradient(net.shape, net.mean, x);
  const VectorXd sd = net.log_std.array().exp();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> ratios;
  ratios.reserve(n);
  VectorXd delta(net.mean.size());
  for (std::size_t s = 0; s < n; ++s) {
    for (Index i = 0; i < delta.size(); ++i)
      delta[i] = sd[i] * normal(rng);
    const double first = at_mean.value + at_mean.grad.dot(delta);
    double second = first;
    const double norm = delta.norm();
    if (norm > 0) {
      const VectorXd dir = delta / norm;
      const VectorXd gp =
          scalar_value_and_gradient(net.shape, net.mean + fd_step * dir, x).grad;
      const VectorXd gm =
          scalar_value_and_gradient(net.shape, net.mean - fd_step * dir, x).grad;
      // delta^T H delta = |delta|^2 * dir^T H dir
      const double curvature = norm * norm * dir.dot(gp - gm) / (2 * fd_step);
      second = first + 0.5 * curvature;
    }
    if (std::abs(second) < 1e-12)
      throw DegenerateExpansion("second-order expansion is numerically zero");
    ratios.push_back(std::abs(first) / std::abs(second));
  }
  return ratios;
}

RatioSummary summarize(const std::vector<double> &values) {
  RatioSummary r;
  if (values.empty())
    return r;
  for (double v : values)
    r.mean += v;
  r.mean /= double(values.size());
  for (double v : values)
    r.std += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(r.std / double(values.size()));
  return r;
}

RatioSummary taylor_ratio(const MlpPosterior &net, const VectorXd &x,
                          std::size_t n, std::mt19937_64 &rng) {
  return summarize(taylor_ratio_samples(net, x, n, rng));
}

} // namespace mfal
