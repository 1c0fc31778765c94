#include "mfal/numkit.hpp"
#include "mfal/parallel.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <atomic>
#include <random>

using namespace mfal;

TEST_CASE("cholesky_logdet of diag(1,2,3) is log 6") {
  const MatrixXd S = VectorXd::LinSpaced(3, 1, 3).asDiagonal();
  const auto r = cholesky_logdet(S);
  CHECK(r.logdet == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  CHECK(r.jitter == 0.0);
}

TEST_CASE("cholesky_logdet matches eigenvalue product on random SPD") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd S = oracle::random_spd(rng, 5);
    double expected = 0;
    for (double ev : oracle::power_eigenvalues(S))
      expected += std::log(ev);
    const double got = cholesky_logdet(S).logdet;
    CHECK(std::abs(got - expected) <= 1e-8 * std::abs(expected));
  }
}

TEST_CASE("cholesky_logdet factor reproduces the matrix") {
  std::mt19937_64 rng(2);
  const MatrixXd S = oracle::random_spd(rng, 7);
  const auto r = cholesky_logdet(S);
  const MatrixXd back = oracle::naive_matmul(r.lower, r.lower.transpose());
  CHECK((back - S).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.lower.isLowerTriangular());
}

TEST_CASE("cholesky_logdet escalates jitter on singular PSD input") {
  const MatrixXd S = MatrixXd::Ones(2, 2);
  const auto r = cholesky_logdet(S);
  CHECK(r.jitter > 0.0);
  CHECK(r.jitter <= 1e-4);
  CHECK(std::isfinite(r.logdet));
}

TEST_CASE("cholesky_logdet rejects bad input") {
  CHECK_THROWS_AS(cholesky_logdet(MatrixXd::Zero(2, 3)), ShapeMismatch);
  MatrixXd asym(2, 2);
  asym << 2, 1, 0, 2;
  CHECK_THROWS_AS(cholesky_logdet(asym), ShapeMismatch);
  MatrixXd neg = -MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(cholesky_logdet(neg), NotPositiveDefinite);
}

TEST_CASE("cholesky_logdet works in single precision") {
  Eigen::MatrixXf S = Eigen::MatrixXf::Identity(3, 3) * 2.0f;
  const auto r = cholesky_logdet(S);
  CHECK(r.logdet == doctest::Approx(3 * std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("logdet_identity_plus against eigenvalues") {
  std::mt19937_64 rng(3);
  const MatrixXd S = oracle::random_spd(rng, 6, 0.0);
  double expected = 0;
  for (double ev : oracle::power_eigenvalues(S))
    expected += std::log1p(std::max(ev, 0.0));
  CHECK(logdet_identity_plus(S) == doctest::Approx(expected).epsilon(1e-8));
}

namespace {

MlpParams random_params(const std::vector<Index> &widths, std::mt19937_64 &rng,
                        Activation act = Activation::Tanh) {
  MlpShape shape{widths, act};
  return MlpParams::unflatten(shape,
                              oracle::random_vector(rng, shape.param_count(), 0.7));
}

std::vector<long> as_long(const std::vector<Index> &w) { return {w.begin(), w.end()}; }

} // namespace

TEST_CASE("MlpShape parameter count and flat round trip") {
  MlpShape shape{{3, 4, 2}, Activation::Tanh};
  CHECK(shape.param_count() == 3 * 4 + 4 + 4 * 2 + 2);
  CHECK(shape.layer_offset(0) == 0);
  CHECK(shape.layer_offset(1) == 16);
  std::mt19937_64 rng(4);
  const VectorXd theta = oracle::random_vector(rng, shape.param_count());
  CHECK(MlpParams::unflatten(shape, theta).flatten() == theta);
  CHECK_THROWS_AS(MlpParams::unflatten(shape, VectorXd::Zero(5)), ShapeMismatch);
}

TEST_CASE("mlp_forward matches the loop oracle") {
  std::mt19937_64 rng(5);
  const std::vector<Index> widths{3, 5, 4, 2};
  const MlpParams p = random_params(widths, rng);
  const auto net = oracle::unpack_net(as_long(widths), p.flatten());
  for (int rep = 0; rep < 5; ++rep) {
    const VectorXd x = oracle::random_vector(rng, 3);
    CHECK((mlp_forward(p, x).output - net(x)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("zero weights give the bias of the last layer") {
  MlpShape shape{{2, 3, 2}, Activation::Tanh};
  MlpParams p = MlpParams::zeros(shape);
  p.biases.back() << 0.5, -1.5;
  const VectorXd y = mlp_forward(p, VectorXd::Ones(2)).output;
  CHECK(y[0] == 0.5);
  CHECK(y[1] == -1.5);
}

TEST_CASE("mlp_param_gradient matches finite differences") {
  std::mt19937_64 rng(6);
  const std::vector<Index> widths{3, 6, 5, 2};
  const MlpShape shape{widths, Activation::Tanh};
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const MlpParams p = random_params(widths, rng);
    const VectorXd x = oracle::random_vector(rng, 3);
    const VectorXd up = oracle::random_vector(rng, 2);
    const VectorXd g = mlp_param_gradient(p, x, up);
    const VectorXd fd = oracle::fd_gradient(
        [&](const VectorXd &t) {
          return up.dot(oracle::unpack_net(as_long(widths), t)(x));
        },
        p.flatten());
    for (Index i = 0; i < g.size(); ++i)
      worst = std::max(worst, oracle::rel_err(g[i], fd[i], 1e-4));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("batched backward returns the input gradient") {
  std::mt19937_64 rng(7);
  const std::vector<Index> widths{4, 5, 3};
  const MlpShape shape{widths, Activation::Tanh};
  const VectorXd theta = oracle::random_vector(rng, shape.param_count(), 0.7);
  const MatrixXd X = oracle::random_matrix(rng, 4, 3);
  const MatrixXd U = oracle::random_matrix(rng, 3, 3);
  const MlpCache c = mlp_forward_batch(shape, theta, X);
  VectorXd g = VectorXd::Zero(theta.size());
  MatrixXd gx;
  mlp_backward_batch(shape, theta, c, U, g, &gx);
  const auto net = oracle::unpack_net(as_long(widths), theta);
  for (Index col = 0; col < 3; ++col) {
    const VectorXd fd = oracle::fd_gradient(
        [&](const VectorXd &x) { return U.col(col).dot(net(x)); }, X.col(col));
    CHECK((gx.col(col) - fd).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("latent_weight_jacobian rows equal param gradients bitwise") {
  std::mt19937_64 rng(8);
  const MlpParams p = random_params({2, 4, 3}, rng);
  const VectorXd x = oracle::random_vector(rng, 2);
  const MatrixXd J = latent_weight_jacobian(p, x);
  CHECK(J.rows() == 3);
  for (Index j = 0; j < 3; ++j) {
    const VectorXd e = VectorXd::Unit(3, j);
    CHECK(J.row(j).transpose() == mlp_param_gradient(p, x, e));
  }
}

TEST_CASE("latent_weight_jacobian directional derivative check") {
  std::mt19937_64 rng(9);
  const std::vector<Index> widths{3, 5, 4};
  const MlpParams p = random_params(widths, rng);
  const VectorXd x = oracle::random_vector(rng, 3);
  const MatrixXd J = latent_weight_jacobian(p, x);
  const VectorXd theta = p.flatten();
  const auto net = [&](const VectorXd &t) {
    return oracle::unpack_net(as_long(widths), t)(x);
  };
  for (int rep = 0; rep < 5; ++rep) {
    VectorXd v = oracle::random_vector(rng, theta.size());
    v /= v.norm();
    const double h = 1e-5;
    const VectorXd fd = (net(theta + h * v) - net(theta - h * v)) / (2 * h);
    const VectorXd jv = J * v;
    for (Index i = 0; i < jv.size(); ++i)
      CHECK(oracle::rel_err(jv[i], fd[i], 1e-4) < 1e-5);
  }
}

TEST_CASE("identity activation is an affine map") {
  std::mt19937_64 rng(10);
  const MlpParams p = random_params({3, 4, 2}, rng, Activation::Identity);
  const VectorXd a = oracle::random_vector(rng, 3), b = oracle::random_vector(rng, 3);
  const VectorXd mid = mlp_forward(p, 0.5 * (a + b)).output;
  const VectorXd avg = 0.5 * (mlp_forward(p, a).output + mlp_forward(p, b).output);
  CHECK((mid - avg).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("activation names round trip") {
  CHECK(activation_from_string(to_string(Activation::Tanh)) == Activation::Tanh);
  CHECK(activation_from_string(to_string(Activation::Identity)) == Activation::Identity);
  CHECK_THROWS(activation_from_string("relu"));
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto &h : hits)
    CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10,
                               [](std::size_t i) {
                                 if (i == 3)
                                   throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
