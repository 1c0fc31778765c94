#include "mfal/acquisition.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace mfal;

namespace {

SurrogateModel scoring_model(std::uint64_t seed, int M = 2) {
  std::mt19937_64 rng(seed);
  SurrogateSpec s;
  s.num_fidelities = M;
  s.input_dim = 2;
  s.latent_dim = 3;
  s.hidden_widths.assign(M, {8});
  for (int m = 0; m < M; ++m)
    s.output_dims.push_back(6 + 4 * m);
  std::vector<Interval> box{{-1, 1}, {0, 2}};
  SurrogateModel model = SurrogateModel::initialize(s, box, seed);
  model.posterior.mean = oracle::random_vector(rng, model.param_count(), 0.6);
  model.posterior.log_std =
      oracle::random_vector(rng, model.param_count(), 0.2).array() - 2.5;
  for (int m = 0; m < M; ++m)
    model.noise_log_var[m] = -3.0 + 0.5 * m;
  model.fitted = true;
  return model;
}

AcquisitionConfig quick_config() {
  AcquisitionConfig c;
  c.num_starts = 16;
  c.top_k = 3;
  c.iterations = 20;
  c.dropout_samples = 40;
  return c;
}

} // namespace

TEST_CASE("strategy names round trip") {
  for (const std::string n :
       {"dmfal", "mf_bald", "mf_predvar", "dropout_latent", "mf_random", "fixed_fidelity(3)"})
    CHECK(Strategy::parse(n).name() == n);
  CHECK(Strategy::parse("fixed_fidelity(2)").fidelity == 2);
  CHECK(Strategy::parse("dmfal").score_based());
  CHECK_FALSE(Strategy::parse("mf_random").score_based());
  CHECK_THROWS_AS(Strategy::parse("fixed_fidelity()"), ConfigError);
  CHECK_THROWS_AS(Strategy::parse("greedy"), ConfigError);
}

TEST_CASE("scoring context validates costs") {
  const SurrogateModel m = scoring_model(1);
  CHECK_THROWS_AS(ScoringContext(m, {1.0}), ShapeMismatch);
  CHECK_THROWS_AS(ScoringContext(m, {1.0, 0.0}), ConfigError);
  const ScoringContext ctx(m, {1.0, 10.0});
  CHECK(ctx.cost(2) == 10.0);
  CHECK((ctx.factor(2).R.transpose() * ctx.factor(2).R -
         m.projections[1].transpose() * m.projections[1])
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("MF-BALD equals output entropy minus noise entropy") {
  const SurrogateModel model = scoring_model(2);
  const ScoringContext ctx(model, {2.0, 7.0});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 10; ++rep) {
    VectorXd x(2);
    x << -1 + 2 * u(rng), 2 * u(rng);
    for (int m = 1; m <= 2; ++m) {
      const GaussianBelief b = latent_delta_posterior(model, x, m);
      const double s2 = model.noise_var(m);
      const double d = double(model.projections[m - 1].rows());
      const double expected =
          oracle::output_space_entropy(model.projections[m - 1], b.cov, s2) -
          0.5 * d * std::log(2 * std::numbers::pi * std::numbers::e * s2);
      CHECK(score_mf_bald(ctx, x, m) * ctx.cost(m) ==
            doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("DMFAL top-fidelity score in output-information mode equals MF-BALD") {
  const SurrogateModel model = scoring_model(4);
  AcquisitionConfig c;
  c.top_mode = TopFidelityMode::OutputInformation;
  const ScoringContext ctx(model, {1.0, 5.0}, c);
  const VectorXd x = (VectorXd(2) << 0.3, 1.1).finished();
  CHECK(score_dmfal(ctx, x, 2) == doctest::Approx(score_mf_bald(ctx, x, 2)).epsilon(1e-12));
}

TEST_CASE("DMFAL scores are nonnegative and scale with cost") {
  const SurrogateModel model = scoring_model(5, 3);
  const ScoringContext a(model, {1.0, 3.0, 9.0}), b(model, {2.0, 6.0, 18.0});
  const VectorXd x = (VectorXd(2) << -0.2, 0.4).finished();
  for (int m = 1; m <= 3; ++m) {
    CHECK(score_dmfal(a, x, m) >= 0.0);
    CHECK(score_dmfal(a, x, m) == doctest::Approx(2 * score_dmfal(b, x, m)).epsilon(1e-12));
  }
}

TEST_CASE("MF-PredVar is the mean predictive variance over cost") {
  const SurrogateModel model = scoring_model(6);
  const ScoringContext ctx(model, {1.0, 4.0});
  const VectorXd x = (VectorXd(2) << 0.5, 0.5).finished();
  CHECK(score_mf_predvar(ctx, x, 2) ==
        doctest::Approx(predict(model, x, 2).variance.mean() / 4.0).epsilon(1e-14));
}

TEST_CASE("dropout-latent scores use common random numbers") {
  const SurrogateModel model = scoring_model(7);
  const ScoringContext ctx(model, {1.0, 4.0}, quick_config(), 99);
  const VectorXd x = (VectorXd(2) << 0.1, 0.9).finished();
  CHECK(score_dropout_latent(ctx, x, 1) == score_dropout_latent(ctx, x, 1));
  CHECK(score_dropout_latent(ctx, x, 2) >= 0.0);
  CHECK_THROWS_AS(score_dropout_latent(ctx, x, 3), UnknownFidelity);
}

TEST_CASE("box optimizer finds a planted optimum") {
  const VectorXd c1 = (VectorXd(3) << 0.2, 0.7, 0.45).finished();
  const VectorXd c2 = (VectorXd(3) << 0.9, 0.1, 0.6).finished();
  auto f = [&](const VectorXd &u, int m) {
    return m == 1 ? 1.0 - (u - c1).squaredNorm() : 1.5 - 2 * (u - c2).squaredNorm();
  };
  std::mt19937_64 rng(8);
  const BoxOptimum opt = maximize_over_box(f, 3, 2, AcquisitionConfig{}, rng);
  CHECK(opt.fidelity == 2);
  CHECK((opt.point - c2).cwiseAbs().maxCoeff() < 0.02);
  CHECK(opt.score >= opt.best_start_score);
}

TEST_CASE("box optimizer respects the box and handles boundary optima") {
  auto f = [](const VectorXd &u, int) { return u.sum(); };
  std::mt19937_64 rng(9);
  const BoxOptimum opt = maximize_over_box(f, 4, 1, quick_config(), rng);
  CHECK((opt.point.array() <= 1.0).all());
  CHECK((opt.point.array() >= 0.0).all());
  CHECK(opt.score > 3.9);
}

TEST_CASE("box optimizer breaks ties toward the lowest fidelity") {
  auto f = [](const VectorXd &, int) { return 1.0; };
  std::mt19937_64 rng(10);
  CHECK(maximize_over_box(f, 2, 3, quick_config(), rng).fidelity == 1);
  AcquisitionConfig bad = quick_config();
  bad.num_starts = 0;
  CHECK_THROWS_AS(maximize_over_box(f, 2, 3, bad, rng), ConfigError);
}

TEST_CASE("refinement never lowers the best start score") {
  const SurrogateModel model = scoring_model(11);
  const ScoringContext ctx(model, {1.0, 10.0}, quick_config());
  auto f = [&](const VectorXd &u, int m) {
    VectorXd x(2);
    x << -1 + 2 * u[0], 2 * u[1];
    return score_dmfal(ctx, x, m);
  };
  for (std::uint64_t s = 0; s < 5; ++s) {
    std::mt19937_64 rng(s);
    const BoxOptimum opt = maximize_over_box(f, 2, 2, quick_config(), rng);
    CHECK(opt.score >= opt.best_start_score);
  }
}

TEST_CASE("query selection is deterministic and stays in the problem box") {
  const SurrogateModel model = scoring_model(12);
  const ScoringContext ctx(model, {1.0, 10.0}, quick_config());
  for (const std::string name : {"dmfal", "mf_bald", "mf_predvar", "dropout_latent",
                                 "mf_random", "fixed_fidelity(2)"}) {
    const Strategy s = Strategy::parse(name);
    std::mt19937_64 r1(13), r2(13);
    const QueryDecision a = optimize_query(ctx, s, r1), b = optimize_query(ctx, s, r2);
    CHECK(a.input == b.input);
    CHECK(a.fidelity == b.fidelity);
    CHECK(a.input[0] >= -1.0);
    CHECK(a.input[0] <= 1.0);
    CHECK(a.input[1] >= 0.0);
    CHECK(a.input[1] <= 2.0);
    if (s.kind == StrategyKind::FixedFidelity)
      CHECK(a.fidelity == 2);
  }
}

TEST_CASE("uniform cost rescaling leaves the decision unchanged") {
  const SurrogateModel model = scoring_model(14);
  const ScoringContext a(model, {1.0, 10.0}, quick_config()),
      b(model, {3.0, 30.0}, quick_config());
  std::mt19937_64 r1(15), r2(15);
  const QueryDecision qa = optimize_query(a, Strategy::parse("dmfal"), r1);
  const QueryDecision qb = optimize_query(b, Strategy::parse("dmfal"), r2);
  CHECK(qa.input == qb.input);
  CHECK(qa.fidelity == qb.fidelity);
}

TEST_CASE("query selection rejects invalid requests") {
  SurrogateModel model = scoring_model(16);
  const ScoringContext ctx(model, {1.0, 10.0}, quick_config());
  std::mt19937_64 rng(17);
  CHECK_THROWS_AS(optimize_query(ctx, Strategy::parse("fixed_fidelity(3)"), rng),
                  UnknownFidelity);
  model.fitted = false;
  const ScoringContext unfitted(model, {1.0, 10.0}, quick_config());
  CHECK_THROWS_AS(optimize_query(unfitted, Strategy::parse("dmfal"), rng), NotFitted);
  CHECK_NOTHROW(optimize_query(unfitted, Strategy::parse("mf_random"), rng));
}
