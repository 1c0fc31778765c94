#include "mfal/acquisition.hpp"
#include "mfal/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <regex>

namespace mfal {

Strategy Strategy::parse(const std::string &name) {
  static const std::regex fixed(R"(fixed_fidelity\((\d+)\))");
  std::smatch match;
  if (name == "dmfal")
    return {StrategyKind::Dmfal, 0};
  if (name == "mf_bald")
    return {StrategyKind::MfBald, 0};
  if (name == "mf_predvar")
    return {StrategyKind::MfPredVar, 0};
  if (name == "dropout_latent")
    return {StrategyKind::DropoutLatent, 0};
  if (name == "mf_random")
    return {StrategyKind::MfRandom, 0};
  if (std::regex_match(name, match, fixed))
    return {StrategyKind::FixedFidelity, std::stoi(match[1].str())};
  throw ConfigError("unknown strategy '" + name + "'");
}

std::string Strategy::name() const {
  switch (kind) {
  case StrategyKind::Dmfal:
    return "dmfal";
  case StrategyKind::MfBald:
    return "mf_bald";
  case StrategyKind::MfPredVar:
    return "mf_predvar";
  case StrategyKind::DropoutLatent:
    return "dropout_latent";
  case StrategyKind::MfRandom:
    return "mf_random";
  case StrategyKind::FixedFidelity:
    return "fixed_fidelity(" + std::to_string(fidelity) + ")";
  }
  return "unknown";
}

bool Strategy::score_based() const {
  return kind != StrategyKind::MfRandom && kind != StrategyKind::FixedFidelity;
}

ScoringContext::ScoringContext(const SurrogateModel &model,
                               std::vector<double> costs,
                               AcquisitionConfig config,
                               std::uint64_t dropout_seed)
    : model_(&model), costs_(std::move(costs)), config_(config),
      dropout_seed_(dropout_seed) {
  if (static_cast<int>(costs_.size()) != model.num_fidelities())
    throw ShapeMismatch("one cost per fidelity required");
  for (double c : costs_)
    if (!(c > 0))
      throw ConfigError("query costs must be positive");
  for (const auto &A : model.projections)
    factors_.push_back(ProjectionFactor::from(A));
}

namespace {

double mutual_information_score(const ScoringContext &ctx,
                                const GaussianBelief &joint, int m) {
  const SurrogateModel &model = ctx.model();
  const int M = model.num_fidelities();
  if (m == M && ctx.config().top_mode == TopFidelityMode::OutputInformation) {
    const Index k = model.latent_dim();
    return latent_information(joint.cov.topLeftCorner(k, k), ctx.factor(M),
                              model.noise_var(M)) /
           ctx.cost(m);
  }
  return pairwise_mutual_information(joint, ctx.factor(m), ctx.factor(M),
                                     model.noise_var(m), model.noise_var(M)) /
         ctx.cost(m);
}

} // namespace

double score_dmfal(const ScoringContext &ctx, const VectorXd &x, int m) {
  return mutual_information_score(ctx, joint_latent_posterior(ctx.model(), x, m), m);
}

double score_mf_bald(const ScoringContext &ctx, const VectorXd &x, int m) {
  const GaussianBelief b = latent_delta_posterior(ctx.model(), x, m);
  return latent_information(b.cov, ctx.factor(m), ctx.model().noise_var(m)) /
         ctx.cost(m);
}

double score_mf_predvar(const ScoringContext &ctx, const VectorXd &x, int m) {
  const Prediction p = predict(ctx.model(), x, m);
  return p.variance.mean() / ctx.cost(m);
}

double score_dropout_latent(const ScoringContext &ctx, const VectorXd &x, int m) {
  const SurrogateModel &model = ctx.model();
  model.require_fitted("score_dropout_latent");
  const int M = model.num_fidelities();
  if (m < 1 || m > M)
    throw UnknownFidelity("fidelity " + std::to_string(m) + " out of range");
  std::mt19937_64 rng(ctx.dropout_seed());
  const auto draws =
      dropout_latent_samples(model, x, std::size_t(ctx.config().dropout_samples),
                             ctx.config().dropout_rate, rng);
  const Index k = model.latent_dim();
  std::vector<VectorXd> stacked;
  stacked.reserve(draws.size());
  for (const auto &h : draws) {
    VectorXd v(2 * k);
    v << h[m - 1], h[M - 1];
    stacked.push_back(std::move(v));
  }
  return mutual_information_score(
      ctx, empirical_belief(stacked, ctx.config().dropout_shrinkage), m);
}

double score(const ScoringContext &ctx, const Strategy &strategy,
             const VectorXd &x, int m) {
  switch (strategy.kind) {
  case StrategyKind::Dmfal:
    return score_dmfal(ctx, x, m);
  case StrategyKind::MfBald:
    return score_mf_bald(ctx, x, m);
  case StrategyKind::MfPredVar:
    return score_mf_predvar(ctx, x, m);
  case StrategyKind::DropoutLatent:
    return score_dropout_latent(ctx, x, m);
  default:
    throw ConfigError("strategy " + strategy.name() + " has no score");
  }
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  VectorXd point;
  double score;
};

Candidate pattern_search(const std::function<double(const VectorXd &, int)> &f,
                         int m, Candidate start, const AcquisitionConfig &cfg) {
  double step = cfg.initial_step;
  Candidate best = std::move(start);
  const Index dim = best.point.size();
  for (int it = 0; it < cfg.iterations; ++it) {
    bool improved = false;
    for (Index i = 0; i < dim; ++i) {
      for (double dir : {1.0, -1.0}) {
        VectorXd trial = best.point;
        trial[i] = std::clamp(trial[i] + dir * step, 0.0, 1.0);
        if (trial[i] == best.point[i])
          continue;
        const double s = f(trial, m);
        if (s > best.score) {
          best = {std::move(trial), s};
          improved = true;
          break;
        }
      }
    }
    if (!improved)
      step *= 0.5;
  }
  return best;
}

} // namespace

BoxOptimum maximize_over_box(
    const std::function<double(const VectorXd &, int)> &f, Index dim,
    int num_fidelities, const AcquisitionConfig &cfg, std::mt19937_64 &rng) {
  if (cfg.num_starts < 1 || cfg.top_k < 1 || cfg.iterations < 0)
    throw ConfigError("acquisition optimizer needs starts >= 1 and top_k >= 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  BoxOptimum best;
  bool have_best = false;
  bool have_start = false;
  for (int m = 1; m <= num_fidelities; ++m) {
    std::vector<VectorXd> starts(cfg.num_starts);
    for (auto &s : starts) {
      s.resize(dim);
      for (Index i = 0; i < dim; ++i)
        s[i] = unif(rng);
    }
    std::vector<double> scores(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) { scores[i] = f(starts[i], m); });

    std::vector<std::size_t> order(starts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (!have_start || scores[order[0]] > best.best_start_score) {
      best.best_start_score = scores[order[0]];
      have_start = true;
    }

    const std::size_t keep = std::min<std::size_t>(cfg.top_k, order.size());
    std::vector<Candidate> refined(keep);
    parallel_for(keep, [&](std::size_t r) {
      refined[r] = pattern_search(f, m, {starts[order[r]], scores[order[r]]}, cfg);
    });
    // refined[] is in descending start-score order, which keeps ties on the
    // lowest start index after the stable sort above.
    for (const auto &c : refined) {
      if (!have_best || c.score > best.score) {
        best.point = c.point;
        best.fidelity = m;
        best.score = c.score;
        have_best = true;
      }
    }
  }
  return best;
}

QueryDecision optimize_query(const ScoringContext &ctx, const Strategy &strategy,
                             std::mt19937_64 &rng) {
  const SurrogateModel &model = ctx.model();
  const int M = model.num_fidelities();
  const Index dim = model.spec.input_dim;
  auto from_unit = [&](const VectorXd &u) {
    VectorXd x(dim);
    for (Index i = 0; i < dim; ++i)
      x[i] = model.input_box[i].lo +
             std::clamp(u[i], 0.0, 1.0) * (model.input_box[i].hi - model.input_box[i].lo);
    return x;
  };
  auto uniform_unit = [&] {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    VectorXd u(dim);
    for (Index i = 0; i < dim; ++i)
      u[i] = unif(rng);
    return u;
  };

  QueryDecision q;
  q.strategy = strategy;
  switch (strategy.kind) {
  case StrategyKind::MfRandom: {
    std::uniform_int_distribution<int> pick(1, M);
    q.fidelity = pick(rng);
    q.input = from_unit(uniform_unit());
    return q;
  }
  case StrategyKind::FixedFidelity:
    if (strategy.fidelity < 1 || strategy.fidelity > M)
      throw UnknownFidelity("fixed_fidelity(" + std::to_string(strategy.fidelity) +
                            ") on a " + std::to_string(M) + "-fidelity model");
    q.fidelity = strategy.fidelity;
    q.input = from_unit(uniform_unit());
    return q;
  default:
    break;
  }

  model.require_fitted("optimize_query");
  auto f = [&](const VectorXd &u, int m) { return score(ctx, strategy, from_unit(u), m); };
  const BoxOptimum opt = maximize_over_box(f, dim, M, ctx.config(), rng);
  q.input = from_unit(opt.point);
  q.fidelity = opt.fidelity;
  q.score = opt.score;
  return q;
}

} // namespace mfal
