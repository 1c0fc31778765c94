#include "mfal/surrogate.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace mfal {

// ---------------------------------------------------------------------------
// Spec and model construction
// ---------------------------------------------------------------------------

SurrogateSpec SurrogateSpec::for_problem(const PdeProblem &problem,
                                         Index latent_dim, Index width,
                                         int hidden_layers) {
  SurrogateSpec s;
  s.num_fidelities = problem.num_fidelities();
  s.input_dim = problem.input_dim();
  s.latent_dim = latent_dim;
  s.hidden_widths.assign(s.num_fidelities,
                         std::vector<Index>(hidden_layers, width));
  for (const auto &f : problem.fidelities)
    s.output_dims.push_back(f.output_dim());
  return s;
}

void SurrogateSpec::validate() const {
  if (num_fidelities < 1)
    throw ShapeMismatch("surrogate needs at least one fidelity");
  if (static_cast<int>(hidden_widths.size()) != num_fidelities ||
      static_cast<int>(output_dims.size()) != num_fidelities)
    throw ShapeMismatch("surrogate spec: per-fidelity lists have wrong length");
  if (input_dim < 1 || latent_dim < 1)
    throw ShapeMismatch("surrogate spec: input and latent dims must be positive");
}

std::vector<MlpShape> SurrogateSpec::net_shapes() const {
  validate();
  std::vector<MlpShape> shapes;
  for (int m = 0; m < num_fidelities; ++m) {
    MlpShape s;
    s.hidden = activation;
    s.widths.push_back(input_dim + (m > 0 ? latent_dim : 0));
    for (Index w : hidden_widths[m])
      s.widths.push_back(w);
    s.widths.push_back(latent_dim);
    s.validate();
    shapes.push_back(std::move(s));
  }
  return shapes;
}

Standardizer Standardizer::fit(const std::vector<FieldSample> &samples) {
  Standardizer s;
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (const auto &fs : samples) {
    sum += fs.values.sum();
    n += fs.values.size();
  }
  if (n == 0)
    return s;
  s.mean = sum / double(n);
  for (const auto &fs : samples)
    sq += (fs.values.array() - s.mean).square().sum();
  const double sd = std::sqrt(sq / double(n));
  s.scale = sd > 1e-12 ? sd : 1.0;
  return s;
}

SurrogateModel SurrogateModel::initialize(const SurrogateSpec &spec,
                                          std::vector<Interval> input_box,
                                          std::uint64_t seed) {
  SurrogateModel model;
  model.spec = spec;
  model.shapes = spec.net_shapes();
  if (static_cast<Index>(input_box.size()) != spec.input_dim)
    throw ShapeMismatch("input box dimension differs from spec.input_dim");
  model.input_box = std::move(input_box);
  model.offsets.push_back(0);
  for (const auto &s : model.shapes)
    model.offsets.push_back(model.offsets.back() + s.param_count());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index P = model.param_count();
  model.posterior.mean = VectorXd::Zero(P);
  model.posterior.log_std = VectorXd::Constant(P, -3.0);
  for (std::size_t j = 0; j < model.shapes.size(); ++j) {
    const MlpShape &s = model.shapes[j];
    for (Index l = 0; l < s.num_layers(); ++l) {
      const Index off = model.offsets[j] + s.layer_offset(l);
      const Index n = s.widths[l + 1] * s.widths[l];
      const double sd = 1.0 / std::sqrt(double(s.widths[l]));
      for (Index i = 0; i < n; ++i)
        model.posterior.mean[off + i] = sd * normal(rng);
    }
  }
  const double a_sd = std::sqrt(0.1);
  for (int m = 0; m < spec.num_fidelities; ++m) {
    MatrixXd A(spec.output_dims[m], spec.latent_dim);
    for (Index c = 0; c < A.cols(); ++c)
      for (Index r = 0; r < A.rows(); ++r)
        A(r, c) = a_sd * normal(rng);
    model.projections.push_back(std::move(A));
  }
  model.noise_log_var = VectorXd::Constant(spec.num_fidelities, std::log(0.01));
  model.standardizers.assign(spec.num_fidelities, Standardizer{});
  return model;
}

VectorXd SurrogateModel::to_unit(const VectorXd &x) const {
  if (x.size() != spec.input_dim)
    throw ShapeMismatch("input has length " + std::to_string(x.size()) +
                        ", model expects " + std::to_string(spec.input_dim));
  VectorXd u(x.size());
  for (Index i = 0; i < x.size(); ++i)
    u[i] = (x[i] - input_box[i].lo) / (input_box[i].hi - input_box[i].lo);
  return u;
}

void SurrogateModel::require_fitted(const char *what) const {
  if (!fitted)
    throw NotFitted(std::string(what) + ": surrogate has not been fitted");
}

// ---------------------------------------------------------------------------
// Chained forward / backward
// ---------------------------------------------------------------------------

namespace {

void check_fidelity(const SurrogateModel &model, int m) {
  if (m < 1 || m > model.num_fidelities())
    throw UnknownFidelity("fidelity " + std::to_string(m) + " not in [1, " +
                          std::to_string(model.num_fidelities()) + "]");
}

Eigen::Ref<const VectorXd> net_weights(const SurrogateModel &model,
                                       const Eigen::Ref<const VectorXd> &w,
                                       int j) {
  return w.segment(model.offsets[j], model.shapes[j].param_count());
}

/// Forward through nets 1..m; caches[j] belongs to net j+1.
std::vector<MlpCache> chain_forward(const SurrogateModel &model,
                                    const Eigen::Ref<const VectorXd> &weights,
                                    const Eigen::Ref<const MatrixXd> &X, int m,
                                    const std::vector<DropoutScales> *masks = nullptr) {
  if (weights.size() != model.param_count())
    throw ShapeMismatch("weight vector has wrong length");
  std::vector<MlpCache> caches;
  caches.reserve(m);
  for (int j = 0; j < m; ++j) {
    const DropoutScales *mask = masks ? &(*masks)[j] : nullptr;
    if (j == 0) {
      caches.push_back(mlp_forward_batch(model.shapes[0],
                                         net_weights(model, weights, 0), X, mask));
    } else {
      MatrixXd in(X.rows() + model.latent_dim(), X.cols());
      in.topRows(X.rows()) = X;
      in.bottomRows(model.latent_dim()) = caches.back().output;
      caches.push_back(mlp_forward_batch(
          model.shapes[j], net_weights(model, weights, j), in, mask));
    }
  }
  return caches;
}

/// Accumulates d<upstream, h_m>/d weights into grad, where m = caches.size().
void chain_backward(const SurrogateModel &model,
                    const Eigen::Ref<const VectorXd> &weights,
                    const std::vector<MlpCache> &caches, MatrixXd upstream,
                    Eigen::Ref<VectorXd> grad) {
  const Index k = model.latent_dim();
  for (int j = static_cast<int>(caches.size()) - 1; j >= 0; --j) {
    auto g = grad.segment(model.offsets[j], model.shapes[j].param_count());
    if (j == 0) {
      mlp_backward_batch(model.shapes[j], net_weights(model, weights, j),
                         caches[j], upstream, g);
    } else {
      MatrixXd gin;
      mlp_backward_batch(model.shapes[j], net_weights(model, weights, j),
                         caches[j], upstream, g, &gin);
      upstream = gin.bottomRows(k);
    }
  }
}

/// Rows of d h / d theta for one net at a single input, for every column of
/// `upstream` at once. Writes into JT (P_net x r, column r = row r of J) and
/// returns the input cotangents (in x r).
MatrixXd net_jacobian_rows(const MlpShape &shape,
                           const Eigen::Ref<const VectorXd> &theta,
                           const MlpCache &cache, MatrixXd delta,
                           Eigen::Ref<MatrixXd> JT) {
  const Index r = delta.cols();
  for (Index l = shape.num_layers() - 1; l >= 0; --l) {
    const Index off = shape.layer_offset(l);
    const Index out = shape.widths[l + 1], in = shape.widths[l];
    const auto a = cache.inputs[l].col(0);
    for (Index c = 0; c < r; ++c) {
      Eigen::Map<RowMajorMatrixXd>(JT.col(c).data() + off, out, in).noalias() =
          delta.col(c) * a.transpose();
      JT.col(c).segment(off + out * in, out) = delta.col(c);
    }
    Eigen::Map<const RowMajorMatrixXd> W(theta.data() + off, out, in);
    MatrixXd prev = W.transpose() * delta;
    if (l == 0)
      return prev;
    delta = prev.array().colwise() * cache.derivs[l - 1].col(0).array();
  }
  return {};
}

} // namespace

std::vector<VectorXd> forward_latents(const SurrogateModel &model,
                                      const Eigen::Ref<const VectorXd> &weights,
                                      const VectorXd &x_unit) {
  if (x_unit.size() != model.spec.input_dim)
    throw ShapeMismatch("forward_latents: input has wrong length");
  const auto caches =
      chain_forward(model, weights, x_unit, model.num_fidelities());
  std::vector<VectorXd> h;
  for (const auto &c : caches)
    h.push_back(c.output.col(0));
  return h;
}

std::vector<MatrixXd> latent_jacobians(const SurrogateModel &model,
                                       const VectorXd &x_unit,
                                       const std::vector<int> &fidelities,
                                       std::vector<VectorXd> *latents) {
  int top = 1;
  for (int m : fidelities) {
    check_fidelity(model, m);
    top = std::max(top, m);
  }
  if (x_unit.size() != model.spec.input_dim)
    throw ShapeMismatch("latent_jacobians: input has wrong length");
  const VectorXd &mu = model.posterior.mean;
  const auto caches = chain_forward(model, mu, x_unit, top);
  if (latents) {
    latents->clear();
    for (const auto &c : caches)
      latents->push_back(c.output.col(0));
  }
  const Index k = model.latent_dim(), P = model.param_count();
  std::vector<MatrixXd> out;
  for (int m : fidelities) {
    MatrixXd JT = MatrixXd::Zero(P, k);
    MatrixXd delta = MatrixXd::Identity(k, k);
    for (int j = m - 1; j >= 0; --j) {
      const Index off = model.offsets[j], np = model.shapes[j].param_count();
      MatrixXd gin = net_jacobian_rows(model.shapes[j], net_weights(model, mu, j),
                                       caches[j], delta, JT.middleRows(off, np));
      if (j > 0)
        delta = gin.bottomRows(k);
    }
    out.push_back(JT.transpose());
  }
  return out;
}

Prediction predict(const SurrogateModel &model, const VectorXd &x, int m) {
  model.require_fitted("predict");
  check_fidelity(model, m);
  std::vector<VectorXd> h;
  const MatrixXd J = latent_jacobians(model, model.to_unit(x), {m}, &h)[0];
  const MatrixXd Js = J * model.posterior.log_std.array().exp().matrix().asDiagonal();
  const MatrixXd S = Js * Js.transpose();
  const MatrixXd &A = model.projections[m - 1];
  const Standardizer &st = model.standardizers[m - 1];
  Prediction p;
  p.mean = st.invert(A * h[m - 1]);
  const MatrixXd AS = A * S;
  p.variance = ((AS.cwiseProduct(A)).rowwise().sum().array() + model.noise_var(m)) *
               st.scale * st.scale;
  return p;
}

std::vector<VectorXd> predict_mean(const SurrogateModel &model,
                                   const std::vector<VectorXd> &inputs, int m) {
  model.require_fitted("predict_mean");
  check_fidelity(model, m);
  MatrixXd X(model.spec.input_dim, static_cast<Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i)
    X.col(static_cast<Index>(i)) = model.to_unit(inputs[i]);
  const auto caches = chain_forward(model, model.posterior.mean, X, m);
  const MatrixXd Y = model.projections[m - 1] * caches.back().output;
  std::vector<VectorXd> out;
  out.reserve(inputs.size());
  for (Index i = 0; i < Y.cols(); ++i)
    out.push_back(model.standardizers[m - 1].invert(Y.col(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

TrainingBatch TrainingBatch::from_dataset(const SurrogateModel &model,
                                          const MultiFidelityDataset &data) {
  if (data.num_fidelities() != model.num_fidelities())
    throw ShapeMismatch("dataset and model disagree on the number of fidelities");
  TrainingBatch b;
  for (int m = 1; m <= model.num_fidelities(); ++m) {
    const auto &samples = data.by_fidelity[m - 1];
    const Index n = static_cast<Index>(samples.size());
    MatrixXd X(model.spec.input_dim, n), Y(model.output_dim(m), n);
    for (Index i = 0; i < n; ++i) {
      if (samples[i].values.size() != model.output_dim(m))
        throw ShapeMismatch("fidelity " + std::to_string(m) +
                            " sample has wrong output length");
      X.col(i) = model.to_unit(samples[i].input);
      Y.col(i) = model.standardizers[m - 1].apply(samples[i].values);
    }
    b.inputs.push_back(std::move(X));
    b.targets.push_back(std::move(Y));
  }
  return b;
}

bool TrainingBatch::empty() const {
  for (const auto &X : inputs)
    if (X.cols() > 0)
      return false;
  return true;
}

double kl_to_standard_normal(const VariationalPosterior &q) {
  const auto var = (2.0 * q.log_std.array()).exp();
  return 0.5 * (var + q.mean.array().square() - 1.0 - 2.0 * q.log_std.array()).sum();
}

namespace {

/// Gaussian log-likelihood of every fidelity group at the given weights;
/// fills d_weights, d_projections and d_noise_log_var.
double log_likelihood_with_gradient(
    const SurrogateModel &model, const TrainingBatch &batch,
    const Eigen::Ref<const VectorXd> &weights, ElboTerms &terms,
    VectorXd &d_weights,
    const std::vector<std::vector<DropoutScales>> *masks = nullptr) {
  const int M = model.num_fidelities();
  if (static_cast<int>(batch.inputs.size()) != M)
    throw ShapeMismatch("training batch has wrong number of fidelities");
  d_weights = VectorXd::Zero(model.param_count());
  terms.d_projections.clear();
  terms.d_noise_log_var = VectorXd::Zero(M);
  double total = 0.0;
  for (int m = 1; m <= M; ++m) {
    const MatrixXd &A = model.projections[m - 1];
    terms.d_projections.push_back(MatrixXd::Zero(A.rows(), A.cols()));
    const MatrixXd &X = batch.inputs[m - 1];
    const Index n = X.cols();
    if (n == 0)
      continue;
    const auto caches = chain_forward(model, weights, X, m,
                                      masks ? &(*masks)[m - 1] : nullptr);
    const MatrixXd &H = caches.back().output;
    const MatrixXd R = batch.targets[m - 1] - A * H;
    const double var = model.noise_var(m);
    const double sq = R.squaredNorm();
    const double count = double(n) * double(A.rows());
    total += -0.5 * count * std::log(2 * std::numbers::pi * var) - 0.5 * sq / var;
    terms.d_projections.back().noalias() = (R * H.transpose()) / var;
    terms.d_noise_log_var[m - 1] = -0.5 * count + 0.5 * sq / var;
    chain_backward(model, weights, caches, (A.transpose() * R) / var, d_weights);
  }
  return total;
}

} // namespace

ElboTerms elbo_with_gradient(const SurrogateModel &model,
                             const TrainingBatch &batch, const VectorXd &eps) {
  const Index P = model.param_count();
  if (eps.size() != P)
    throw ShapeMismatch("reparameterization noise has wrong length");
  const VariationalPosterior &q = model.posterior;
  const VectorXd sd = q.log_std.array().exp();
  const VectorXd w = q.mean + sd.cwiseProduct(eps);

  ElboTerms t;
  VectorXd gw;
  t.log_likelihood = log_likelihood_with_gradient(model, batch, w, t, gw);
  t.kl = kl_to_standard_normal(q);
  t.value = t.log_likelihood - t.kl;
  t.d_mean = gw - q.mean;
  t.d_log_std = (gw.array() * eps.array() * sd.array() -
                 (sd.array().square() - 1.0))
                    .matrix();
  return t;
}

double elbo_estimate(const SurrogateModel &model, const TrainingBatch &batch,
                     std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd eps(model.param_count());
  for (Index i = 0; i < eps.size(); ++i)
    eps[i] = normal(rng);
  return elbo_with_gradient(model, batch, eps).value;
}

ElboTerms dropout_objective_with_gradient(
    const SurrogateModel &model, const TrainingBatch &batch,
    const std::vector<std::vector<DropoutScales>> &masks) {
  const VectorXd &mu = model.posterior.mean;
  ElboTerms t;
  VectorXd gw;
  t.log_likelihood = log_likelihood_with_gradient(model, batch, mu, t, gw, &masks);
  t.kl = 0.5 * mu.squaredNorm();
  t.value = t.log_likelihood - t.kl;
  t.d_mean = gw - mu;
  t.d_log_std = VectorXd::Zero(mu.size());
  return t;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

template <typename Rng>
DropoutScales draw_masks(const MlpShape &shape, Index n, double rate, Rng &rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  DropoutScales masks;
  for (Index l = 1; l < shape.num_layers(); ++l) {
    MatrixXd m(shape.widths[l], n);
    for (Index c = 0; c < n; ++c)
      for (Index r = 0; r < m.rows(); ++r)
        m(r, c) = keep(rng) ? s : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

struct Adam {
  VectorXd m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;

  explicit Adam(Index n) : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)) {}

  /// Ascent step on theta along grad.
  void step(VectorXd &theta, const VectorXd &grad, double lr) {
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad.cwiseAbs2();
    const double c1 = 1 - std::pow(beta1, double(t));
    const double c2 = 1 - std::pow(beta2, double(t));
    theta.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

VectorXd pack(const SurrogateModel &model) {
  const Index P = model.param_count();
  Index n = 2 * P + model.noise_log_var.size();
  for (const auto &A : model.projections)
    n += A.size();
  VectorXd theta(n);
  Index off = 0;
  theta.segment(off, P) = model.posterior.mean, off += P;
  theta.segment(off, P) = model.posterior.log_std, off += P;
  for (const auto &A : model.projections) {
    theta.segment(off, A.size()) = A.reshaped(), off += A.size();
  }
  theta.segment(off, model.noise_log_var.size()) = model.noise_log_var;
  return theta;
}

void unpack(const VectorXd &theta, SurrogateModel &model) {
  const Index P = model.param_count();
  Index off = 0;
  model.posterior.mean = theta.segment(off, P), off += P;
  model.posterior.log_std = theta.segment(off, P), off += P;
  for (auto &A : model.projections) {
    A.reshaped() = theta.segment(off, A.size()), off += A.size();
  }
  model.noise_log_var = theta.segment(off, model.noise_log_var.size());
}

VectorXd pack_gradient(const ElboTerms &t) {
  Index n = t.d_mean.size() + t.d_log_std.size() + t.d_noise_log_var.size();
  for (const auto &A : t.d_projections)
    n += A.size();
  VectorXd g(n);
  Index off = 0;
  g.segment(off, t.d_mean.size()) = t.d_mean, off += t.d_mean.size();
  g.segment(off, t.d_log_std.size()) = t.d_log_std, off += t.d_log_std.size();
  for (const auto &A : t.d_projections) {
    g.segment(off, A.size()) = A.reshaped(), off += A.size();
  }
  g.segment(off, t.d_noise_log_var.size()) = t.d_noise_log_var;
  return g;
}

} // namespace

SurrogateModel fit(SurrogateModel model, const MultiFidelityDataset &data,
                   const FitOptions &options) {
  if (data.num_fidelities() != model.num_fidelities())
    throw ShapeMismatch("dataset and model disagree on the number of fidelities");
  if (data.count(model.num_fidelities()) < 1)
    throw ConfigError("fit needs at least one example at the highest fidelity");
  if (options.epochs < 0 || options.learning_rate < 0)
    throw ConfigError("fit: epochs and learning rate must be non-negative");
  if (options.mode == TrainingMode::Dropout &&
      !(options.dropout_rate > 0 && options.dropout_rate < 1))
    throw ConfigError("fit: dropout rate must lie in (0, 1)");

  for (int m = 1; m <= model.num_fidelities(); ++m)
    if (!data.by_fidelity[m - 1].empty())
      model.standardizers[m - 1] = Standardizer::fit(data.by_fidelity[m - 1]);
  const TrainingBatch batch = TrainingBatch::from_dataset(model, data);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd theta = pack(model);
  Adam adam(theta.size());
  VectorXd eps(model.param_count());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    ElboTerms t;
    if (options.mode == TrainingMode::Variational) {
      for (Index i = 0; i < eps.size(); ++i)
        eps[i] = normal(rng);
      t = elbo_with_gradient(model, batch, eps);
    } else {
      std::vector<std::vector<DropoutScales>> masks(model.num_fidelities());
      for (int m = 0; m < model.num_fidelities(); ++m)
        for (int j = 0; j <= m; ++j)
          masks[m].push_back(draw_masks(model.shapes[j], batch.inputs[m].cols(),
                                        options.dropout_rate, rng));
      t = dropout_objective_with_gradient(model, batch, masks);
    }
    if (!std::isfinite(t.value))
      throw NonFiniteLoss("training objective became non-finite at epoch " +
                          std::to_string(epoch));
    adam.step(theta, pack_gradient(t), options.learning_rate);
    unpack(theta, model);
  }
  model.fitted = true;
  return model;
}

std::vector<std::vector<VectorXd>>
dropout_latent_samples(const SurrogateModel &model, const VectorXd &x,
                       std::size_t n, double rate, std::mt19937_64 &rng) {
  if (!(rate > 0 && rate < 1))
    throw ConfigError("dropout rate must lie in (0, 1)");
  const Index cols = static_cast<Index>(n);
  const MatrixXd X = model.to_unit(x).replicate(1, cols);
  std::vector<DropoutScales> masks;
  for (const auto &s : model.shapes)
    masks.push_back(draw_masks(s, cols, rate, rng));
  const auto caches = chain_forward(model, model.posterior.mean, X,
                                    model.num_fidelities(), &masks);
  std::vector<std::vector<VectorXd>> out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto &c : caches)
      out[i].push_back(c.output.col(static_cast<Index>(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

void write_doubles(std::ofstream &out, const double *p, Index n) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  out.write(reinterpret_cast<const char *>(p), std::streamsize(n * sizeof(double)));
}

void read_doubles(std::ifstream &in, double *p, Index n) {
  in.read(reinterpret_cast<char *>(p), std::streamsize(n * sizeof(double)));
  if (!in)
    throw IoError("checkpoint blob is truncated");
}

} // namespace

void save_checkpoint(const SurrogateModel &model,
                     const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["num_fidelities"] = model.spec.num_fidelities;
  j["input_dim"] = model.spec.input_dim;
  j["latent_dim"] = model.spec.latent_dim;
  j["hidden_widths"] = model.spec.hidden_widths;
  j["output_dims"] = model.spec.output_dims;
  j["activation"] = to_string(model.spec.activation);
  j["fitted"] = model.fitted;
  for (const auto &b : model.input_box)
    j["input_box"].push_back({b.lo, b.hi});
  for (const auto &s : model.standardizers)
    j["standardizers"].push_back({{"mean", s.mean}, {"scale", s.scale}});
  j["param_count"] = model.param_count();
  j["blob"] = "model.bin";
  j["blob_layout"] = "posterior_mean, projections (row-major), noise_log_var, "
                     "posterior_log_std; float64 little-endian";
  std::ofstream js(dir / "model.json", std::ios::binary);
  js << j.dump(2) << '\n';

  std::ofstream bin(dir / "model.bin", std::ios::binary);
  if (!bin)
    throw IoError("cannot write checkpoint in " + dir.string());
  write_doubles(bin, model.posterior.mean.data(), model.param_count());
  for (const auto &A : model.projections) {
    const RowMajorMatrixXd R = A;
    write_doubles(bin, R.data(), R.size());
  }
  write_doubles(bin, model.noise_log_var.data(), model.noise_log_var.size());
  write_doubles(bin, model.posterior.log_std.data(), model.param_count());
}

SurrogateModel load_checkpoint(const std::filesystem::path &dir) {
  std::ifstream js(dir / "model.json", std::ios::binary);
  if (!js)
    throw IoError("missing " + (dir / "model.json").string());
  const nlohmann::json j = nlohmann::json::parse(js);
  SurrogateSpec spec;
  spec.num_fidelities = j.at("num_fidelities").get<int>();
  spec.input_dim = j.at("input_dim").get<Index>();
  spec.latent_dim = j.at("latent_dim").get<Index>();
  spec.hidden_widths = j.at("hidden_widths").get<std::vector<std::vector<Index>>>();
  spec.output_dims = j.at("output_dims").get<std::vector<Index>>();
  spec.activation = activation_from_string(j.at("activation").get<std::string>());
  std::vector<Interval> box;
  for (const auto &b : j.at("input_box"))
    box.push_back({b.at(0).get<double>(), b.at(1).get<double>()});

  SurrogateModel model = SurrogateModel::initialize(spec, box, 0);
  model.fitted = j.at("fitted").get<bool>();
  for (std::size_t m = 0; m < model.standardizers.size(); ++m) {
    model.standardizers[m].mean = j.at("standardizers").at(m).at("mean").get<double>();
    model.standardizers[m].scale = j.at("standardizers").at(m).at("scale").get<double>();
  }
  std::ifstream bin(dir / "model.bin", std::ios::binary);
  if (!bin)
    throw IoError("missing " + (dir / "model.bin").string());
  read_doubles(bin, model.posterior.mean.data(), model.param_count());
  for (auto &A : model.projections) {
    RowMajorMatrixXd R(A.rows(), A.cols());
    read_doubles(bin, R.data(), R.size());
    A = R;
  }
  read_doubles(bin, model.noise_log_var.data(), model.noise_log_var.size());
  read_doubles(bin, model.posterior.log_std.data(), model.param_count());
  return model;
}

} // namespace mfal
