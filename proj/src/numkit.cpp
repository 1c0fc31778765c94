#include "mfal/numkit.hpp"

namespace mfal {

std::string to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "identity";
}

Activation activation_from_string(const std::string &s) {
  if (s == "tanh")
    return Activation::Tanh;
  if (s == "identity")
    return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

Index MlpShape::param_count() const { return layer_offset(num_layers()); }

Index MlpShape::layer_offset(Index l) const {
  Index off = 0;
  for (Index i = 0; i < l; ++i)
    off += widths[i + 1] * widths[i] + widths[i + 1];
  return off;
}

void MlpShape::validate() const {
  if (widths.size() < 2)
    throw ShapeMismatch("MlpShape needs at least an input and output width");
  for (Index w : widths)
    if (w < 1)
      throw ShapeMismatch("MlpShape widths must be positive");
}

MlpShape MlpParams::shape() const {
  MlpShape s;
  s.hidden = activation;
  if (weights.empty())
    return s;
  s.widths.push_back(weights.front().cols());
  for (const auto &W : weights)
    s.widths.push_back(W.rows());
  return s;
}

VectorXd MlpParams::flatten() const {
  const MlpShape s = shape();
  VectorXd flat(s.param_count());
  for (Index l = 0; l < s.num_layers(); ++l) {
    const Index off = s.layer_offset(l);
    const Index out = s.widths[l + 1], in = s.widths[l];
    if (biases[l].size() != out)
      throw ShapeMismatch("MlpParams: bias size does not match layer width");
    Eigen::Map<RowMajorMatrixXd>(flat.data() + off, out, in) = weights[l];
    flat.segment(off + out * in, out) = biases[l];
  }
  return flat;
}

MlpParams MlpParams::unflatten(const MlpShape &shape,
                               const Eigen::Ref<const VectorXd> &flat) {
  shape.validate();
  if (flat.size() != shape.param_count())
    throw ShapeMismatch("MlpParams::unflatten: expected " +
                        std::to_string(shape.param_count()) + " values, got " +
                        std::to_string(flat.size()));
  MlpParams p;
  p.activation = shape.hidden;
  for (Index l = 0; l < shape.num_layers(); ++l) {
    const Index off = shape.layer_offset(l);
    const Index out = shape.widths[l + 1], in = shape.widths[l];
    p.weights.emplace_back(
        Eigen::Map<const RowMajorMatrixXd>(flat.data() + off, out, in));
    p.biases.emplace_back(flat.segment(off + out * in, out));
  }
  return p;
}

MlpParams MlpParams::zeros(const MlpShape &shape) {
  return unflatten(shape, VectorXd::Zero(shape.param_count()));
}

MlpCache mlp_forward_batch(const MlpShape &shape,
                           const Eigen::Ref<const VectorXd> &theta,
                           const Eigen::Ref<const MatrixXd> &X,
                           const DropoutScales *dropout) {
  if (theta.size() != shape.param_count())
    throw ShapeMismatch("mlp_forward: parameter vector has wrong length");
  if (X.rows() != shape.input_dim())
    throw ShapeMismatch("mlp_forward: input has " + std::to_string(X.rows()) +
                        " rows, network expects " +
                        std::to_string(shape.input_dim()));
  const Index L = shape.num_layers();
  if (dropout && static_cast<Index>(dropout->size()) != L - 1)
    throw ShapeMismatch("mlp_forward: one dropout mask per hidden layer");

  MlpCache cache;
  cache.inputs.reserve(L);
  cache.derivs.reserve(L - 1);
  cache.inputs.push_back(X);
  for (Index l = 0; l < L; ++l) {
    const Index off = shape.layer_offset(l);
    const Index out = shape.widths[l + 1], in = shape.widths[l];
    Eigen::Map<const RowMajorMatrixXd> W(theta.data() + off, out, in);
    auto b = theta.segment(off + out * in, out);
    MatrixXd z = W * cache.inputs.back();
    z.colwise() += b;
    if (l + 1 == L) {
      cache.output = std::move(z);
      break;
    }
    MatrixXd deriv;
    if (shape.hidden == Activation::Tanh) {
      z = z.array().tanh().matrix();
      deriv = (1.0 - z.array().square()).matrix();
    } else {
      deriv = MatrixXd::Ones(z.rows(), z.cols());
    }
    if (dropout) {
      const MatrixXd &s = (*dropout)[l];
      if (s.rows() != out || s.cols() != X.cols())
        throw ShapeMismatch("mlp_forward: dropout mask shape mismatch");
      z.array() *= s.array();
      deriv.array() *= s.array();
    }
    cache.derivs.push_back(std::move(deriv));
    cache.inputs.push_back(std::move(z));
  }
  return cache;
}

void mlp_backward_batch(const MlpShape &shape,
                        const Eigen::Ref<const VectorXd> &theta,
                        const MlpCache &cache,
                        const Eigen::Ref<const MatrixXd> &upstream,
                        Eigen::Ref<VectorXd> grad_theta, MatrixXd *grad_input) {
  if (upstream.rows() != shape.output_dim() ||
      upstream.cols() != cache.output.cols())
    throw ShapeMismatch("mlp_backward: upstream shape does not match output");
  if (grad_theta.size() != shape.param_count())
    throw ShapeMismatch("mlp_backward: gradient vector has wrong length");

  MatrixXd delta = upstream;
  for (Index l = shape.num_layers() - 1; l >= 0; --l) {
    const Index off = shape.layer_offset(l);
    const Index out = shape.widths[l + 1], in = shape.widths[l];
    Eigen::Map<RowMajorMatrixXd> gW(grad_theta.data() + off, out, in);
    gW.noalias() += delta * cache.inputs[l].transpose();
    grad_theta.segment(off + out * in, out) += delta.rowwise().sum();
    if (l == 0 && !grad_input)
      break;
    Eigen::Map<const RowMajorMatrixXd> W(theta.data() + off, out, in);
    MatrixXd prev = W.transpose() * delta;
    if (l == 0) {
      *grad_input = std::move(prev);
      break;
    }
    delta = prev.cwiseProduct(cache.derivs[l - 1]);
  }
}

MlpForward mlp_forward(const MlpParams &params, const VectorXd &x) {
  const MlpShape s = params.shape();
  s.validate();
  const VectorXd theta = params.flatten();
  MlpForward f;
  f.cache = mlp_forward_batch(s, theta, x);
  f.output = f.cache.output.col(0);
  return f;
}

VectorXd mlp_param_gradient(const MlpParams &params, const VectorXd &x,
                            const VectorXd &upstream) {
  const MlpShape s = params.shape();
  s.validate();
  if (upstream.size() != s.output_dim())
    throw ShapeMismatch("mlp_param_gradient: upstream has length " +
                        std::to_string(upstream.size()) + ", output width is " +
                        std::to_string(s.output_dim()));
  const VectorXd theta = params.flatten();
  const MlpCache cache = mlp_forward_batch(s, theta, x);
  VectorXd grad = VectorXd::Zero(s.param_count());
  mlp_backward_batch(s, theta, cache, upstream, grad);
  return grad;
}

MatrixXd latent_weight_jacobian(const MlpParams &params, const VectorXd &x) {
  const MlpShape s = params.shape();
  s.validate();
  const Index k = s.output_dim();
  MatrixXd J(k, s.param_count());
  for (Index j = 0; j < k; ++j)
    J.row(j) = mlp_param_gradient(params, x, VectorXd::Unit(k, j)).transpose();
  return J;
}

} // namespace mfal
