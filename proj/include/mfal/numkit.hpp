#ifndef MFAL_NUMKIT_HPP
#define MFAL_NUMKIT_HPP

#include "mfal/error.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace mfal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-major view used for the flat parameter layout of MLP weights.
using RowMajorMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Cholesky with log-determinant
// ---------------------------------------------------------------------------

/// Jitter rungs tried in order after the caller's own jitter fails.
inline constexpr std::array<double, 4> kJitterLadder{1e-10, 1e-8, 1e-6, 1e-4};

template <typename Scalar> struct CholeskyLogdet {
  Matrix<Scalar> lower;
  Scalar logdet{0};
  /// Jitter actually added to the diagonal (may exceed the requested one).
  Scalar jitter{0};
};

/// Factor S + jitter*I = L L^T and return log det. If the factorization hits a
/// non-positive pivot the jitter escalates through kJitterLadder; failure at
/// the top rung raises NotPositiveDefinite.
template <typename Derived>
CholeskyLogdet<typename Derived::Scalar>
cholesky_logdet(const Eigen::MatrixBase<Derived> &S,
                typename Derived::Scalar jitter = 0) {
  using Scalar = typename Derived::Scalar;
  if (S.rows() != S.cols())
    throw ShapeMismatch("cholesky_logdet: matrix is " +
                        std::to_string(S.rows()) + "x" +
                        std::to_string(S.cols()));
  const Index n = S.rows();
  const Scalar scale = std::max<Scalar>(S.cwiseAbs().maxCoeff(), Scalar(1));
  if (n > 0 && (S - S.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale)
    throw ShapeMismatch("cholesky_logdet: matrix is not symmetric");
  if (jitter < 0)
    throw NotPositiveDefinite("cholesky_logdet: negative jitter");

  std::vector<Scalar> rungs{jitter};
  for (double r : kJitterLadder)
    if (Scalar(r) > jitter)
      rungs.push_back(Scalar(r));

  Matrix<Scalar> work;
  for (Scalar j : rungs) {
    work = S;
    work.diagonal().array() += j;
    Eigen::LLT<Matrix<Scalar>> llt(work);
    if (llt.info() != Eigen::Success)
      continue;
    CholeskyLogdet<Scalar> out;
    out.lower = llt.matrixL();
    out.jitter = j;
    out.logdet = 2 * out.lower.diagonal().array().log().sum();
    if (!std::isfinite(static_cast<double>(out.logdet)))
      continue;
    return out;
  }
  throw NotPositiveDefinite("cholesky_logdet: factorization failed at jitter " +
                            std::to_string(kJitterLadder.back()));
}

/// log det(I + S) for symmetric PSD S, via cholesky_logdet.
template <typename Derived>
typename Derived::Scalar logdet_identity_plus(const Eigen::MatrixBase<Derived> &S) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> M = S;
  M = Scalar(0.5) * (M + M.transpose());
  M.diagonal().array() += Scalar(1);
  return cholesky_logdet(M).logdet;
}

// ---------------------------------------------------------------------------
// Small multilayer perceptrons
// ---------------------------------------------------------------------------

enum class Activation { Tanh, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string &s);

/// Layer widths [in, h_1, ..., out]. The hidden activation is applied after
/// every layer except the last, which is affine.
///
/// Flat parameter layout: for each layer in order, the weight matrix
/// (out x in, row-major) followed by the bias (out).
struct MlpShape {
  std::vector<Index> widths;
  Activation hidden = Activation::Tanh;

  Index input_dim() const { return widths.front(); }
  Index output_dim() const { return widths.back(); }
  Index num_layers() const { return static_cast<Index>(widths.size()) - 1; }
  Index param_count() const;
  /// Offset of layer l's weight block inside the flat vector.
  Index layer_offset(Index l) const;

  void validate() const;
};

struct MlpParams {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
  Activation activation = Activation::Tanh;

  MlpShape shape() const;
  VectorXd flatten() const;
  static MlpParams unflatten(const MlpShape &shape,
                             const Eigen::Ref<const VectorXd> &flat);
  static MlpParams zeros(const MlpShape &shape);
};

/// Everything the backward pass needs. Columns index the batch.
struct MlpCache {
  /// inputs[l] is the input of layer l; inputs[0] is the network input.
  std::vector<MatrixXd> inputs;
  /// derivs[l] = d inputs[l+1] / d z_l for each hidden layer l.
  std::vector<MatrixXd> derivs;
  MatrixXd output;
};

/// Per-hidden-layer multiplicative dropout scales (0 or 1/(1-rate)), one
/// matrix of shape width x batch per hidden layer.
using DropoutScales = std::vector<MatrixXd>;

MlpCache mlp_forward_batch(const MlpShape &shape,
                           const Eigen::Ref<const VectorXd> &theta,
                           const Eigen::Ref<const MatrixXd> &X,
                           const DropoutScales *dropout = nullptr);

/// Accumulates d<upstream, output>/d theta into grad_theta (summed over the
/// batch). When grad_input is non-null it receives d<upstream, output>/d X.
void mlp_backward_batch(const MlpShape &shape,
                        const Eigen::Ref<const VectorXd> &theta,
                        const MlpCache &cache,
                        const Eigen::Ref<const MatrixXd> &upstream,
                        Eigen::Ref<VectorXd> grad_theta,
                        MatrixXd *grad_input = nullptr);

struct MlpForward {
  VectorXd output;
  MlpCache cache;
};

MlpForward mlp_forward(const MlpParams &params, const VectorXd &x);

/// Gradient of <upstream, mlp(x)> with respect to the flattened parameters.
VectorXd mlp_param_gradient(const MlpParams &params, const VectorXd &x,
                            const VectorXd &upstream);

/// k x P Jacobian of the network output with respect to its parameters;
/// row j is mlp_param_gradient with upstream e_j.
MatrixXd latent_weight_jacobian(const MlpParams &params, const VectorXd &x);

} // namespace mfal

#endif
