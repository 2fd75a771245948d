#include "avgrl/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace avgrl::nn {

int MlpSpec::layer_in(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

int MlpSpec::layer_out(int layer) const {
  return layer == num_layers() - 1 ? output_dim
                                   : hidden_dims[layer];
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l)
    n += static_cast<std::size_t>(layer_out(l)) * layer_in(l) + layer_out(l);
  return n;
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("MlpSpec: input_dim and output_dim must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw std::invalid_argument("MlpSpec: hidden dims must be >= 1");
  if (feature_norm != FeatureNorm::kNone && hidden_dims.empty())
    throw std::invalid_argument(
        "MlpSpec: feature_norm needs a penultimate layer (hidden_dims empty)");
}

Eigen::Map<Matrix> ParamBundle::weight(int layer) {
  const auto& l = layout[layer];
  return {values.data() + l.w_offset, l.rows, l.cols};
}

Eigen::Map<const Matrix> ParamBundle::weight(int layer) const {
  const auto& l = layout[layer];
  return {values.data() + l.w_offset, l.rows, l.cols};
}

Eigen::Map<Vector> ParamBundle::bias(int layer) {
  const auto& l = layout[layer];
  return {values.data() + l.b_offset, l.rows};
}

Eigen::Map<const Vector> ParamBundle::bias(int layer) const {
  const auto& l = layout[layer];
  return {values.data() + l.b_offset, l.rows};
}

Matrix orthogonal_init(Rng& rng, int rows, int cols, double gain) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("orthogonal_init: rows, cols must be >= 1");
  Matrix g(std::max(rows, cols), std::min(rows, cols));
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();

  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  const Vector diag = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (diag(j) < 0) q.col(j) = -q.col(j);

  Matrix w = rows < cols ? Matrix(q.transpose()) : q;
  w *= gain;
  return w;
}

ParamBundle init_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParamBundle p;
  p.values = Vector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  std::size_t offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    LayerLayout layout;
    layout.rows = spec.layer_out(l);
    layout.cols = spec.layer_in(l);
    layout.w_offset = offset;
    offset += static_cast<std::size_t>(layout.rows) * layout.cols;
    layout.b_offset = offset;
    offset += layout.rows;
    p.layout.push_back(layout);
  }

  for (int l = 0; l < spec.num_layers(); ++l) {
    const bool is_output = l == spec.num_layers() - 1;
    if (spec.init == Init::kOrthogonal) {
      const double gain = is_output ? spec.output_gain : spec.hidden_gain;
      p.weight(l) = orthogonal_init(rng, p.layout[l].rows, p.layout[l].cols, gain);
      p.bias(l).setZero();
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(p.layout[l].cols));
      auto w = p.weight(l);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
          w(i, j) = rng.uniform(-bound, bound);
      auto b = p.bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i)
        b(i) = rng.uniform(-bound, bound);
    }
  }
  return p;
}

namespace {

double activate(Activation act, double z) {
  switch (act) {
    case Activation::kLeakyRelu:
      return z > 0 ? z : kLeakyReluSlope * z;
    case Activation::kRelu:
      return z > 0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kIdentity:
      return z;
  }
  return z;
}

double activate_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::kLeakyRelu:
      return z > 0 ? 1.0 : kLeakyReluSlope;
    case Activation::kRelu:
      return z > 0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - a * a;
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

std::pair<Vector, double> feature_norm_forward(FeatureNorm kind,
                                               const Vector& psi) {
  const auto n = static_cast<double>(psi.size());
  switch (kind) {
    case FeatureNorm::kNone:
      return {psi, 0.0};
    case FeatureNorm::kPnorm: {
      const double norm = psi.norm();
      return {psi / std::max(norm, kNormEps), norm};
    }
    case FeatureNorm::kLayerNorm: {
      const Vector centered = psi.array() - psi.mean();
      const double sigma = std::sqrt(centered.squaredNorm() / n);
      return {centered / std::max(sigma, kNormEps), sigma};
    }
    case FeatureNorm::kRmsNorm: {
      const double rms = std::sqrt(psi.squaredNorm() / n);
      return {psi / std::max(rms, kNormEps), rms};
    }
  }
  return {psi, 0.0};
}

Vector feature_norm_backward(FeatureNorm kind, const Vector& psi,
                             const Vector& normed, double norm_value,
                             const Vector& upstream) {
  const auto n = static_cast<double>(psi.size());
  switch (kind) {
    case FeatureNorm::kNone:
      return upstream;
    case FeatureNorm::kPnorm: {
      if (norm_value <= kNormEps) return upstream / kNormEps;
      // (I - psi_hat psi_hat^T) / ||psi||
      return (upstream - normed * normed.dot(upstream)) / norm_value;
    }
    case FeatureNorm::kLayerNorm: {
      const double mean_up = upstream.mean();
      if (norm_value <= kNormEps)
        return (upstream.array() - mean_up).matrix() / kNormEps;
      const double proj = upstream.dot(normed) / n;
      return ((upstream.array() - mean_up).matrix() - normed * proj) /
             norm_value;
    }
    case FeatureNorm::kRmsNorm: {
      if (norm_value <= kNormEps) return upstream / kNormEps;
      const double proj = upstream.dot(normed) / n;
      return (upstream - normed * proj) / norm_value;
    }
  }
  return upstream;
}

std::pair<Vector, Tape> forward(const ParamBundle& params, const MlpSpec& spec,
                                const Vector& input) {
  if (input.size() != spec.input_dim) {
    std::ostringstream msg;
    msg << "forward: input length " << input.size() << " != input_dim "
        << spec.input_dim;
    throw std::invalid_argument(msg.str());
  }
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    if (!std::isfinite(input(i))) {
      std::ostringstream msg;
      msg << "forward: non-finite input at index " << i << " (" << input(i)
          << ")";
      throw std::invalid_argument(msg.str());
    }
  }
  if (params.layout.size() != static_cast<std::size_t>(spec.num_layers()))
    throw std::invalid_argument("forward: params/spec layer count mismatch");

  Tape tape;
  tape.spec = spec;
  tape.input = input;

  const int n_hidden = static_cast<int>(spec.hidden_dims.size());
  Vector x = input;
  for (int l = 0; l < n_hidden; ++l) {
    Vector z = params.weight(l) * x + params.bias(l);
    Vector a(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      a(i) = activate(spec.activation, z(i));
    tape.preact.push_back(z);
    tape.postact.push_back(a);
    x = std::move(a);
  }

  if (n_hidden > 0) {
    tape.raw_features = x;
    auto [normed, norm_value] = feature_norm_forward(spec.feature_norm, x);
    tape.normed_features = normed;
    tape.feature_norm_value = norm_value;
    x = tape.normed_features;
  }

  const int out_layer = spec.num_layers() - 1;
  Vector y = params.weight(out_layer) * x + params.bias(out_layer);
  tape.preact.push_back(y);
  tape.output = y;
  return {y, tape};
}

namespace {

void check_structure(const ParamBundle& params, const Tape& tape,
                     const Vector& upstream) {
  const MlpSpec& spec = tape.spec;
  if (upstream.size() != spec.output_dim)
    throw std::invalid_argument(
        "backward: upstream length does not match output_dim");
  if (tape.preact.size() != static_cast<std::size_t>(spec.num_layers()))
    throw std::invalid_argument("backward: tape/spec structure mismatch");
  if (params.layout.size() != static_cast<std::size_t>(spec.num_layers()) ||
      params.values.size() != static_cast<Eigen::Index>(spec.param_count()))
    throw std::invalid_argument("backward: tape/params structure mismatch");
  for (int l = 0; l < spec.num_layers(); ++l)
    if (params.layout[l].rows != spec.layer_out(l) ||
        params.layout[l].cols != spec.layer_in(l))
      throw std::invalid_argument("backward: tape/params layer shape mismatch");
}

// Shared reverse sweep. Returns gradient w.r.t. input; fills param_grad when
// non-null. Every gradient entry is written exactly once, so the output
// buffer is resized without zero-initialization.
Vector backward(const ParamBundle& params, const Tape& tape,
                const Vector& upstream, Vector* param_grad) {
  check_structure(params, tape, upstream);
  const MlpSpec& spec = tape.spec;
  const int n_hidden = static_cast<int>(spec.hidden_dims.size());
  const int out_layer = spec.num_layers() - 1;

  ParamBundle grads;
  if (param_grad) {
    if (param_grad->size() != params.values.size())
      param_grad->resize(params.values.size());
    grads.values.swap(*param_grad);
    grads.layout = params.layout;
  }

  // Output layer: y = W x + b with x the (normed) penultimate features.
  const Vector& out_in = n_hidden > 0 ? tape.normed_features : tape.input;
  if (param_grad) {
    grads.weight(out_layer) = upstream * out_in.transpose();
    grads.bias(out_layer) = upstream;
  }
  Vector up = params.weight(out_layer).transpose() * upstream;

  if (n_hidden > 0)
    up = feature_norm_backward(spec.feature_norm, tape.raw_features,
                               tape.normed_features, tape.feature_norm_value,
                               up);

  for (int l = n_hidden - 1; l >= 0; --l) {
    const Vector& z = tape.preact[l];
    const Vector& a = tape.postact[l];
    Vector dz(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      dz(i) = up(i) * activate_grad(spec.activation, z(i), a(i));
    const Vector& layer_in = l == 0 ? tape.input : tape.postact[l - 1];
    if (param_grad) {
      grads.weight(l) = dz * layer_in.transpose();
      grads.bias(l) = dz;
    }
    up = params.weight(l).transpose() * dz;
  }

  if (param_grad) param_grad->swap(grads.values);
  return up;
}

}  // namespace

Vector grad_wrt_params(const ParamBundle& params, const Tape& tape,
                       const Vector& upstream) {
  Vector g;
  backward(params, tape, upstream, &g);
  return g;
}

void grad_wrt_params_into(const ParamBundle& params, const Tape& tape,
                          const Vector& upstream, Vector& out) {
  backward(params, tape, upstream, &out);
}

Vector grad_wrt_input(const ParamBundle& params, const Tape& tape,
                      const Vector& upstream) {
  return backward(params, tape, upstream, nullptr);
}

}  // namespace avgrl::nn
