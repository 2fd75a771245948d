#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <numbers>
#include <vector>

#include "avgrl/rng.hpp"

namespace avgrl::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { kLeakyRelu, kRelu, kTanh, kIdentity };
enum class FeatureNorm { kNone, kPnorm, kLayerNorm, kRmsNorm };
enum class Init { kOrthogonal, kUniformFanIn };

// Slope of the negative branch of leaky ReLU.
inline constexpr double kLeakyReluSlope = 0.01;
// Norm floor shared by pnorm / layer norm / RMS norm denominators.
inline constexpr double kNormEps = 1e-8;

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims = {256, 256};
  int output_dim = 0;
  Activation activation = Activation::kLeakyRelu;
  // Applied to the penultimate layer's post-activation features only.
  FeatureNorm feature_norm = FeatureNorm::kNone;
  Init init = Init::kOrthogonal;
  double hidden_gain = std::numbers::sqrt2;
  double output_gain = 1.0;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_in(int layer) const;
  int layer_out(int layer) const;
  std::size_t param_count() const;
  // Throws std::invalid_argument on bad dimensions or a feature norm
  // without a hidden layer to attach to.
  void validate() const;
};

struct LayerLayout {
  int rows = 0;  // output dim of the layer
  int cols = 0;  // input dim of the layer
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;
};

// Flat parameter vector plus the per-layer (rows, cols, offset) records
// that map slices of it onto weight matrices and bias vectors. Weight
// blocks are column-major.
struct ParamBundle {
  Vector values;
  std::vector<LayerLayout> layout;

  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Vector> bias(int layer);
  Eigen::Map<const Vector> bias(int layer) const;
};

// Primal activations recorded during forward; enables exact reverse-mode
// gradients w.r.t. params and input.
struct Tape {
  MlpSpec spec;
  Vector input;
  std::vector<Vector> preact;    // z_i per layer, output layer included
  std::vector<Vector> postact;   // act(z_i) per hidden layer
  Vector raw_features;           // penultimate postact before normalization
  Vector normed_features;        // after normalization (= raw if none)
  double feature_norm_value = 0.0;  // ||psi||, sigma or rms, pre-floor
  Vector output;
};

// Random matrix with orthonormal rows or columns scaled by `gain`:
// W^T W = gain^2 I when cols <= rows, W W^T = gain^2 I otherwise.
Matrix orthogonal_init(Rng& rng, int rows, int cols, double gain);

// Fresh parameters per spec.init. Orthogonal: hidden layers use
// spec.hidden_gain, the output layer spec.output_gain, biases zero.
ParamBundle init_params(const MlpSpec& spec, Rng& rng);

// Forward pass. Rejects non-finite input with a diagnostic naming the
// offending index.
std::pair<Vector, Tape> forward(const ParamBundle& params, const MlpSpec& spec,
                                const Vector& input);

// Exact gradient of upstream . output w.r.t. the flat parameter vector.
// `params` must be the bundle the tape was recorded with (structural
// mismatch throws).
Vector grad_wrt_params(const ParamBundle& params, const Tape& tape,
                       const Vector& upstream);

// Same, writing into a caller-owned buffer (resized on first use). The hot
// training loop reuses one buffer per network to stay allocation-free.
void grad_wrt_params_into(const ParamBundle& params, const Tape& tape,
                          const Vector& upstream, Vector& out);

// Exact gradient of upstream . output w.r.t. the input vector.
Vector grad_wrt_input(const ParamBundle& params, const Tape& tape,
                      const Vector& upstream);

// Standalone feature normalizations (forward value + norm, and the exact
// backward map), shared by the MLP and unit-testable in isolation.
std::pair<Vector, double> feature_norm_forward(FeatureNorm kind,
                                               const Vector& psi);
Vector feature_norm_backward(FeatureNorm kind, const Vector& psi,
                             const Vector& normed, double norm_value,
                             const Vector& upstream);

}  // namespace avgrl::nn
