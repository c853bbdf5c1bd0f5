#pragma once

#include <string>
#include <vector>

#include "arm3d/core.hpp"
#include "arm3d/nn/param_store.hpp"

namespace arm3d {
class Rng;
}

namespace arm3d::nn {

enum class LayerKind { linear, batchnorm, relu, tanh, softmax_rows };

/// One stage of a sequential MLP. Linear and batchnorm layers own
/// parameters under `name` ("<name>.weight", "<name>.bias", "<name>.gamma",
/// ...); the activations are parameter-free.
///
/// Linear weights are stored out x in so that y = x W^T + b acts row-wise,
/// i.e. a pointwise 1x1 convolution over proposals.
struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  Index in_width = 0;
  Index out_width = 0;
  bool has_bias = false;
  std::string name;

  static LayerSpec linear(std::string name, Index in, Index out, bool bias = true);
  static LayerSpec batchnorm(std::string name, Index width);
  static LayerSpec relu(Index width);
  static LayerSpec tanh(Index width);
  static LayerSpec softmax(Index width);
};

using MlpSpec = std::vector<LayerSpec>;

inline constexpr Scalar kBatchNormEpsilon = 1e-5;
inline constexpr Scalar kBatchNormMomentum = 0.9;

/// Throws DimensionError when widths do not chain or an activation changes width.
void validate_spec(const MlpSpec& spec);

struct TapeEntry {
  LayerSpec layer;
  Matrix input;
  Matrix output;
  // batchnorm only
  Matrix normalized;
  RowVector inv_std;
  bool batch_statistics = false;
};

/// Record of executed layers, consumed in reverse by backward().
class Tape {
 public:
  void push(TapeEntry entry) { entries_.push_back(std::move(entry)); }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }
  const std::vector<TapeEntry>& entries() const { return entries_; }

 private:
  std::vector<TapeEntry> entries_;
};

/// Runs `spec` over the rows of `input`. In train mode batchnorm uses batch
/// statistics (rows are the batch axis) and updates running statistics; in
/// eval mode it uses the running statistics. When `tape` is non-null every
/// layer application is appended to it.
Matrix mlp_forward(ParamStore& params, const MlpSpec& spec, const Matrix& input, Mode mode,
                   Tape* tape = nullptr);

/// Eval-mode forward over immutable parameters.
Matrix mlp_forward(const ParamStore& params, const MlpSpec& spec, const Matrix& input);

/// Reverse pass over `tape`. Parameter gradients are accumulated (added), so
/// several tapes that share parameters can be replayed into one store.
/// Returns the gradient with respect to the input of the first recorded layer.
/// The tape is left empty.
Matrix backward(Tape& tape, const Matrix& output_grad, ParamStore& params);

/// Registers the parameters and buffers for every layer of `spec`.
/// Linear layers feeding a ReLU (directly or through a batchnorm) get
/// Kaiming-uniform weights, the rest Xavier-uniform; biases start at zero.
void init_mlp(ParamStore& params, const MlpSpec& spec, Rng& rng);

}  // namespace arm3d::nn
