#include "arm3d/nn/mlp.hpp"

#include <cmath>

#include "arm3d/nn/softmax.hpp"
#include "arm3d/rng.hpp"

namespace arm3d::nn {

LayerSpec LayerSpec::linear(std::string name, Index in, Index out, bool bias) {
  return {LayerKind::linear, in, out, bias, std::move(name)};
}
LayerSpec LayerSpec::batchnorm(std::string name, Index width) {
  return {LayerKind::batchnorm, width, width, true, std::move(name)};
}
LayerSpec LayerSpec::relu(Index width) { return {LayerKind::relu, width, width, false, {}}; }
LayerSpec LayerSpec::tanh(Index width) { return {LayerKind::tanh, width, width, false, {}}; }
LayerSpec LayerSpec::softmax(Index width) {
  return {LayerKind::softmax_rows, width, width, false, {}};
}

void validate_spec(const MlpSpec& spec) {
  if (spec.empty()) throw DimensionError("empty MLP spec");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const LayerSpec& l = spec[i];
    if (l.in_width <= 0 || l.out_width <= 0) throw DimensionError("non-positive layer width");
    if (l.kind != LayerKind::linear && l.in_width != l.out_width) {
      throw DimensionError("activation/batchnorm layer must preserve width");
    }
    if (i > 0 && spec[i - 1].out_width != l.in_width) {
      throw DimensionError("layer " + std::to_string(i) + " input width " +
                           std::to_string(l.in_width) + " does not match previous output " +
                           std::to_string(spec[i - 1].out_width));
    }
  }
}

namespace {

Matrix linear_forward(const ParamStore& params, const LayerSpec& l, const Matrix& x) {
  const Matrix& w = params.at(l.name + ".weight").value;
  Matrix y(x.rows(), l.out_width);
  y.noalias() = x * w.transpose();
  if (l.has_bias) y.rowwise() += params.at(l.name + ".bias").value.row(0);
  return y;
}

Matrix forward_impl(const ParamStore& params, ParamStore* mutable_params, const MlpSpec& spec,
                    const Matrix& input, Mode mode, Tape* tape) {
  validate_spec(spec);
  if (input.cols() != spec.front().in_width) {
    throw DimensionError("mlp input has " + std::to_string(input.cols()) + " columns, expected " +
                         std::to_string(spec.front().in_width));
  }
  Matrix x = input;
  for (const LayerSpec& l : spec) {
    TapeEntry entry;
    if (tape) {
      entry.layer = l;
      entry.input = x;
    }
    Matrix y;
    switch (l.kind) {
      case LayerKind::linear:
        y = linear_forward(params, l, x);
        break;
      case LayerKind::relu:
        y = x.cwiseMax(0.0);
        break;
      case LayerKind::tanh:
        y = x.array().tanh().matrix();
        break;
      case LayerKind::softmax_rows:
        y = softmax_rows(x);
        break;
      case LayerKind::batchnorm: {
        const RowVector& gamma = params.at(l.name + ".gamma").value.row(0);
        const RowVector& beta = params.at(l.name + ".beta").value.row(0);
        Matrix normalized;
        RowVector inv_std;
        if (mode == Mode::train) {
          if (x.rows() < 2) {
            throw DegenerateBatchError("batchnorm '" + l.name + "' needs >= 2 rows in train mode");
          }
          const auto n = static_cast<Scalar>(x.rows());
          const RowVector mean = x.colwise().mean();
          const Matrix centered = x.rowwise() - mean;
          const RowVector var = centered.array().square().colwise().sum().matrix() / n;
          inv_std = (var.array() + kBatchNormEpsilon).rsqrt().matrix();
          normalized = centered.array().rowwise() * inv_std.array();
          if (mutable_params) {
            Matrix& rm = mutable_params->buffer(l.name + ".running_mean");
            Matrix& rv = mutable_params->buffer(l.name + ".running_var");
            const RowVector unbiased = var * (n / (n - 1.0));
            rm.row(0) = kBatchNormMomentum * rm.row(0) + (1.0 - kBatchNormMomentum) * mean;
            rv.row(0) = kBatchNormMomentum * rv.row(0) + (1.0 - kBatchNormMomentum) * unbiased;
          }
        } else {
          const RowVector& rm = params.buffer(l.name + ".running_mean").row(0);
          const RowVector& rv = params.buffer(l.name + ".running_var").row(0);
          inv_std = (rv.array() + kBatchNormEpsilon).rsqrt().matrix();
          normalized = (x.rowwise() - rm).array().rowwise() * inv_std.array();
        }
        y = (normalized.array().rowwise() * gamma.array()).matrix().rowwise() + beta;
        if (tape) {
          entry.batch_statistics = mode == Mode::train;
          entry.normalized = std::move(normalized);
          entry.inv_std = std::move(inv_std);
        }
        break;
      }
    }
    if (!all_finite(y)) throw DivergenceError("non-finite activation after layer '" + l.name + "'");
    if (tape) {
      entry.output = y;
      tape->push(std::move(entry));
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

Matrix mlp_forward(ParamStore& params, const MlpSpec& spec, const Matrix& input, Mode mode,
                   Tape* tape) {
  return forward_impl(params, mode == Mode::train ? &params : nullptr, spec, input, mode, tape);
}

Matrix mlp_forward(const ParamStore& params, const MlpSpec& spec, const Matrix& input) {
  return forward_impl(params, nullptr, spec, input, Mode::eval, nullptr);
}

Matrix backward(Tape& tape, const Matrix& output_grad, ParamStore& params) {
  if (tape.empty()) throw UsageError("backward called on an empty tape");
  const TapeEntry& last = tape.entries().back();
  require_shape(output_grad, last.output.rows(), last.output.cols(), "backward output_grad");

  Matrix grad = output_grad;
  const auto& entries = tape.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    const LayerSpec& l = it->layer;
    Matrix next;
    switch (l.kind) {
      case LayerKind::linear: {
        Parameter& w = params.at(l.name + ".weight");
        w.grad.noalias() += grad.transpose() * it->input;
        if (l.has_bias) params.at(l.name + ".bias").grad.row(0) += grad.colwise().sum();
        next.noalias() = grad * w.value;
        break;
      }
      case LayerKind::relu:
        next = (it->input.array() > 0.0).select(grad, 0.0);
        break;
      case LayerKind::tanh:
        next = grad.cwiseProduct((1.0 - it->output.array().square()).matrix());
        break;
      case LayerKind::softmax_rows:
        next = softmax_rows_backward(it->output, grad);
        break;
      case LayerKind::batchnorm: {
        Parameter& gamma = params.at(l.name + ".gamma");
        Parameter& beta = params.at(l.name + ".beta");
        gamma.grad.row(0) += grad.cwiseProduct(it->normalized).colwise().sum();
        beta.grad.row(0) += grad.colwise().sum();
        const Matrix dnorm = grad.array().rowwise() * gamma.value.row(0).array();
        if (!it->batch_statistics) {
          next = dnorm.array().rowwise() * it->inv_std.array();
          break;
        }
        const auto n = static_cast<Scalar>(grad.rows());
        const RowVector sum_d = dnorm.colwise().sum();
        const RowVector sum_dx = dnorm.cwiseProduct(it->normalized).colwise().sum();
        Matrix centered = (dnorm * n).rowwise() - sum_d;
        centered -= (it->normalized.array().rowwise() * sum_dx.array()).matrix();
        next = (centered.array().rowwise() * (it->inv_std.array() / n)).matrix();
        break;
      }
    }
    if (!all_finite(next)) throw DivergenceError("non-finite gradient at layer '" + l.name + "'");
    grad = std::move(next);
  }
  tape.clear();
  return grad;
}

void init_mlp(ParamStore& params, const MlpSpec& spec, Rng& rng) {
  validate_spec(spec);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const LayerSpec& l = spec[i];
    if (l.kind == LayerKind::linear) {
      bool feeds_relu = false;
      for (std::size_t k = i + 1; k < spec.size(); ++k) {
        if (spec[k].kind == LayerKind::batchnorm) continue;
        feeds_relu = spec[k].kind == LayerKind::relu;
        break;
      }
      const auto fan_in = static_cast<Scalar>(l.in_width);
      const auto fan_out = static_cast<Scalar>(l.out_width);
      const Scalar bound = feeds_relu ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
      Matrix w(l.out_width, l.in_width);
      for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
      }
      params.add(l.name + ".weight", std::move(w));
      if (l.has_bias) params.add(l.name + ".bias", Matrix::Zero(1, l.out_width));
    } else if (l.kind == LayerKind::batchnorm) {
      params.add(l.name + ".gamma", Matrix::Ones(1, l.in_width));
      params.add(l.name + ".beta", Matrix::Zero(1, l.in_width));
      params.add_buffer(l.name + ".running_mean", Matrix::Zero(1, l.in_width));
      params.add_buffer(l.name + ".running_var", Matrix::Ones(1, l.in_width));
    }
  }
}

}  // namespace arm3d::nn
