#include "urban2vec/encoder.hpp"

#include <cmath>
#include <string>

#include "urban2vec/error.hpp"
#include "urban2vec/rng.hpp"

namespace urban2vec {
namespace {

void check_input(const EncoderParams& params, Eigen::Index size) {
  require(!params.layers.empty(), ErrorKind::kInvalidInput, "encoder has no layers");
  if (size != params.input_dim()) {
    fail(ErrorKind::kInvalidInput, "encoder input length " + std::to_string(size) +
                                       " != " + std::to_string(params.input_dim()));
  }
}

// Pre-activations of every layer; activations are derived on demand.
std::vector<Eigen::VectorXd> forward_trace(const EncoderParams& params,
                                           const Eigen::Ref<const Eigen::VectorXd>& feature) {
  std::vector<Eigen::VectorXd> pre;
  pre.reserve(params.layers.size());
  Eigen::VectorXd activation = feature;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    pre.push_back(layer.weight * activation + layer.bias);
    if (l + 1 < params.layers.size()) activation = pre.back().cwiseMax(0.0);
  }
  return pre;
}

// Walks the trace backwards; returns the gradient with respect to the input.
template <class OnLayer>
Eigen::VectorXd backward(const EncoderParams& params,
                         const Eigen::Ref<const Eigen::VectorXd>& feature,
                         const Eigen::Ref<const Eigen::VectorXd>& grad_output, OnLayer on_layer) {
  check_input(params, feature.size());
  require(grad_output.size() == params.output_dim(), ErrorKind::kInvalidInput,
          "encode_backward: grad_output length mismatch");
  const auto pre = forward_trace(params, feature);
  Eigen::VectorXd delta = grad_output;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    if (l + 1 < params.layers.size()) {
      delta = delta.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
    }
    if (l == 0) {
      on_layer(l, delta, feature);
    } else {
      const Eigen::VectorXd below = pre[l - 1].cwiseMax(0.0);
      on_layer(l, delta, below);
    }
    delta = params.layers[l].weight.transpose() * delta;
  }
  return delta;
}

}  // namespace

bool EncoderParams::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

EncoderParams init_encoder(const EncoderShape& shape, std::uint64_t seed) {
  require(shape.input_dim >= 1 && shape.output_dim >= 1, ErrorKind::kInvalidInput,
          "init_encoder: dimensions must be >= 1");
  std::vector<Eigen::Index> dims{shape.input_dim};
  for (auto h : shape.hidden_dims) {
    require(h >= 1, ErrorKind::kInvalidInput, "init_encoder: hidden width must be >= 1");
    dims.push_back(h);
  }
  dims.push_back(shape.output_dim);

  Rng rng(seed);
  EncoderParams params;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Eigen::Index fan_in = dims[l];
    const Eigen::Index fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

EncoderParams init_encoder(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index output_dim,
                           std::uint64_t seed) {
  EncoderShape shape{input_dim, {}, output_dim};
  if (hidden > 0) shape.hidden_dims.push_back(hidden);
  return init_encoder(shape, seed);
}

Eigen::VectorXd encode(const EncoderParams& params, const Eigen::Ref<const Eigen::VectorXd>& feature) {
  check_input(params, feature.size());
  Eigen::VectorXd activation = feature;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    activation = layer.weight * activation + layer.bias;
    if (l + 1 < params.layers.size()) activation = activation.cwiseMax(0.0);
  }
  return activation;
}

Eigen::MatrixXd encode_rows(const EncoderParams& params, const Eigen::MatrixXd& features) {
  check_input(params, features.cols());
  Eigen::MatrixXd out(features.rows(), params.output_dim());
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    out.row(r) = encode(params, features.row(r).transpose()).transpose();
  }
  return out;
}

EncoderGradients EncoderGradients::zeros_like(const EncoderParams& params) {
  EncoderGradients g;
  for (const auto& layer : params.layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  }
  g.input = Eigen::VectorXd::Zero(params.input_dim());
  return g;
}

void EncoderGradients::set_zero() {
  for (auto& layer : layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  input.setZero();
}

EncoderGradients encode_backward(const EncoderParams& params,
                                 const Eigen::Ref<const Eigen::VectorXd>& feature,
                                 const Eigen::Ref<const Eigen::VectorXd>& grad_output) {
  auto grads = EncoderGradients::zeros_like(params);
  grads.input = backward(params, feature, grad_output,
                         [&](std::size_t l, const Eigen::VectorXd& delta, const auto& below) {
                           grads.layers[l].weight = delta * below.transpose();
                           grads.layers[l].bias = delta;
                         });
  return grads;
}

void accumulate_backward(const EncoderParams& params,
                         const Eigen::Ref<const Eigen::VectorXd>& feature,
                         const Eigen::Ref<const Eigen::VectorXd>& grad_output,
                         EncoderGradients& into) {
  backward(params, feature, grad_output,
           [&](std::size_t l, const Eigen::VectorXd& delta, const auto& below) {
             into.layers[l].weight.noalias() += delta * below.transpose();
             into.layers[l].bias += delta;
           });
}

void apply_gradient(EncoderParams& params, const EncoderGradients& grads, double step) {
  require(grads.layers.size() == params.layers.size(), ErrorKind::kInvalidInput,
          "apply_gradient: layer count mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    params.layers[l].weight -= step * grads.layers[l].weight;
    params.layers[l].bias -= step * grads.layers[l].bias;
  }
}

}  // namespace urban2vec
