#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace urban2vec {

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;    // fan_out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
           a.weight == b.weight && a.bias == b.bias;
  }
};

// Feed-forward head over pre-extracted street-view features: ReLU between
// layers, linear output. With no hidden layers it is a single affine map.
struct EncoderParams {
  std::vector<DenseLayer> layers;

  Eigen::Index input_dim() const { return layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.back().weight.rows(); }
  bool all_finite() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct EncoderShape {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> hidden_dims;
  Eigen::Index output_dim = 0;
};

// Glorot-uniform weights, zero biases; bit-identical per seed.
EncoderParams init_encoder(const EncoderShape& shape, std::uint64_t seed);
// hidden == 0 gives the linear encoder.
EncoderParams init_encoder(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index output_dim,
                           std::uint64_t seed);

Eigen::VectorXd encode(const EncoderParams& params, const Eigen::Ref<const Eigen::VectorXd>& feature);

// Row i of the result encodes row i of features.
Eigen::MatrixXd encode_rows(const EncoderParams& params, const Eigen::MatrixXd& features);

struct EncoderGradients {
  std::vector<DenseLayer> layers;  // same shapes as the parameters
  Eigen::VectorXd input;

  static EncoderGradients zeros_like(const EncoderParams& params);
  void set_zero();
};

// Gradient of dot(encode(params, feature), grad_output) with respect to every
// parameter and the input. The ReLU subgradient at 0 is 0.
EncoderGradients encode_backward(const EncoderParams& params,
                                 const Eigen::Ref<const Eigen::VectorXd>& feature,
                                 const Eigen::Ref<const Eigen::VectorXd>& grad_output);

// Adds the parameter gradient into `into` (input gradient is not touched).
void accumulate_backward(const EncoderParams& params,
                         const Eigen::Ref<const Eigen::VectorXd>& feature,
                         const Eigen::Ref<const Eigen::VectorXd>& grad_output,
                         EncoderGradients& into);

// params -= step * grads
void apply_gradient(EncoderParams& params, const EncoderGradients& grads, double step);

}  // namespace urban2vec
