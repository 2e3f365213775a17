#include <doctest.h>

#include "oracles.hpp"
#include "urban2vec/encoder.hpp"
#include "urban2vec/rng.hpp"

using namespace urban2vec;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Flattens every weight and bias so the oracle can perturb them.
Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

EncoderParams unflatten(EncoderParams shape, const Eigen::VectorXd& flat) {
  Eigen::Index at = 0;
  for (auto& l : shape.layers) {
    std::copy(flat.data() + at, flat.data() + at + l.weight.size(), l.weight.data());
    at += l.weight.size();
    std::copy(flat.data() + at, flat.data() + at + l.bias.size(), l.bias.data());
    at += l.bias.size();
  }
  return shape;
}

// True when every hidden pre-activation is clear of the ReLU kink, so central
// differences see a smooth function.
bool away_from_kinks(const EncoderParams& params, const Eigen::VectorXd& x, double band) {
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    const Eigen::VectorXd pre = params.layers[l].weight * h + params.layers[l].bias;
    if (pre.cwiseAbs().minCoeff() < band) return false;
    h = pre.cwiseMax(0.0);
  }
  return true;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("Glorot-uniform init is bounded, seeded and zero-biased") {
  const auto a = init_encoder(EncoderShape{12, {8}, 5}, 3);
  const auto b = init_encoder(EncoderShape{12, {8}, 5}, 3);
  const auto c = init_encoder(EncoderShape{12, {8}, 5}, 4);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  REQUIRE(a.layers.size() == 2);
  CHECK(a.input_dim() == 12);
  CHECK(a.output_dim() == 5);
  CHECK(a.layers[0].weight.rows() == 8);
  CHECK(a.layers[0].weight.cols() == 12);
  CHECK(a.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 20.0));
  CHECK(a.layers[1].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 13.0));
  CHECK(a.layers[0].bias.isZero());
  CHECK(init_encoder(6, 0, 3, 1).layers.size() == 1);
  CHECK(a.all_finite());
}

TEST_CASE("linear encoder is an affine map") {
  auto p = init_encoder(4, 0, 3, 2);
  p.layers[0].bias << 1, 2, 3;
  const Eigen::Vector4d x(1, -2, 0.5, 3);
  const Eigen::VectorXd expected = p.layers[0].weight * x + p.layers[0].bias;
  CHECK((encode(p, x) - expected).norm() < 1e-12);
}

TEST_CASE("encode_rows matches encode") {
  Rng rng(8);
  const auto p = init_encoder(EncoderShape{6, {5, 4}, 3}, 9);
  Eigen::MatrixXd x(7, 6);
  for (Eigen::Index r = 0; r < 7; ++r) x.row(r) = random_vector(6, rng).transpose();
  const auto rows = encode_rows(p, x);
  for (Eigen::Index r = 0; r < 7; ++r) {
    CHECK((rows.row(r).transpose() - encode(p, x.row(r).transpose())).norm() < 1e-12);
  }
}

TEST_CASE("encode_backward matches central differences") {
  Rng rng(21);
  int checked = 0;
  for (std::uint64_t seed = 100; checked < 20; ++seed) {
    auto params = init_encoder(EncoderShape{7, {6, 5}, 4}, seed);
    for (auto& layer : params.layers) layer.bias = 0.1 * random_vector(layer.bias.size(), rng);
    const Eigen::VectorXd x = random_vector(7, rng);
    if (!away_from_kinks(params, x, 1e-3)) continue;
    ++checked;
    const Eigen::VectorXd g = random_vector(4, rng);
    const auto grads = encode_backward(params, x, g);

    const auto wrt_params = oracle::numeric_gradient(
        [&](const Eigen::VectorXd& flat) { return encode(unflatten(params, flat), x).dot(g); },
        flatten(params.layers));
    CHECK(oracle::relative_error(flatten(grads.layers), wrt_params) < 1e-4);

    const auto wrt_input = oracle::numeric_gradient(
        [&](const Eigen::VectorXd& v) { return encode(params, v).dot(g); }, x);
    CHECK(oracle::relative_error(grads.input, wrt_input) < 1e-4);
  }
}

TEST_CASE("accumulate_backward sums and apply_gradient steps") {
  Rng rng(2);
  auto params = init_encoder(EncoderShape{3, {4}, 2}, 5);
  const Eigen::VectorXd x1 = random_vector(3, rng), x2 = random_vector(3, rng);
  const Eigen::VectorXd g1 = random_vector(2, rng), g2 = random_vector(2, rng);
  auto acc = EncoderGradients::zeros_like(params);
  accumulate_backward(params, x1, g1, acc);
  accumulate_backward(params, x2, g2, acc);
  const Eigen::VectorXd expected =
      flatten(encode_backward(params, x1, g1).layers) + flatten(encode_backward(params, x2, g2).layers);
  CHECK((flatten(acc.layers) - expected).norm() < 1e-12);

  const Eigen::VectorXd before = flatten(params.layers);
  apply_gradient(params, acc, 0.1);
  CHECK((flatten(params.layers) - (before - 0.1 * expected)).norm() < 1e-12);

  acc.set_zero();
  CHECK(flatten(acc.layers).isZero());
}

}  // TEST_SUITE
