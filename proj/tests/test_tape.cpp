#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "kinemo/rng.hpp"
#include "kinemo/tape.hpp"

using namespace kinemo;
using ad::Tape;
using ad::Tensor;

namespace {

Tensor random_tensor(Rng& rng, int r, int c, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.v) v = rng.uniform(-scale, scale);
  return t;
}

/// Compares the tape gradient of `forward(params)` against central finite
/// differences on every parameter entry.
void check_gradients(std::vector<Tensor>& params,
                     const std::function<double(std::vector<Tensor>&,
                                                std::vector<Tensor>*)>& forward,
                     double h = 1e-5, double tol = 1e-6) {
  std::vector<Tensor> grads;
  for (const auto& p : params) grads.emplace_back(p.rows, p.cols);
  const double base = forward(params, &grads);
  CHECK(std::isfinite(base));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (int i = 0; i < params[pi].size(); ++i) {
      const double keep = params[pi].v[i];
      params[pi].v[i] = keep + h;
      const double up = forward(params, nullptr);
      params[pi].v[i] = keep - h;
      const double dn = forward(params, nullptr);
      params[pi].v[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const double an = grads[pi].v[i];
      const double scale = std::max({1.0, std::fabs(fd), std::fabs(an)});
      CHECK(std::fabs(fd - an) <= tol * scale);
    }
  }
}

}  // namespace

TEST_CASE("composite network gradient matches finite differences") {
  Rng rng(101);
  // a miniature of the real use: points -> mlp -> pool -> concat -> heads
  const int n_pts = 7, in = 3, h1 = 5, f = 4;
  std::vector<Tensor> params = {
      random_tensor(rng, h1, in),  // W1
      random_tensor(rng, 1, h1),   // b1
      random_tensor(rng, f, h1),   // W2
      random_tensor(rng, 1, f),    // b2
      random_tensor(rng, 1, 2 * f + 1),  // head W (1 row)
  };
  const Tensor pts = random_tensor(rng, n_pts, in);

  auto forward = [&](std::vector<Tensor>& p, std::vector<Tensor>* grads) {
    Tape tape(grads != nullptr);
    auto P = [&](int i) {
      return tape.param(p[i], grads ? &(*grads)[i] : nullptr);
    };
    const auto X = tape.constant(pts);
    const auto H1 = tape.tanh_(tape.matmul_rows(X, P(0), P(1)));
    const auto H2 = tape.matmul_rows(H1, P(2), P(3));
    const auto pooled = tape.colmax(H2);
    const auto meaned = tape.mean_rows(H2);
    const auto one = tape.constant(Tensor::row({0.5}));
    const auto cat = tape.concat({pooled, meaned, one});
    const auto z = tape.matmul_rows(cat, P(4), -1);
    const auto loss = tape.bce_with_logits(z, 1.0);
    const double out = tape.value(loss).v[0];
    if (grads) tape.backward(loss);
    return out;
  };
  check_gradients(params, forward);
}

TEST_CASE("softmax cross entropy gradient") {
  Rng rng(7);
  std::vector<Tensor> params = {random_tensor(rng, 1, 10, 2.0)};
  auto forward = [&](std::vector<Tensor>& p, std::vector<Tensor>* grads) {
    Tape tape(grads != nullptr);
    const auto logits = tape.param(p[0], grads ? &(*grads)[0] : nullptr);
    const auto probs = tape.softmax(logits);
    const auto loss = tape.pick_neglog(probs, 3);
    if (grads) tape.backward(loss);
    return tape.value(loss).v[0];
  };
  check_gradients(params, forward);
}

TEST_CASE("l2_normalize and direction loss gradient") {
  Rng rng(9);
  std::vector<Tensor> params = {random_tensor(rng, 1, 3)};
  const std::vector<double> target{0.0, 0.6, 0.8};
  auto forward = [&](std::vector<Tensor>& p, std::vector<Tensor>* grads) {
    Tape tape(grads != nullptr);
    const auto v = tape.param(p[0], grads ? &(*grads)[0] : nullptr);
    const auto unit = tape.l2_normalize(v, 1e-8);
    const auto loss = tape.sq_norm_diff(unit, target);
    if (grads) tape.backward(loss);
    return tape.value(loss).v[0];
  };
  check_gradients(params, forward);
}

TEST_CASE("line distance gradient") {
  Rng rng(13);
  std::vector<Tensor> params = {random_tensor(rng, 1, 3)};
  const Vec3 p_hat{0.2, -0.1, 0.4};
  const Vec3 d_hat = Vec3{0.3, 0.9, -0.2}.normalized();
  auto forward = [&](std::vector<Tensor>& p, std::vector<Tensor>* grads) {
    Tape tape(grads != nullptr);
    const auto v = tape.param(p[0], grads ? &(*grads)[0] : nullptr);
    const auto loss = tape.line_distance(v, p_hat, d_hat);
    if (grads) tape.backward(loss);
    return tape.value(loss).v[0];
  };
  check_gradients(params, forward);
}

TEST_CASE("weighted sums, scaling, means") {
  Rng rng(15);
  std::vector<Tensor> params = {random_tensor(rng, 1, 4), random_tensor(rng, 1, 4)};
  auto forward = [&](std::vector<Tensor>& p, std::vector<Tensor>* grads) {
    Tape tape(grads != nullptr);
    const auto a = tape.param(p[0], grads ? &(*grads)[0] : nullptr);
    const auto b = tape.param(p[1], grads ? &(*grads)[1] : nullptr);
    const auto m = tape.mean_of({a, b, tape.scale(a, -0.3)});
    const auto s = tape.add(m, tape.scale(b, 0.25));
    const auto sig = tape.sigmoid_(s);
    const auto l1 = tape.sq_norm_diff(sig, {0.3, 0.4, 0.5, 0.6});
    const auto l2 = tape.norm_diff(a, {0, 0, 0, 0}, 1e-8);
    const auto loss = tape.add_weighted({l1, l2}, {1.0, 0.7});
    if (grads) tape.backward(loss);
    return tape.value(loss).v[0];
  };
  check_gradients(params, forward);
}

TEST_CASE("constants receive no gradient and no-grad tapes skip backward") {
  Tape tape(false);
  const auto c = tape.constant(Tensor::row({1, 2, 3}));
  const auto y = tape.tanh_(c);
  CHECK(tape.value(y).v[0] == doctest::Approx(std::tanh(1.0)));
  CHECK_THROWS_AS(tape.backward(y), std::logic_error);
}

TEST_CASE("gradient of max pooling routes to the argmax row only") {
  Tensor x(3, 2);
  x.v = {1.0, 9.0, 5.0, 2.0, 3.0, 4.0};
  Tensor grad(3, 2);
  Tape tape;
  const auto X = tape.param(x, &grad);
  const auto pooled = tape.colmax(X);
  const auto loss = tape.sq_norm_diff(pooled, {0.0, 0.0});
  tape.backward(loss);
  // max of col0 is 5 (row 1), of col1 is 9 (row 0)
  CHECK(grad.v[0] == 0.0);
  CHECK(grad.v[1] == doctest::Approx(2.0 * 9.0));
  CHECK(grad.v[2] == doctest::Approx(2.0 * 5.0));
  CHECK(grad.v[3] == 0.0);
  CHECK(grad.v[4] == 0.0);
  CHECK(grad.v[5] == 0.0);
}
