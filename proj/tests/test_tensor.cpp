#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dalnet/errors.hpp"
#include "dalnet/ops.hpp"
#include "dalnet/optim.hpp"
#include "dalnet/rng.hpp"
#include "gradcheck.hpp"

using namespace dalnet;
using gradcheck::random_tensor;

namespace {
void check_values(const Tensor& t, std::initializer_list<double> expected, double tol = 1e-12) {
  REQUIRE(t.numel() == expected.size());
  std::size_t i = 0;
  for (double e : expected) CHECK(t[i++] == doctest::Approx(e).epsilon(tol));
}
}  // namespace

TEST_CASE("tensor construction validates shape and data") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({0, 2}, {}), ShapeError);
  const auto m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.shape() == Shape{2, 3});
  CHECK(m.at(1, 2) == 6.0);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
}

TEST_CASE("matmul examples") {
  const auto id = Tensor::matrix({{1, 0}, {0, 1}});
  const auto b = Tensor::matrix({{3, 4}, {5, 6}});
  check_values(matmul(id, b), {3, 4, 5, 6});
  check_values(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})), {11});
  const Tensor a23({2, 3}, {1, 2, 3, 4, 5, 6});
  try {
    matmul(a23, a23);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum is ones times b transposed") {
  Rng rng(1);
  const auto a = random_tensor({2, 3}, rng);
  const auto b = random_tensor({3, 4}, rng, 1.0, false);
  backward(sum(matmul(a, b)));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < 4; ++j) row_sum += b.at(k, j);
      CHECK(a.grad()[i * 3 + k] == doctest::Approx(row_sum).epsilon(1e-12));
    }
}

TEST_CASE("matmul is associative on random triples") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_tensor({3, 4}, rng, 1.0, false);
    const auto b = random_tensor({4, 5}, rng, 1.0, false);
    const auto c = random_tensor({5, 2}, rng, 1.0, false);
    const auto left = matmul(matmul(a, b), c);
    const auto right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.numel(); ++i) {
      CHECK(gradcheck::rel_error(left[i], right[i], 1e-12) < 1e-9);
    }
  }
}

TEST_CASE("elementwise examples at zero") {
  const auto z = Tensor::scalar(0.0);
  CHECK(tanh(z).item() == 0.0);
  CHECK(silu(z).item() == 0.0);
  CHECK(sigmoid(z).item() == 0.5);
  CHECK(elementwise(Elementwise::exp, z).item() == 1.0);
  CHECK(elementwise(Elementwise::scale, Tensor::scalar(2.0), {}, 3.0).item() == 6.0);
  CHECK(sigmoid(Tensor::scalar(-800.0)).item() >= 0.0);
  CHECK(std::isfinite(sigmoid(Tensor::scalar(-800.0)).item()));
}

TEST_CASE("binary ops broadcast only scalars and trailing vectors") {
  const auto m = Tensor::matrix({{1, 2}, {3, 4}});
  check_values(add(m, Tensor::scalar(1.0)), {2, 3, 4, 5});
  check_values(sub(Tensor::scalar(1.0), m), {0, -1, -2, -3});
  check_values(add(m, Tensor::vector({10, 20})), {11, 22, 13, 24});
  check_values(mul(m, m), {1, 4, 9, 16});
  CHECK_THROWS_AS(add(m, Tensor::vector({1, 2, 3})), ShapeError);
  CHECK_THROWS_AS(mul(m, Tensor::matrix({{1, 2, 3}})), ShapeError);
}

TEST_CASE("softmax examples") {
  check_values(softmax(Tensor::vector({0, 0}), 0), {0.5, 0.5});
  check_values(softmax(Tensor::vector({0, std::log(3.0)}), 0), {0.25, 0.75});
  check_values(softmax(Tensor::vector({1000, 1000}), 0), {0.5, 0.5});
  CHECK_THROWS_AS(softmax(Tensor::vector({1, 2}), 1), ShapeError);
}

TEST_CASE("softmax rows sum to one and are nonnegative") {
  Rng rng(3);
  const auto x = random_tensor({5, 7}, rng, 20.0, false);
  for (std::size_t axis : {0u, 1u}) {
    const auto s = softmax(x, axis);
    const auto totals = sum(s, axis);
    for (double t : totals.data()) CHECK(std::abs(t - 1.0) < 1e-9);
    for (double v : s.data()) CHECK(v >= 0.0);
  }
}

TEST_CASE("reduction examples") {
  CHECK(mean(Tensor::vector({1, 2, 3})).item() == 2.0);
  CHECK(sum(Tensor::zeros({3, 2})).item() == 0.0);
  check_values(mean(Tensor::matrix({{1, 3}, {3, 5}}), 0), {2, 4});
  check_values(sum(Tensor::matrix({{1, 3}, {3, 5}}), 1), {4, 8});
}

TEST_CASE("backward examples") {
  const auto w = Tensor::vector({1, 2, 3}, true);
  backward(sum(w));
  check_values(Tensor::vector(std::vector<double>(w.grad().begin(), w.grad().end())), {1, 1, 1});

  const auto v = Tensor::vector({2}, true);
  backward(sum(square(v)));
  CHECK(v.grad()[0] == 4.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  const auto w = Tensor::vector({1, 2}, true);
  CHECK_THROWS_AS(backward(scale(w, 2.0)), ShapeError);
}

TEST_CASE("leaf gradients accumulate until reset") {
  auto w = Tensor::vector({1, 2}, true);
  backward(sum(w));
  backward(sum(w));
  CHECK(w.grad()[0] == 2.0);
  w.zero_grad();
  backward(sum(w));
  CHECK(w.grad()[0] == 1.0);
}

TEST_CASE("tape is topologically ordered and replays each op once") {
  const auto a = Tensor::vector({1, 2}, true);
  const auto b = tanh(a);
  const auto c = mul(b, b);  // b used twice
  const auto loss = sum(add(c, a));
  const auto tape = Tape::record(loss);
  const auto& entries = tape.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i]->producer) continue;
    for (const auto& in : entries[i]->producer->inputs) {
      const auto pos = std::find(entries.begin(), entries.end(), in) - entries.begin();
      CHECK(static_cast<std::size_t>(pos) < i);
    }
  }
  CHECK(tape.op_count() == 4);
  backward(loss, tape);
  // d/da [tanh(a)^2 + a] = 2 tanh(a) (1 - tanh^2(a)) + 1
  for (std::size_t i = 0; i < 2; ++i) {
    const double t = std::tanh(a[i]);
    CHECK(a.grad()[i] == doctest::Approx(2 * t * (1 - t * t) + 1).epsilon(1e-12));
  }
  CHECK_THROWS_AS(backward(sum(a), tape), ShapeError);
}

TEST_CASE("no-grad guard suppresses recording") {
  const auto a = Tensor::vector({1, 2}, true);
  NoGradGuard guard;
  const auto b = tanh(a);
  CHECK_FALSE(b.requires_grad());
  CHECK(b.is_leaf());
}

TEST_CASE("every op passes the finite-difference check") {
  Rng rng(4);
  const auto a = random_tensor({3, 4}, rng);
  const auto b = random_tensor({3, 4}, rng);
  const auto c = random_tensor({4, 2}, rng);
  const auto v = random_tensor({4}, rng);
  const auto s = Tensor::scalar(0.7, true);
  const auto r = random_tensor({3}, rng);
  constexpr double tol = 1e-4;
  using gradcheck::max_error_all;
  using gradcheck::project;

  CHECK(max_error_all([&] { return project(matmul(a, c)); }, {a, c}) < tol);
  CHECK(max_error_all([&] { return project(transpose(a)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(add(a, b)); }, {a, b}) < tol);
  CHECK(max_error_all([&] { return project(sub(a, v)); }, {a, v}) < tol);
  CHECK(max_error_all([&] { return project(mul(a, b)); }, {a, b}) < tol);
  CHECK(max_error_all([&] { return project(mul(a, s)); }, {a, s}) < tol);
  CHECK(max_error_all([&] { return project(mul(s, a)); }, {a, s}) < tol);
  CHECK(max_error_all([&] { return project(mul(a, v)); }, {a, v}) < tol);
  CHECK(max_error_all([&] { return project(scale(a, -2.5)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(tanh(a)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(sigmoid(a)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(silu(a)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(exp(a)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(square(a)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(softmax(a, 0)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(softmax(a, 1)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(softmax(v, 0)); }, {v}) < tol);
  CHECK(max_error_all([&] { return mean(a); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(sum(a, 0)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(mean(a, 1)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(reshape(a, {2, 6})); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(slice_rows(a, 1, 3)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(slice_cols(a, 1, 3)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(concat_rows({a, b})); }, {a, b}) < tol);
  CHECK(max_error_all([&] { return project(concat_cols({a, b})); }, {a, b}) < tol);
  CHECK(max_error_all([&] { return project(tile_rows(a, 3)); }, {a}) < tol);
  CHECK(max_error_all([&] { return project(scale_rows(a, r)); }, {a, r}) < tol);
  CHECK(max_error_all([&] { return project(mul_constant(a, std::vector<double>(12, 0.5))); }, {a}) < tol);
}

TEST_CASE("tile_rows layout is time-major") {
  const auto x = Tensor::matrix({{1, 2}, {3, 4}});
  check_values(tile_rows(x, 2), {1, 2, 3, 4, 1, 2, 3, 4});
}

TEST_CASE("adam examples") {
  AdamState state;
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> zero{0.0, 0.0};
  adam_step(p, zero, state, AdamConfig{});
  CHECK(p[0] == 1.0);
  CHECK(p[1] == -2.0);
  CHECK(state.step == 1);

  AdamState s2;
  std::vector<double> q{0.0};
  const std::vector<double> g{1.0};
  adam_step(q, g, s2, AdamConfig{0.001, 0.9, 0.999, 1e-8});
  // Bias-corrected first step: m_hat = 1, v_hat = 1, update = lr / (1 + eps).
  CHECK(q[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [] {
    Rng rng(5);
    const auto w = random_tensor({4}, rng);
    Adam opt({w}, AdamConfig{});
    for (int i = 0; i < 20; ++i) {
      opt.zero_grad();
      backward(sum(square(sub(w, Tensor::vector({1, 2, 3, 4})))));
      opt.step();
    }
    return std::vector<double>(w.data().begin(), w.data().end());
  };
  CHECK(run() == run());
}

TEST_CASE("rng streams are reproducible and well-formed") {
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
  CHECK(Rng::derive(1, 2) != Rng::derive(1, 3));
  CHECK(Rng::derive(1, 2) != Rng::derive(2, 2));
  Rng r(10);
  double m = 0.0, m2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    m += z;
    m2 += z * z;
  }
  CHECK(std::abs(m / n) < 0.02);
  CHECK(std::abs(m2 / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
}
