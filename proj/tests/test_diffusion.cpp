#include <doctest.h>

#include <cmath>

#include "dalnet/diffusion.hpp"
#include "dalnet/errors.hpp"
#include "dalnet/layers.hpp"
#include "dalnet/ops.hpp"
#include "gradcheck.hpp"

using namespace dalnet;

namespace {

// Optimal denoiser when the data distribution is a single point x0*.
class PointDenoiser : public NoisePredictor {
 public:
  PointDenoiser(std::vector<double> x0, const NoiseSchedule& s) : x0_(std::move(x0)), s_(s) {}
  Tensor predict_noise(const Tensor& xt, const Tensor&, std::span<const int> steps, const ForwardContext&) const override {
    std::vector<double> out(xt.numel());
    const auto n = x0_.size();
    for (std::size_t b = 0; b < xt.dim(0); ++b) {
      const int t = steps[b];
      for (std::size_t i = 0; i < n; ++i) {
        out[b * n + i] = (xt.at(b, i) - s_.sqrt_alpha(t) * x0_[i]) / s_.sqrt_one_minus_alpha(t);
      }
    }
    return Tensor(xt.shape(), out);
  }
  std::size_t sequence_length() const override { return x0_.size(); }

 private:
  std::vector<double> x0_;
  const NoiseSchedule& s_;
};

// Returns a fixed tensor regardless of input.
class FixedPredictor : public NoisePredictor {
 public:
  explicit FixedPredictor(Tensor out) : out_(std::move(out)) {}
  Tensor predict_noise(const Tensor&, const Tensor&, std::span<const int>, const ForwardContext&) const override {
    return out_;
  }
  std::size_t sequence_length() const override { return out_.dim(1); }

 private:
  Tensor out_;
};

// eps_hat = x_t W + c V + b: small enough to train in milliseconds.
class LinearDenoiser : public TrainableDenoiser {
 public:
  LinearDenoiser(std::size_t n, Rng& rng)
      : w_(init_uniform({n, n}, n, rng)), v_(init_uniform({n, n}, n, rng)), b_(Tensor::zeros({n}, true)) {}
  Tensor predict_noise(const Tensor& xt, const Tensor& c, std::span<const int>, const ForwardContext&) const override {
    return add(add(matmul(xt, w_), matmul(c, v_)), b_);
  }
  std::size_t sequence_length() const override { return w_.dim(0); }
  std::vector<Tensor> parameters() const override { return {w_, v_, b_}; }

 private:
  Tensor w_, v_, b_;
};

std::vector<DaySample> constant_days(std::size_t count, std::size_t n, double value) {
  std::vector<DaySample> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({std::vector<double>(n, value), std::vector<double>(n, value),
                   Date{std::chrono::days{static_cast<int>(i)}}});
  }
  return out;
}

}  // namespace

TEST_CASE("schedule examples") {
  const auto s = NoiseSchedule::build(1000, 1e-4, 0.5);
  CHECK(s.beta(1) == 1e-4);
  CHECK(s.beta(1000) == 0.5);
  const auto s3 = NoiseSchedule::build(3, 1e-4, 0.5);
  const double mid = (0.01 + std::sqrt(0.5)) / 2.0;
  CHECK(s3.beta(2) == doctest::Approx(mid * mid).epsilon(1e-14));
  CHECK(s3.beta(2) == doctest::Approx(0.128560).epsilon(1e-5));
  CHECK_THROWS_AS(NoiseSchedule::build(10, 0.5, 1e-4), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule::build(1, 1e-4, 0.5), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule::build(10, 1e-4, 1.0), ConfigError);
  CHECK_THROWS_AS(s.beta(0), ShapeError);
  CHECK_THROWS_AS(s.beta(1001), ShapeError);
}

TEST_CASE("schedule tables are monotone and consistent") {
  for (int steps : {2, 3, 50, 200, 1000}) {
    const auto s = NoiseSchedule::build(steps, 1e-4, 0.5);
    double prod = 1.0;
    for (int t = 1; t <= steps; ++t) {
      CHECK(s.beta(t) > 0.0);
      CHECK(s.beta(t) < 1.0);
      if (t > 1) {
        CHECK(s.beta(t) > s.beta(t - 1));
        CHECK(s.alpha(t) < s.alpha(t - 1));
      }
      prod *= 1.0 - s.beta(t);
      CHECK(s.alpha(t) == doctest::Approx(prod).epsilon(1e-12));
      const double tilde = (1.0 - s.alpha(t - 1)) / (1.0 - s.alpha(t)) * s.beta(t);
      CHECK(s.beta_tilde(t) == doctest::Approx(tilde).epsilon(1e-12));
    }
    CHECK(s.beta_tilde(1) == 0.0);
    CHECK(s.alpha(0) == 1.0);
  }
  CHECK(NoiseSchedule::build(1000, 1e-4, 0.5).alpha(1000) < 1e-10);
}

TEST_CASE("forward diffusion examples") {
  const auto s = NoiseSchedule::build(100, 1e-4, 0.5);
  const auto x0 = Tensor::vector({0.2, -0.4, 0.9});
  const auto eps = Tensor::vector({1.0, -2.0, 0.5});
  const auto clean = forward_diffuse(x0, 30, Tensor::zeros({3}), s);
  const auto noise = forward_diffuse(Tensor::zeros({3}), 30, eps, s);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(clean[i] == doctest::Approx(std::sqrt(s.alpha(30)) * x0[i]).epsilon(1e-14));
    CHECK(noise[i] == doctest::Approx(std::sqrt(1.0 - s.alpha(30)) * eps[i]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(forward_diffuse(x0, 0, eps, s), ShapeError);
  CHECK_THROWS_AS(forward_diffuse(x0, 101, eps, s), ShapeError);
}

TEST_CASE("forward diffusion variance matches 1 - alpha") {
  const auto s = NoiseSchedule::build(100, 1e-4, 0.5);
  Rng rng(1);
  const int t = 20;
  const std::size_t n = 100000;
  std::vector<double> e(n);
  for (auto& v : e) v = rng.normal();
  const auto xt = forward_diffuse(Tensor::zeros({n}), t, Tensor({n}, e), s);
  double m = 0.0, m2 = 0.0;
  for (double v : xt.data()) {
    m += v;
    m2 += v * v;
  }
  const double var = m2 / n - (m / n) * (m / n);
  CHECK(std::abs(var / (1.0 - s.alpha(t)) - 1.0) < 0.02);
}

TEST_CASE("stepwise transitions reproduce the closed-form marginal") {
  const int steps = 200;
  const auto s = NoiseSchedule::build(steps, 1e-4, 0.5);
  const double x0 = 0.8;
  const std::size_t draws = 40000;
  for (int target : {1, steps / 2, steps}) {
    Rng rng(static_cast<std::uint64_t>(target));
    double m = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
      double x = x0;
      for (int t = 1; t <= target; ++t) x = std::sqrt(1.0 - s.beta(t)) * x + std::sqrt(s.beta(t)) * rng.normal();
      m += x;
      m2 += x * x;
    }
    m /= draws;
    const double var = m2 / draws - m * m;
    const double want_mean = std::sqrt(s.alpha(target)) * x0;
    const double want_var = 1.0 - s.alpha(target);
    // Standard error of the mean is sqrt(var / draws) <= 0.005.
    CHECK(std::abs(m - want_mean) < 0.02);
    CHECK(std::abs(var / want_var - 1.0) < 0.05);
  }
}

TEST_CASE("training loss examples") {
  Rng rng(2);
  const auto s = NoiseSchedule::build(50, 1e-4, 0.5);
  const std::size_t n = 4;
  const auto days = constant_days(512, n, 0.5);
  std::vector<std::size_t> idx(days.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = make_diffusion_batch(days, idx, s, rng);
  CHECK(batch.xt.shape() == Shape{512, n});
  for (int t : batch.steps) CHECK((t >= 1 && t <= 50));

  CHECK(training_loss(FixedPredictor(batch.eps), batch, {}).item() == 0.0);
  const double zero_loss = training_loss(FixedPredictor(Tensor::zeros({512, n})), batch, {}).item();
  CHECK(zero_loss == doctest::Approx(1.0).epsilon(0.05));
  CHECK(zero_loss >= 0.0);
}

TEST_CASE("training with lr = 0 leaves parameters unchanged") {
  Rng init(3);
  LinearDenoiser model(4, init);
  std::vector<std::vector<double>> before;
  for (const auto& p : model.parameters()) before.emplace_back(p.data().begin(), p.data().end());
  const auto s = NoiseSchedule::build(20, 1e-4, 0.5);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.adam.lr = 0.0;
  Rng rng(4);
  const auto report = train(model, constant_days(1, 4, 0.3), s, cfg, rng);
  CHECK(report.epoch_loss.size() == 1);
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(std::vector<double>(params[i].data().begin(), params[i].data().end()) == before[i]);
  }
}

TEST_CASE("training reduces loss on a repeated constant curve") {
  Rng init(5);
  LinearDenoiser model(4, init);
  const auto s = NoiseSchedule::build(20, 1e-4, 0.5);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.adam.lr = 1e-2;
  int calls = 0;
  cfg.on_epoch = [&](int, double) { ++calls; };
  Rng rng(6);
  const auto report = train(model, constant_days(64, 4, 0.7), s, cfg, rng);
  CHECK(report.epoch_loss.size() == 40);
  CHECK(calls == 40);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
}

TEST_CASE("training rejects empty data and reports divergence") {
  Rng init(7);
  LinearDenoiser model(4, init);
  const auto s = NoiseSchedule::build(20, 1e-4, 0.5);
  Rng rng(8);
  CHECK_THROWS_AS(train(model, std::vector<DaySample>{}, s, TrainConfig{}, rng), DataError);
  TrainConfig wild;
  wild.epochs = 200;
  wild.batch_size = 1;
  wild.adam.lr = 1e300;
  auto days = constant_days(4, 4, 1e200);
  CHECK_THROWS_AS(train(model, days, s, wild, rng), NumericError);
}

TEST_CASE("sampler shape, determinism and thread independence") {
  const auto s = NoiseSchedule::build(30, 1e-4, 0.5);
  const std::vector<double> x0{0.1, 0.5, 0.9};
  const PointDenoiser model(x0, s);
  const auto a = sample(model, x0, s, 11, 3);
  CHECK(a.shape() == Shape{3, 3});
  const auto b = sample(model, x0, s, 11, 3);
  CHECK(std::vector<double>(a.data().begin(), a.data().end()) == std::vector<double>(b.data().begin(), b.data().end()));

  SamplerOptions one{7, 1}, four{7, 4};
  const auto c = sample(model, x0, s, 12, 30, one);
  const auto d = sample(model, x0, s, 12, 30, four);
  CHECK(std::vector<double>(c.data().begin(), c.data().end()) == std::vector<double>(d.data().begin(), d.data().end()));
  // Curve i depends only on (seed, i), not on how many curves were drawn.
  const auto e = sample(model, x0, s, 12, 5, one);
  for (std::size_t i = 0; i < e.numel(); ++i) CHECK(e[i] == c[i]);
  CHECK_THROWS_AS(sample(model, std::vector<double>{0.0, 1.0}, s, 1, 2), ShapeError);
}

TEST_CASE("sampler with the analytic denoiser concentrates on x0") {
  const auto s = NoiseSchedule::build(200, 1e-4, 0.5);
  std::vector<double> x0(24);
  for (std::size_t i = 0; i < 24; ++i) x0[i] = 0.5 + 0.4 * std::sin(0.26 * static_cast<double>(i));
  const PointDenoiser model(x0, s);
  const auto curves = sample(model, x0, s, 21, 200);
  for (std::size_t i = 0; i < 24; ++i) {
    double m = 0.0;
    for (std::size_t k = 0; k < 200; ++k) m += curves.at(k, i);
    CHECK(std::abs(m / 200.0 - x0[i]) < 0.05);
  }
}

TEST_CASE("sampler reports the failing step on non-finite state") {
  const auto s = NoiseSchedule::build(10, 1e-4, 0.5);
  const FixedPredictor bad(Tensor::full({2, 3}, std::numeric_limits<double>::infinity()));
  try {
    sample(bad, std::vector<double>{0, 0, 0}, s, 1, 2, SamplerOptions{2, 1});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("t=10") != std::string::npos);
  }
}

TEST_CASE("clamped x0 sampling matches the plain update when the clamp never binds") {
  const auto s = NoiseSchedule::build(60, 1e-4, 0.5);
  const std::vector<double> x0{0.2, 0.7, 0.4};
  const PointDenoiser model(x0, s);
  SamplerOptions plain;
  SamplerOptions loose;
  loose.clip_x0 = std::pair{-1e300, 1e300};
  const auto a = sample(model, x0, s, 4, 8, plain);
  const auto b = sample(model, x0, s, 4, 8, loose);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);

  // The analytic denoiser's x0 estimate is exact, so a clamp around x0* changes nothing either.
  SamplerOptions tight;
  tight.clip_x0 = std::pair{0.0, 1.0};
  const auto c = sample(model, x0, s, 4, 8, tight);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - c[i]) < 1e-9);
}

TEST_CASE("clamped x0 sampling keeps a poor denoiser bounded") {
  const auto s = NoiseSchedule::build(200, 1e-4, 0.5);
  // Predicting zero noise makes the plain update grow like 1/sqrt(alpha_T).
  const FixedPredictor zero(Tensor::zeros({4, 3}));
  SamplerOptions opts{4, 1, std::pair{-1.0, 2.0}};
  const auto curves = sample(zero, std::vector<double>{0, 0, 0}, s, 9, 4, opts);
  for (double v : curves.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 2.0);
  }
}
