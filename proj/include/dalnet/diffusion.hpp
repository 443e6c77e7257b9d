#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <span>
#include <vector>

#include "dalnet/data.hpp"
#include "dalnet/optim.hpp"
#include "dalnet/rng.hpp"
#include "dalnet/tensor.hpp"

namespace dalnet {

/// Quadratic variance schedule and the derived coefficient tables. All
/// accessors take the 1-based step t in [1, T]; alpha(0) is defined as 1.
class NoiseSchedule {
 public:
  static NoiseSchedule build(int steps, double beta_start, double beta_end);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta_start() const { return beta_.front(); }
  double beta_end() const { return beta_.back(); }

  double beta(int t) const { return beta_[index(t)]; }
  // Cumulative product of (1 - beta_n) for n <= t.
  double alpha(int t) const { return t == 0 ? 1.0 : alpha_[index(t)]; }
  // Posterior variance (1 - alpha_{t-1}) / (1 - alpha_t) * beta_t; zero at t = 1.
  double beta_tilde(int t) const { return beta_tilde_[index(t)]; }
  double sqrt_alpha(int t) const { return sqrt_alpha_[index(t)]; }
  double sqrt_one_minus_alpha(int t) const { return sqrt_one_minus_alpha_[index(t)]; }

  std::span<const double> betas() const { return beta_; }
  std::span<const double> alphas() const { return alpha_; }
  std::span<const double> beta_tildes() const { return beta_tilde_; }

 private:
  std::size_t index(int t) const;

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> beta_tilde_;
  std::vector<double> sqrt_alpha_;
  std::vector<double> sqrt_one_minus_alpha_;
};

// sqrt(alpha_t) x0 + sqrt(1 - alpha_t) eps, elementwise, any shape.
Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& schedule);

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // dropout draws; required when training
};

/// A noise-prediction network eps_theta(x_t, c, t).
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  // xt, c: [B, N]; steps: B entries in [1, T]. Returns predicted noise [B, N].
  virtual Tensor predict_noise(const Tensor& xt, const Tensor& c, std::span<const int> steps,
                               const ForwardContext& ctx) const = 0;
  virtual std::size_t sequence_length() const = 0;
};

class TrainableDenoiser : public NoisePredictor {
 public:
  virtual std::vector<Tensor> parameters() const = 0;
};

struct DiffusionBatch {
  Tensor x0;               // [B, N]
  Tensor c;                // [B, N]
  std::vector<int> steps;  // B entries, uniform in [1, T]
  Tensor eps;              // [B, N]
  Tensor xt;               // [B, N]
};

// Draws t and eps for each selected sample (t first, then N noise values).
DiffusionBatch make_diffusion_batch(std::span<const DaySample> samples, std::span<const std::size_t> indices,
                                    const NoiseSchedule& schedule, Rng& rng);

// Mean squared error between eps and the prediction over all B*N entries.
Tensor training_loss(const NoisePredictor& model, const DiffusionBatch& batch, const ForwardContext& ctx);

struct TrainConfig {
  int epochs = 60;
  std::size_t batch_size = 64;
  AdamConfig adam{};
  // Called after each epoch with (1-based epoch, mean loss).
  std::function<void(int, double)> on_epoch;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

TrainReport train(TrainableDenoiser& model, std::span<const DaySample> dataset, const NoiseSchedule& schedule,
                  const TrainConfig& config, Rng& rng);

struct SamplerOptions {
  // Curves denoised together in one batched forward pass. Chunk membership is
  // fixed by curve index, so results do not depend on `threads`.
  std::size_t chunk = 25;
  std::size_t threads = 1;
  // When set, each step estimates x0 from the predicted noise, clamps it to
  // [lo, hi] and takes the posterior mean. Without clamping this equals the
  // plain update; with it, curves the network cannot track stay bounded.
  std::optional<std::pair<double, double>> clip_x0;
};

/// Ancestral sampling of `count` curves for one condition. Curve i draws all
/// its noise from the stream Rng::derive(seed, i). Returns [count, N].
Tensor sample(const NoisePredictor& model, std::span<const double> condition, const NoiseSchedule& schedule,
              std::uint64_t seed, std::size_t count, const SamplerOptions& options = {});

}  // namespace dalnet
