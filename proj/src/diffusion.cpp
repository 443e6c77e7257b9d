#include "dalnet/diffusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "dalnet/errors.hpp"
#include "dalnet/ops.hpp"

namespace dalnet {

NoiseSchedule NoiseSchedule::build(int steps, double beta_start, double beta_end) {
  if (steps < 2) throw ConfigError("model.steps must be >= 2, got " + std::to_string(steps));
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw ConfigError("noise schedule needs 0 < beta_start < beta_end < 1");
  }
  NoiseSchedule s;
  const auto n = static_cast<std::size_t>(steps);
  s.beta_.resize(n);
  s.alpha_.resize(n);
  s.beta_tilde_.resize(n);
  s.sqrt_alpha_.resize(n);
  s.sqrt_one_minus_alpha_.resize(n);
  const double lo = std::sqrt(beta_start), hi = std::sqrt(beta_end);
  const double span = static_cast<double>(steps - 1);
  double running = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    double beta;
    if (t == 1) {
      beta = beta_start;
    } else if (t == steps) {
      beta = beta_end;
    } else {
      const double root = static_cast<double>(steps - t) / span * lo + static_cast<double>(t - 1) / span * hi;
      beta = root * root;
    }
    const double prev = running;
    running *= 1.0 - beta;
    s.beta_[i] = beta;
    s.alpha_[i] = running;
    s.beta_tilde_[i] = (1.0 - prev) / (1.0 - running) * beta;
    s.sqrt_alpha_[i] = std::sqrt(running);
    s.sqrt_one_minus_alpha_[i] = std::sqrt(1.0 - running);
  }
  return s;
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps()) {
    throw ShapeError("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
  return static_cast<std::size_t>(t - 1);
}

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& schedule) {
  if (x0.shape() != eps.shape()) {
    throw ShapeError("forward_diffuse: x0 " + shape_str(x0.shape()) + " and eps " + shape_str(eps.shape()) + " differ");
  }
  return add(scale(x0, schedule.sqrt_alpha(t)), scale(eps, schedule.sqrt_one_minus_alpha(t)));
}

DiffusionBatch make_diffusion_batch(std::span<const DaySample> samples, std::span<const std::size_t> indices,
                                    const NoiseSchedule& schedule, Rng& rng) {
  if (indices.empty()) throw DataError("empty minibatch");
  const std::size_t n = samples[indices.front()].target.size();
  const std::size_t b = indices.size();
  std::vector<double> x0(b * n), c(b * n), eps(b * n), xt(b * n);
  DiffusionBatch batch;
  batch.steps.resize(b);
  for (std::size_t r = 0; r < b; ++r) {
    const auto& s = samples[indices[r]];
    if (s.target.size() != n || s.condition.size() != n) throw DataError("day samples differ in length");
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps())));
    batch.steps[r] = t;
    const double a = schedule.sqrt_alpha(t), s1 = schedule.sqrt_one_minus_alpha(t);
    for (std::size_t j = 0; j < n; ++j) {
      const double e = rng.normal();
      x0[r * n + j] = s.target[j];
      c[r * n + j] = s.condition[j];
      eps[r * n + j] = e;
      xt[r * n + j] = a * s.target[j] + s1 * e;
    }
  }
  batch.x0 = Tensor({b, n}, std::move(x0));
  batch.c = Tensor({b, n}, std::move(c));
  batch.eps = Tensor({b, n}, std::move(eps));
  batch.xt = Tensor({b, n}, std::move(xt));
  return batch;
}

Tensor training_loss(const NoisePredictor& model, const DiffusionBatch& batch, const ForwardContext& ctx) {
  const Tensor predicted = model.predict_noise(batch.xt, batch.c, batch.steps, ctx);
  return mean(square(sub(batch.eps, predicted)));
}

TrainReport train(TrainableDenoiser& model, std::span<const DaySample> dataset, const NoiseSchedule& schedule,
                  const TrainConfig& config, Rng& rng) {
  if (dataset.empty()) throw DataError("training set is empty");
  if (config.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  for (const auto& s : dataset) {
    if (s.target.size() != model.sequence_length() || s.condition.size() != model.sequence_length()) {
      throw DataError("sample " + format_date(s.date) + " length does not match the model sequence length " +
                      std::to_string(model.sequence_length()));
    }
  }

  Adam optimizer(model.parameters(), config.adam);
  const ForwardContext ctx{true, &rng};
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport report;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> indices(order.data() + begin, end - begin);
      const auto batch = make_diffusion_batch(dataset, indices, schedule, rng);
      optimizer.zero_grad();
      const Tensor loss = training_loss(model, batch, ctx);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      }
      backward(loss);
      optimizer.step();
      total += value * static_cast<double>(indices.size());
    }
    optimizer.zero_grad();
    const double epoch_loss = total / static_cast<double>(order.size());
    report.epoch_loss.push_back(epoch_loss);
    if (config.on_epoch) config.on_epoch(epoch, epoch_loss);
  }
  return report;
}

namespace {

void sample_chunk(const NoisePredictor& model, std::span<const double> condition, const NoiseSchedule& schedule,
                  std::uint64_t seed, std::size_t first, std::size_t count,
                  const std::optional<std::pair<double, double>>& clip, std::vector<double>& out) {
  const std::size_t n = condition.size();
  std::vector<Rng> streams;
  streams.reserve(count);
  for (std::size_t i = 0; i < count; ++i) streams.emplace_back(Rng::derive(seed, first + i));

  std::vector<double> x(count * n);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < n; ++j) x[i * n + j] = streams[i].normal();
  std::vector<double> cond(count * n);
  for (std::size_t i = 0; i < count; ++i) std::copy(condition.begin(), condition.end(), cond.begin() + i * n);
  const Tensor c({count, n}, std::move(cond));

  NoGradGuard no_grad;
  const ForwardContext eval{};
  std::vector<int> steps(count);
  for (int t = schedule.steps(); t >= 1; --t) {
    std::fill(steps.begin(), steps.end(), t);
    const Tensor eps = model.predict_noise(Tensor({count, n}, x), c, steps, eval);
    const auto e = eps.data();
    const double beta = schedule.beta(t);
    const double inv_keep = 1.0 / std::sqrt(1.0 - beta);
    const double eps_coef = beta / schedule.sqrt_one_minus_alpha(t);
    const double sigma = std::sqrt(schedule.beta_tilde(t));
    const double one_minus = 1.0 - schedule.alpha(t);
    const double x0_coef = std::sqrt(schedule.alpha(t - 1)) * beta / one_minus;
    const double xt_coef = std::sqrt(1.0 - beta) * (1.0 - schedule.alpha(t - 1)) / one_minus;
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const auto k = i * n + j;
        const double z = t > 1 ? streams[i].normal() : 0.0;
        if (clip) {
          double x0 = (x[k] - schedule.sqrt_one_minus_alpha(t) * e[k]) / schedule.sqrt_alpha(t);
          if (std::isnan(x0)) x0 = clip->first;
          x0 = std::clamp(x0, clip->first, clip->second);
          x[k] = x0_coef * x0 + xt_coef * x[k] + sigma * z;
        } else {
          x[k] = inv_keep * (x[k] - eps_coef * e[k]) + sigma * z;
        }
        if (!std::isfinite(x[k])) {
          throw NumericError("non-finite sampler state at step t=" + std::to_string(t) + " (curve " +
                             std::to_string(first + i) + ")");
        }
      }
    }
  }
  std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(first * n));
}

}  // namespace

Tensor sample(const NoisePredictor& model, std::span<const double> condition, const NoiseSchedule& schedule,
              std::uint64_t seed, std::size_t count, const SamplerOptions& options) {
  if (count < 1) throw ConfigError("sample count must be >= 1");
  const std::size_t n = condition.size();
  if (n != model.sequence_length()) {
    throw ShapeError("sample: condition length " + std::to_string(n) + " does not match model length " +
                     std::to_string(model.sequence_length()));
  }
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
  const std::size_t chunks = (count + chunk - 1) / chunk;
  std::vector<double> out(count * n);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < chunks; k = next++) {
      try {
        const std::size_t first = k * chunk;
        sample_chunk(model, condition, schedule, seed, first, std::min(chunk, count - first), options.clip_x0, out);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, chunks);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return Tensor({count, n}, std::move(out));
}

}  // namespace dalnet
