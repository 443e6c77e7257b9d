#pragma once

// Central finite-difference oracle for autodiff gradients (test-only).

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dalnet/ops.hpp"
#include "dalnet/rng.hpp"
#include "dalnet/tensor.hpp"

namespace gradcheck {

using dalnet::Tensor;

inline constexpr double kStep = 1e-4;

// |a - n| / max(|a|, |n|, floor): relative for ordinary gradients, absolute
// below `floor` where finite differences are dominated by rounding.
inline double rel_error(double a, double n, double floor = 1e-3) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

inline Tensor random_tensor(dalnet::Shape shape, dalnet::Rng& rng, double scale = 1.0, bool rg = true) {
  std::vector<double> v(dalnet::shape_numel(shape));
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return Tensor(std::move(shape), std::move(v), rg);
}

// Scalar projection sum(out * R) with a fixed random R, so every output
// element contributes with a distinct weight.
inline Tensor project(const Tensor& out, std::uint64_t seed = 99) {
  dalnet::Rng rng(seed);
  return dalnet::sum(dalnet::mul(out, random_tensor(out.shape(), rng, 1.0, false)));
}

struct Probe {
  Tensor tensor;
  std::size_t index;
};

// Max relative error between autodiff and central differences of `loss_fn`
// at the given probes. `loss_fn` must rebuild the graph on each call.
inline double max_error(const std::function<Tensor()>& loss_fn, const std::vector<Probe>& probes,
                        double floor = 1e-3) {
  for (const auto& p : probes) p.tensor.impl()->grad.clear();
  dalnet::backward(loss_fn());
  std::vector<double> analytic;
  for (const auto& p : probes) analytic.push_back(p.tensor.has_grad() ? p.tensor.grad()[p.index] : 0.0);

  double worst = 0.0;
  dalnet::NoGradGuard guard;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    auto data = probes[i].tensor.impl()->data.data();
    const double orig = data[probes[i].index];
    data[probes[i].index] = orig + kStep;
    const double up = loss_fn().item();
    data[probes[i].index] = orig - kStep;
    const double down = loss_fn().item();
    data[probes[i].index] = orig;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * kStep), floor));
  }
  return worst;
}

// Every element of every tensor.
inline double max_error_all(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& inputs,
                            double floor = 1e-3) {
  std::vector<Probe> probes;
  for (const auto& t : inputs)
    for (std::size_t i = 0; i < t.numel(); ++i) probes.push_back({t, i});
  return max_error(loss_fn, probes, floor);
}

}  // namespace gradcheck
