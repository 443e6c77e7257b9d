#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dalnet/tensor.hpp"

namespace dalnet {

/// S generated curves for one condition day, row-major [S, N].
struct EnsembleForecast {
  std::size_t members = 0;
  std::size_t length = 0;
  std::vector<double> values;
  std::string date;

  static EnsembleForecast from_tensor(const Tensor& samples, std::string date = {});
  double at(std::size_t member, std::size_t step) const { return values[member * length + step]; }
  std::vector<double> column(std::size_t step) const;
  std::vector<double> mean_curve() const;
};

struct PredictionInterval {
  std::vector<double> lower;
  std::vector<double> upper;
  double pinc = 0.9;  // nominal coverage 1 - alpha, as a fraction
  double alpha() const { return 1.0 - pinc; }
  std::size_t size() const { return lower.size(); }
};

// Linear-interpolation sample quantile of `values` (need not be sorted).
double sample_quantile(std::span<const double> values, double q);

// result[l][t] = quantile q_levels[l] of the members at step t.
std::vector<std::vector<double>> empirical_quantiles(const EnsembleForecast& ensemble, std::span<const double> q_levels);

// Per-step quantiles at alpha/2 and 1 - alpha/2.
PredictionInterval interval_from_ensemble(const EnsembleForecast& ensemble, double pinc);

// Concatenates intervals of several days sharing one pinc.
PredictionInterval concat_intervals(const std::vector<PredictionInterval>& parts);

struct Coverage {
  double picp = 0.0;
  double ace = 0.0;         // |picp - pinc|
  double signed_ace = 0.0;  // picp - pinc
};

// Endpoints count as covered.
Coverage picp_ace(const PredictionInterval& interval, std::span<const double> actuals);

double average_width(const PredictionInterval& interval);

// Mean interval score: -2 alpha W, minus 4x the miss distance outside the interval.
double overall_score(const PredictionInterval& interval, std::span<const double> actuals);

double point_mse(const EnsembleForecast& ensemble, std::span<const double> actual);

struct KdeOptions {
  std::size_t grid_points = 512;
  double bandwidth = 0.0;  // <= 0 selects Silverman's rule
};

// Gaussian-kernel density evaluated on a uniform grid, normalized so the
// trapezoidal integral over the grid is 1.
struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::vector<double> samples;

  // Raw kernel density at x (not grid-normalized).
  double evaluate(double x) const;
};

double silverman_bandwidth(std::span<const double> samples);

// Grid spans [min - 3h, max + 3h].
DensityEstimate kde(std::span<const double> samples, const KdeOptions& options = {});

// Re-evaluates `est` on `grid` and renormalizes there.
DensityEstimate reevaluate(const DensityEstimate& est, std::span<const double> grid);

// Trapezoidal integral of p log(p/q) on a shared grid, densities floored at 1e-12.
double kl_on_grid(std::span<const double> grid, std::span<const double> p, std::span<const double> q);

// Discrete sum of p log(p/q), same floor.
double kl_discrete(std::span<const double> p, std::span<const double> q);

// Uniform grid over both supports with at least `grid_points` points and at
// least four points per bandwidth of the narrower estimate (capped at 20000).
std::vector<double> union_grid(const DensityEstimate& p, const DensityEstimate& q, std::size_t grid_points = 512);

// KL(p || q) after re-evaluating both on the union of their grids.
double kl_divergence(const DensityEstimate& p, const DensityEstimate& q, std::size_t grid_points = 512);

double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace dalnet
