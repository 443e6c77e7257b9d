#include "dalnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dalnet/errors.hpp"

namespace dalnet {

namespace {

constexpr double kDensityFloor = 1e-12;

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void check_pinc(double pinc) {
  if (!(pinc > 0.0 && pinc < 1.0)) throw ConfigError("pinc must be in (0, 1), got " + std::to_string(pinc));
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  if (points < 2) throw ConfigError("KDE grid needs at least 2 points");
  std::vector<double> grid(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo + step * static_cast<double>(i);
  grid.back() = hi;
  return grid;
}

void normalize_density(std::span<const double> grid, std::vector<double>& density) {
  const double area = trapezoid(grid, density);
  if (!(area > 0.0)) throw NumericError("KDE density has zero mass on its grid");
  for (auto& d : density) d /= area;
}

}  // namespace

EnsembleForecast EnsembleForecast::from_tensor(const Tensor& samples, std::string date) {
  if (samples.ndim() != 2) throw ShapeError("ensemble must be [S, N], got " + shape_str(samples.shape()));
  EnsembleForecast e;
  e.members = samples.dim(0);
  e.length = samples.dim(1);
  e.values.assign(samples.data().begin(), samples.data().end());
  e.date = std::move(date);
  return e;
}

std::vector<double> EnsembleForecast::column(std::size_t step) const {
  std::vector<double> out(members);
  for (std::size_t s = 0; s < members; ++s) out[s] = at(s, step);
  return out;
}

std::vector<double> EnsembleForecast::mean_curve() const {
  std::vector<double> out(length, 0.0);
  for (std::size_t s = 0; s < members; ++s)
    for (std::size_t t = 0; t < length; ++t) out[t] += at(s, t);
  for (auto& v : out) v /= static_cast<double>(members);
  return out;
}

double sample_quantile(std::span<const double> values, double q) {
  if (values.size() < 2) throw ShapeError("quantile needs at least 2 samples");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile level must be in (0, 1), got " + std::to_string(q));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::vector<double>> empirical_quantiles(const EnsembleForecast& ensemble, std::span<const double> q_levels) {
  if (ensemble.members < 2) throw ShapeError("ensemble needs at least 2 members for quantiles");
  std::vector<std::vector<double>> out(q_levels.size(), std::vector<double>(ensemble.length));
  for (std::size_t t = 0; t < ensemble.length; ++t) {
    const auto col = ensemble.column(t);
    for (std::size_t l = 0; l < q_levels.size(); ++l) out[l][t] = sample_quantile(col, q_levels[l]);
  }
  return out;
}

PredictionInterval interval_from_ensemble(const EnsembleForecast& ensemble, double pinc) {
  check_pinc(pinc);
  const double alpha = 1.0 - pinc;
  const double levels[] = {alpha / 2.0, 1.0 - alpha / 2.0};
  auto q = empirical_quantiles(ensemble, levels);
  return {std::move(q[0]), std::move(q[1]), pinc};
}

PredictionInterval concat_intervals(const std::vector<PredictionInterval>& parts) {
  if (parts.empty()) throw ShapeError("no intervals to concatenate");
  PredictionInterval out;
  out.pinc = parts.front().pinc;
  for (const auto& p : parts) {
    if (p.pinc != out.pinc) throw ShapeError("cannot concatenate intervals with different pinc");
    out.lower.insert(out.lower.end(), p.lower.begin(), p.lower.end());
    out.upper.insert(out.upper.end(), p.upper.begin(), p.upper.end());
  }
  return out;
}

Coverage picp_ace(const PredictionInterval& interval, std::span<const double> actuals) {
  require_same_length(interval.size(), actuals.size(), "picp_ace");
  if (actuals.empty()) throw ShapeError("picp_ace: no points");
  check_pinc(interval.pinc);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    inside += actuals[i] >= interval.lower[i] && actuals[i] <= interval.upper[i];
  }
  Coverage c;
  c.picp = static_cast<double>(inside) / static_cast<double>(actuals.size());
  c.signed_ace = c.picp - interval.pinc;
  c.ace = std::abs(c.signed_ace);
  return c;
}

double average_width(const PredictionInterval& interval) {
  require_same_length(interval.lower.size(), interval.upper.size(), "average_width");
  if (interval.lower.empty()) throw ShapeError("average_width: no points");
  double total = 0.0;
  for (std::size_t i = 0; i < interval.size(); ++i) total += interval.upper[i] - interval.lower[i];
  return total / static_cast<double>(interval.size());
}

double overall_score(const PredictionInterval& interval, std::span<const double> actuals) {
  require_same_length(interval.size(), actuals.size(), "overall_score");
  if (actuals.empty()) throw ShapeError("overall_score: no points");
  check_pinc(interval.pinc);
  const double alpha = interval.alpha();
  double total = 0.0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    const double lo = interval.lower[i], hi = interval.upper[i], y = actuals[i];
    double s = -2.0 * alpha * (hi - lo);
    if (y < lo) {
      s -= 4.0 * (lo - y);
    } else if (y > hi) {
      s -= 4.0 * (y - hi);
    }
    total += s;
  }
  return total / static_cast<double>(actuals.size());
}

double point_mse(const EnsembleForecast& ensemble, std::span<const double> actual) {
  require_same_length(ensemble.length, actual.size(), "point_mse");
  const auto mean = ensemble.mean_curve();
  double total = 0.0;
  for (std::size_t t = 0; t < actual.size(); ++t) total += (mean[t] - actual[t]) * (mean[t] - actual[t]);
  return total / static_cast<double>(actual.size());
}

double DensityEstimate::evaluate(double x) const {
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  double total = 0.0;
  for (double s : samples) {
    const double u = (x - s) / bandwidth;
    total += std::exp(-0.5 * u * u);
  }
  return total * norm;
}

double silverman_bandwidth(std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sigma = std::sqrt(ss / (n - 1.0));
  const double iqr = sample_quantile(samples, 0.75) - sample_quantile(samples, 0.25);
  // A zero IQR (heavily tied data) falls back to sigma alone.
  const double spread = iqr > 0.0 ? std::min(sigma, iqr / 1.34) : sigma;
  return 0.9 * spread * std::pow(n, -0.2);
}

DensityEstimate kde(std::span<const double> samples, const KdeOptions& options) {
  if (samples.size() < 2) throw ShapeError("kde needs at least 2 samples");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (!(*mx > *mn)) throw DataError("kde: samples have zero spread");
  DensityEstimate est;
  est.samples.assign(samples.begin(), samples.end());
  est.bandwidth = options.bandwidth > 0.0 ? options.bandwidth : silverman_bandwidth(samples);
  est.grid = uniform_grid(*mn - 3.0 * est.bandwidth, *mx + 3.0 * est.bandwidth, options.grid_points);
  return reevaluate(est, est.grid);
}

DensityEstimate reevaluate(const DensityEstimate& est, std::span<const double> grid) {
  DensityEstimate out;
  out.samples = est.samples;
  out.bandwidth = est.bandwidth;
  out.grid.assign(grid.begin(), grid.end());
  out.density.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out.density[i] = est.evaluate(grid[i]);
  normalize_density(out.grid, out.density);
  return out;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "trapezoid");
  double total = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) total += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return total;
}

double kl_on_grid(std::span<const double> grid, std::span<const double> p, std::span<const double> q) {
  require_same_length(grid.size(), p.size(), "kl");
  require_same_length(grid.size(), q.size(), "kl");
  std::vector<double> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double pi = std::max(p[i], kDensityFloor);
    const double qi = std::max(q[i], kDensityFloor);
    integrand[i] = pi * std::log(pi / qi);
  }
  return trapezoid(grid, integrand);
}

double kl_discrete(std::span<const double> p, std::span<const double> q) {
  require_same_length(p.size(), q.size(), "kl_discrete");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::max(p[i], kDensityFloor);
    const double qi = std::max(q[i], kDensityFloor);
    total += pi * std::log(pi / qi);
  }
  return total;
}

std::vector<double> union_grid(const DensityEstimate& p, const DensityEstimate& q, std::size_t grid_points) {
  const double lo = std::min(p.grid.front(), q.grid.front());
  const double hi = std::max(p.grid.back(), q.grid.back());
  // A narrow density must still be resolved when the other one is wide.
  const double h = std::min(p.bandwidth, q.bandwidth);
  const double needed = std::ceil((hi - lo) / (h / 4.0)) + 1.0;
  const auto points = static_cast<std::size_t>(std::clamp(needed, static_cast<double>(grid_points), 20000.0));
  return uniform_grid(lo, hi, std::max(points, grid_points));
}

double kl_divergence(const DensityEstimate& p, const DensityEstimate& q, std::size_t grid_points) {
  const auto grid = union_grid(p, q, grid_points);
  const auto pe = reevaluate(p, grid);
  const auto qe = reevaluate(q, grid);
  return kl_on_grid(grid, pe.density, qe.density);
}

}  // namespace dalnet
