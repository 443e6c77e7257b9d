#include "dalnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dalnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

bool wants_grad(const std::shared_ptr<TensorImpl>& t) { return t->requires_grad && !t->grad.empty(); }

void require_2d(const Tensor& x, const char* op) {
  if (x.ndim() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(x.shape()));
}

enum class Broadcast { same, scalar_b, scalar_a, trailing };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.numel() == 1) return Broadcast::scalar_b;
  if (a.numel() == 1) return Broadcast::scalar_a;
  if (b.ndim() == 1 && a.ndim() >= 1 && a.shape().back() == b.numel()) return Broadcast::trailing;
  throw ShapeError(std::string(op) + ": cannot combine shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

// Index of b's element paired with output index i.
inline std::size_t b_index(Broadcast kind, std::size_t i, std::size_t bn) {
  switch (kind) {
    case Broadcast::same: return i;
    case Broadcast::scalar_b: return 0;
    case Broadcast::scalar_a: return i;
    case Broadcast::trailing: return i % bn;
  }
  return i;
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const auto bc = broadcast_kind(a, b, name);
  const Shape out_shape = bc == Broadcast::scalar_a ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  const std::size_t bn = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = bc == Broadcast::scalar_a ? ad[0] : ad[i];
    const double y = bd[b_index(bc, i, bn)];
    switch (kind) {
      case BinaryKind::add: out[i] = x + y; break;
      case BinaryKind::sub: out[i] = x - y; break;
      case BinaryKind::mul: out[i] = x * y; break;
    }
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_result(out_shape, std::move(out), name, {a, b}, [ai, bi, bc, bn, kind](const TensorImpl& o) {
    const auto& g = o.grad;
    const std::size_t n = g.size();
    if (wants_grad(ai)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double local = kind == BinaryKind::mul ? bi->data[b_index(bc, i, bn)] : 1.0;
        ai->grad[bc == Broadcast::scalar_a ? 0 : i] += g[i] * local;
      }
    }
    if (wants_grad(bi)) {
      const double sign = kind == BinaryKind::sub ? -1.0 : 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double local = kind == BinaryKind::mul ? ai->data[bc == Broadcast::scalar_a ? 0 : i] : sign;
        bi->grad[b_index(bc, i, bn)] += g[i] * local;
      }
    }
  });
}

// Unary op given f(x) and f'(x, f(x)).
template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* name, F f, DF df) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  auto xi = x.impl();
  return make_op_result(x.shape(), std::move(out), name, {x}, [xi, df](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i] * df(xi->data[i], o.data[i]);
  });
}

inline double sigmoid_value(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  auto ai = a.impl();
  auto bi = b.impl();
  return make_op_result({m, n}, std::move(out), "matmul", {a, b}, [ai, bi, m, k, n](const TensorImpl& o) {
    MapC g(o.grad.data(), m, n);
    if (wants_grad(ai)) Map(ai->grad.data(), m, k).noalias() += g * MapC(bi->data.data(), k, n).transpose();
    if (wants_grad(bi)) Map(bi->grad.data(), k, n).noalias() += MapC(ai->data.data(), m, k).transpose() * g;
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const auto r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  Map(out.data(), c, r) = MapC(a.data().data(), r, c).transpose();
  auto ai = a.impl();
  return make_op_result({c, r}, std::move(out), "transpose", {a}, [ai, r, c](const TensorImpl& o) {
    if (wants_grad(ai)) Map(ai->grad.data(), r, c) += MapC(o.grad.data(), c, r).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](double v) { return v * sigmoid_value(v); },
      [](double v, double) {
        const double s = sigmoid_value(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b, double factor) {
  switch (kind) {
    case Elementwise::add: return add(a, b);
    case Elementwise::sub: return sub(a, b);
    case Elementwise::mul: return mul(a, b);
    case Elementwise::scale: return scale(a, factor);
    case Elementwise::tanh: return tanh(a);
    case Elementwise::sigmoid: return sigmoid(a);
    case Elementwise::silu: return silu(a);
    case Elementwise::exp: return exp(a);
  }
  throw ShapeError("elementwise: unknown kind");
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (x.ndim() == 0 || x.ndim() > 2 || axis >= x.ndim()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  }
  // Each group is one softmax vector of length `len`.
  const std::size_t rows = x.ndim() == 2 ? x.dim(0) : 1;
  const std::size_t cols = x.ndim() == 2 ? x.dim(1) : x.dim(0);
  const bool along_cols = x.ndim() == 1 || axis == 1;
  const std::size_t groups = along_cols ? rows : cols;
  const std::size_t len = along_cols ? cols : rows;
  auto index = [=](std::size_t g, std::size_t j) { return along_cols ? g * cols + j : j * cols + g; };

  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, xd[index(g, j)]);
    double total = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      const double e = std::exp(xd[index(g, j)] - mx);
      out[index(g, j)] = e;
      total += e;
    }
    for (std::size_t j = 0; j < len; ++j) out[index(g, j)] /= total;
  }
  auto xi = x.impl();
  return make_op_result(x.shape(), std::move(out), "softmax", {x}, [xi, groups, len, index](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (std::size_t g = 0; g < groups; ++g) {
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += o.grad[index(g, j)] * o.data[index(g, j)];
      for (std::size_t j = 0; j < len; ++j) {
        const auto k = index(g, j);
        xi->grad[k] += o.data[k] * (o.grad[k] - dot);
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto xi = x.impl();
  return make_op_result({1}, {total}, "sum", {x}, [xi](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (auto& g : xi->grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, std::size_t axis) {
  require_2d(x, "sum");
  if (axis > 1) throw ShapeError("sum: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  const auto r = x.dim(0), c = x.dim(1);
  const std::size_t n = axis == 0 ? c : r;
  std::vector<double> out(n, 0.0);
  auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += xd[i * c + j];
  auto xi = x.impl();
  return make_op_result({n}, std::move(out), "sum_axis", {x}, [xi, r, c, axis](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) xi->grad[i * c + j] += o.grad[axis == 0 ? j : i];
  });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const auto s = sum(x, axis);
  return scale(s, 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xi = x.impl();
  return make_op_result(std::move(shape), x.impl()->data, "reshape", {x}, [xi](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_2d(x, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     shape_str(x.shape()));
  }
  const auto c = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(xd.begin() + begin * c, xd.begin() + end * c);
  auto xi = x.impl();
  return make_op_result({end - begin, c}, std::move(out), "slice_rows", {x}, [xi, begin, c](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    auto* dst = xi->grad.data() + begin * c;
    for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] += o.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_2d(x, "slice_cols");
  if (begin >= end || end > x.dim(1)) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     shape_str(x.shape()));
  }
  const auto r = x.dim(0), c = x.dim(1), w = end - begin;
  std::vector<double> out(r * w);
  auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i) std::copy_n(xd.begin() + i * c + begin, w, out.begin() + i * w);
  auto xi = x.impl();
  return make_op_result({r, w}, std::move(out), "slice_cols", {x}, [xi, r, c, w, begin](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) xi->grad[i * c + begin + j] += o.grad[i * w + j];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const auto c = parts.front().dim(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p.dim(1) != c) throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * c);
  std::vector<std::shared_ptr<TensorImpl>> impls;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    impls.push_back(p.impl());
  }
  return make_op_result({rows, c}, std::move(out), "concat_rows", parts, [impls](const TensorImpl& o) {
    std::size_t offset = 0;
    for (const auto& p : impls) {
      if (wants_grad(p)) {
        for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += o.grad[offset + i];
      }
      offset += p->data.size();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const auto r = parts.front().dim(0);
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.dim(0) != r) throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()));
    cols += p.dim(1);
  }
  std::vector<double> out(r * cols);
  std::vector<std::shared_ptr<TensorImpl>> impls;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto w = p.dim(1);
    auto pd = p.data();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(pd.begin() + i * w, w, out.begin() + i * cols + offset);
    offset += w;
    impls.push_back(p.impl());
  }
  return make_op_result({r, cols}, std::move(out), "concat_cols", parts, [impls, r, cols](const TensorImpl& o) {
    std::size_t offset = 0;
    for (const auto& p : impls) {
      const auto w = p->shape[1];
      if (wants_grad(p)) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) p->grad[i * w + j] += o.grad[i * cols + offset + j];
      }
      offset += w;
    }
  });
}

Tensor tile_rows(const Tensor& x, std::size_t reps) {
  require_2d(x, "tile_rows");
  if (reps == 0) throw ShapeError("tile_rows: reps must be positive");
  const auto n = x.numel();
  std::vector<double> out;
  out.reserve(n * reps);
  for (std::size_t r = 0; r < reps; ++r) out.insert(out.end(), x.data().begin(), x.data().end());
  auto xi = x.impl();
  return make_op_result({reps * x.dim(0), x.dim(1)}, std::move(out), "tile_rows", {x}, [xi, n](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i % n] += o.grad[i];
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_2d(x, "scale_rows");
  const auto r = x.dim(0), c = x.dim(1);
  if (s.numel() != r) throw ShapeError("scale_rows: " + shape_str(s.shape()) + " does not match rows of " + shape_str(x.shape()));
  std::vector<double> out(r * c);
  auto xd = x.data();
  auto sd = s.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xd[i * c + j] * sd[i];
  auto xi = x.impl();
  auto si = s.impl();
  return make_op_result({r, c}, std::move(out), "scale_rows", {x, s}, [xi, si, r, c](const TensorImpl& o) {
    for (std::size_t i = 0; i < r; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const auto k = i * c + j;
        if (wants_grad(xi)) xi->grad[k] += o.grad[k] * si->data[i];
        acc += o.grad[k] * xi->data[k];
      }
      if (wants_grad(si)) si->grad[i] += acc;
    }
  });
}

Tensor mul_constant(const Tensor& x, std::vector<double> mask) {
  if (mask.size() != x.numel()) throw ShapeError("mul_constant: mask size mismatch for " + shape_str(x.shape()));
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * mask[i];
  auto xi = x.impl();
  return make_op_result(x.shape(), std::move(out), "mul_constant", {x}, [xi, mask = std::move(mask)](const TensorImpl& o) {
    if (!wants_grad(xi)) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i] * mask[i];
  });
}

}  // namespace dalnet
