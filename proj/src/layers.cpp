#include "dalnet/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "dalnet/ops.hpp"

namespace dalnet {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::size_t sequence_length(const Tensor& x, std::size_t batch, const char* op) {
  if (x.ndim() != 2) throw ShapeError(std::string(op) + ": expected [N*B, F], got " + shape_str(x.shape()));
  if (batch == 0 || x.dim(0) % batch != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(x.dim(0)) + " rows is not a multiple of batch " +
                     std::to_string(batch));
  }
  return x.dim(0) / batch;
}

// Kernel slice W[:, :, k] as a dense [out, in] matrix.
RowMat kernel_tap(const std::vector<double>& kernel, std::size_t out, std::size_t in, std::size_t width,
                  std::size_t k) {
  RowMat w(out, in);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i) w(o, i) = kernel[(o * in + i) * width + k];
  return w;
}
}  // namespace

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = (2.0 * rng.uniform() - 1.0) * bound;
  return Tensor(std::move(shape), std::move(values), true);
}

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, Rng& rng) {
  return {init_uniform({in, out}, in, rng), Tensor::zeros({out}, true)};
}

Tensor DenseLayer::forward(const Tensor& x) const { return dense_forward(*this, x); }

void DenseLayer::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != layer.in_features()) {
    throw ShapeError("dense: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(layer.weight.shape()));
  }
  return add(matmul(x, layer.weight), layer.bias);
}

LstmLayer LstmLayer::init(std::size_t in, std::size_t hidden, Rng& rng) {
  LstmLayer l;
  l.input_weight = init_uniform({in, 4 * hidden}, in, rng);
  l.hidden_weight = init_uniform({hidden, 4 * hidden}, hidden, rng);
  l.bias = Tensor::zeros({4 * hidden}, true);
  return l;
}

void LstmLayer::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".input_weight", input_weight);
  out.emplace_back(prefix + ".hidden_weight", hidden_weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor lstm_forward(const LstmLayer& layer, const Tensor& seq, std::size_t batch) {
  const std::size_t steps = sequence_length(seq, batch, "lstm");
  if (seq.dim(1) != layer.input_weight.dim(0)) {
    throw ShapeError("lstm: input " + shape_str(seq.shape()) + " does not match input weight " +
                     shape_str(layer.input_weight.shape()));
  }
  const std::size_t h = layer.hidden_size();
  // Input contributions for every step at once: [N*B, 4H].
  const Tensor projected = add(matmul(seq, layer.input_weight), layer.bias);

  Tensor hidden;
  Tensor cell;
  std::vector<Tensor> outputs;
  outputs.reserve(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    Tensor gates = slice_rows(projected, n * batch, (n + 1) * batch);
    if (n > 0) gates = add(gates, matmul(hidden, layer.hidden_weight));
    const Tensor in_gate = sigmoid(slice_cols(gates, 0, h));
    const Tensor forget_gate = sigmoid(slice_cols(gates, h, 2 * h));
    const Tensor out_gate = sigmoid(slice_cols(gates, 2 * h, 3 * h));
    const Tensor candidate = tanh(slice_cols(gates, 3 * h, 4 * h));
    cell = n == 0 ? mul(in_gate, candidate) : add(mul(forget_gate, cell), mul(in_gate, candidate));
    hidden = mul(out_gate, tanh(cell));
    outputs.push_back(hidden);
  }
  return steps == 1 ? outputs.front() : concat_rows(outputs);
}

Conv1D Conv1D::init(std::size_t in_channels, std::size_t out_channels, std::size_t width, Rng& rng) {
  if (width == 0) throw ShapeError("conv1d: kernel width must be >= 1");
  return {init_uniform({out_channels, in_channels, width}, in_channels * width, rng),
          Tensor::zeros({out_channels}, true)};
}

void Conv1D::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".kernel", kernel);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor conv1d_forward(const Conv1D& layer, const Tensor& x, std::size_t batch) {
  const std::size_t len = sequence_length(x, batch, "conv1d");
  const std::size_t cin = layer.in_channels(), cout = layer.out_channels(), width = layer.width();
  if (x.dim(1) != cin) {
    throw ShapeError("conv1d: input " + shape_str(x.shape()) + " does not match kernel " +
                     shape_str(layer.kernel.shape()));
  }
  if (layer.bias.numel() != cout) throw ShapeError("conv1d: bias does not match kernel");
  const std::size_t rows = x.dim(0);
  const auto left = static_cast<std::ptrdiff_t>((width - 1) / 2);

  // Output positions n read input n + shift for shift = k - left; in the
  // time-major layout that is a contiguous row block offset by shift * B.
  struct Tap {
    std::size_t k, out_row, in_row, count;
  };
  std::vector<Tap> taps;
  for (std::size_t k = 0; k < width; ++k) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - left;
    const std::ptrdiff_t n0 = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t n1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len),
                                                       static_cast<std::ptrdiff_t>(len) - shift);
    if (n1 <= n0) continue;
    taps.push_back({k, static_cast<std::size_t>(n0) * batch, static_cast<std::size_t>(n0 + shift) * batch,
                    static_cast<std::size_t>(n1 - n0) * batch});
  }

  const auto& kd = layer.kernel.impl()->data;
  std::vector<double> out(rows * cout);
  Map y(out.data(), rows, cout);
  y.rowwise() = Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data().data(), cout);
  MapC xm(x.data().data(), rows, cin);
  for (const auto& t : taps) {
    const RowMat w = kernel_tap(kd, cout, cin, width, t.k);
    y.middleRows(t.out_row, t.count).noalias() += xm.middleRows(t.in_row, t.count) * w.transpose();
  }

  auto xi = x.impl();
  auto ki = layer.kernel.impl();
  auto bi = layer.bias.impl();
  return make_op_result(
      {rows, cout}, std::move(out), "conv1d", {x, layer.kernel, layer.bias},
      [xi, ki, bi, taps, rows, cin, cout, width](const TensorImpl& o) {
        MapC g(o.grad.data(), rows, cout);
        if (bi->requires_grad && !bi->grad.empty()) {
          // Plain loop: Eigen's vectorized colwise sum depends on buffer alignment,
          // which would make training results vary between processes.
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cout; ++c) bi->grad[c] += o.grad[r * cout + c];
        }
        const bool kernel_grad = ki->requires_grad && !ki->grad.empty();
        const bool input_grad = xi->requires_grad && !xi->grad.empty();
        MapC xm(xi->data.data(), rows, cin);
        for (const auto& t : taps) {
          if (input_grad) {
            const RowMat w = kernel_tap(ki->data, cout, cin, width, t.k);
            Map(xi->grad.data(), rows, cin).middleRows(t.in_row, t.count).noalias() +=
                g.middleRows(t.out_row, t.count) * w;
          }
          if (kernel_grad) {
            const RowMat dw = g.middleRows(t.out_row, t.count).transpose() * xm.middleRows(t.in_row, t.count);
            for (std::size_t oc = 0; oc < cout; ++oc)
              for (std::size_t ic = 0; ic < cin; ++ic) ki->grad[(oc * cin + ic) * width + t.k] += dw(oc, ic);
          }
        }
      });
}

Tensor dropout_apply(const Dropout& d, const Tensor& x, Rng& rng) {
  if (d.rate < 0.0 || d.rate >= 1.0) throw ShapeError("dropout: rate must be in [0, 1)");
  if (!d.training || d.rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - d.rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < d.rate ? 0.0 : keep_scale;
  return mul_constant(x, std::move(mask));
}

std::vector<double> sinusoidal_embedding(double t, std::size_t dim) {
  if (dim < 4 || dim % 2 != 0) throw ShapeError("step embedding dimension must be even and >= 4");
  const std::size_t half = dim / 2;
  std::vector<double> e(dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::pow(10.0, 4.0 * static_cast<double>(k) / static_cast<double>(half - 1));
    e[k] = std::sin(freq * t);
    e[half + k] = std::cos(freq * t);
  }
  return e;
}

Tensor step_embedding(int t, int total_steps, std::size_t dim) {
  if (t < 1 || t > total_steps) {
    throw ShapeError("step_embedding: t=" + std::to_string(t) + " outside [1, " + std::to_string(total_steps) + "]");
  }
  return Tensor::vector(sinusoidal_embedding(static_cast<double>(t), dim));
}

StepEmbedMlp StepEmbedMlp::init(std::size_t embed_dim, std::size_t hidden, Rng& rng) {
  auto first = DenseLayer::init(embed_dim, hidden, rng);
  auto second = DenseLayer::init(hidden, hidden, rng);
  return {std::move(first), std::move(second)};
}

Tensor StepEmbedMlp::forward(const Tensor& e) const { return silu(second.forward(silu(first.forward(e)))); }

void StepEmbedMlp::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  first.collect(prefix + ".fc1", out);
  second.collect(prefix + ".fc2", out);
}

Tensor step_embed_mlp(const StepEmbedMlp& mlp, const Tensor& e) {
  if (e.ndim() != 1) return mlp.forward(e);
  const Tensor out = mlp.forward(reshape(e, {1, e.numel()}));
  return reshape(out, {out.numel()});
}

ConditionEmbed ConditionEmbed::init(std::size_t hidden, std::size_t seq_len, std::size_t depth, Rng& rng) {
  if (depth == 0) throw ShapeError("condition embedding needs at least one layer");
  ConditionEmbed c;
  c.seq_len = seq_len;
  for (std::size_t i = 0; i < depth; ++i) c.layers.push_back(Conv1D::init(i == 0 ? 1 : hidden, hidden, 1, rng));
  return c;
}

void ConditionEmbed::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".conv" + std::to_string(i), out);
}

Tensor condition_embed(const ConditionEmbed& embed, const Tensor& c, std::size_t batch) {
  if (c.ndim() != 2 || c.dim(1) != 1 || c.dim(0) != embed.seq_len * batch) {
    throw ShapeError("condition_embed: expected [" + std::to_string(embed.seq_len * batch) + ",1], got " +
                     shape_str(c.shape()));
  }
  Tensor h = c;
  for (std::size_t i = 0; i < embed.layers.size(); ++i) {
    if (i > 0) h = silu(h);
    h = conv1d_forward(embed.layers[i], h, batch);
  }
  return h;
}

}  // namespace dalnet
