#include "dalnet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dalnet/ops.hpp"

namespace dalnet {

std::string MaskSpec::label() const {
  switch (kind) {
    case MaskKind::global: return "global";
    case MaskKind::window: return "window:" + std::to_string(window);
    case MaskKind::dilated: return "dilated:" + std::to_string(window) + ":" + std::to_string(dilation);
  }
  return "global";
}

MaskSpec MaskSpec::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("attention mask '" + text + "': '" + s + "' is not an integer");
    }
  };
  if (parts.size() == 1 && parts[0] == "global") return global();
  const auto positive = [&](const std::string& s) {
    const int v = number(s);
    if (v < 1) throw ConfigError("attention mask '" + text + "': values must be >= 1");
    return v;
  };
  if (parts.size() == 2 && parts[0] == "window") return windowed(positive(parts[1]));
  if (parts.size() == 3 && parts[0] == "dilated") return dilated(positive(parts[1]), positive(parts[2]));
  throw ConfigError("attention mask '" + text + "': expected global, window:W or dilated:W:D");
}

AttentionMask build_mask(const MaskSpec& spec, std::size_t n) {
  if (n == 0) throw ShapeError("build_mask: sequence length must be >= 1");
  if (spec.kind != MaskKind::global && spec.window < 1) {
    throw ShapeError("build_mask: window must be >= 1, got " + std::to_string(spec.window));
  }
  if (spec.kind == MaskKind::dilated && spec.dilation < 1) {
    throw ShapeError("build_mask: dilation must be >= 1, got " + std::to_string(spec.dilation));
  }
  std::vector<char> allowed(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto dist = static_cast<long>(i > j ? i - j : j - i);
      bool ok = true;
      if (spec.kind == MaskKind::window) {
        ok = dist <= spec.window;
      } else if (spec.kind == MaskKind::dilated) {
        const long stride = spec.dilation + 1;
        ok = dist <= static_cast<long>(spec.window) * stride && dist % stride == 0;
      }
      allowed[i * n + j] = ok ? 1 : 0;
    }
  }
  return AttentionMask(spec, n, std::move(allowed));
}

namespace {

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask, std::size_t batch) {
  if (q.ndim() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("attention: q/k/v shapes disagree: " + shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                     ", " + shape_str(v.shape()));
  }
  if (batch == 0 || q.dim(0) != mask.size() * batch) {
    throw ShapeError("attention: " + std::to_string(q.dim(0)) + " rows do not match mask length " +
                     std::to_string(mask.size()) + " x batch " + std::to_string(batch));
  }
}

// Row-softmax of masked, scaled logits for sequence b; writes N*N weights.
void attention_weights(const double* q, const double* k, std::size_t n, std::size_t m, std::size_t batch,
                       std::size_t b, const AttentionMask& mask, double* weights) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < n; ++i) {
    const double* qi = q + (i * batch + b) * m;
    double* row = weights + i * n;
    double mx = kMaskedLogit;
    for (std::size_t j = 0; j < n; ++j) {
      double logit = kMaskedLogit;
      if (mask.allowed(i, j)) {
        const double* kj = k + (j * batch + b) * m;
        double dot = 0.0;
        for (std::size_t c = 0; c < m; ++c) dot += qi[c] * kj[c];
        logit = dot * inv;
      }
      row[j] = logit;
      mx = std::max(mx, logit);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
}

}  // namespace

std::vector<double> attention_map(const Tensor& q, const Tensor& k, const AttentionMask& mask) {
  check_qkv(q, k, k, mask, 1);
  const std::size_t n = mask.size(), m = q.dim(1);
  std::vector<double> weights(n * n);
  attention_weights(q.data().data(), k.data().data(), n, m, 1, 0, mask, weights.data());
  return weights;
}

Tensor scaled_masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
                               std::size_t batch) {
  check_qkv(q, k, v, mask, batch);
  const std::size_t n = mask.size(), m = q.dim(1);
  std::vector<double> weights(batch * n * n);
  std::vector<double> out(q.numel(), 0.0);
  const double* vd = v.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    double* a = weights.data() + b * n * n;
    attention_weights(q.data().data(), k.data().data(), n, m, batch, b, mask, a);
    for (std::size_t i = 0; i < n; ++i) {
      double* oi = out.data() + (i * batch + b) * m;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = a[i * n + j];
        if (w == 0.0) continue;
        const double* vj = vd + (j * batch + b) * m;
        for (std::size_t c = 0; c < m; ++c) oi[c] += w * vj[c];
      }
    }
  }

  auto qi = q.impl();
  auto ki = k.impl();
  auto vi = v.impl();
  return make_op_result(
      q.shape(), std::move(out), "masked_attention", {q, k, v},
      [qi, ki, vi, weights = std::move(weights), n, m, batch](const TensorImpl& o) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(m));
        const bool gq = qi->requires_grad && !qi->grad.empty();
        const bool gk = ki->requires_grad && !ki->grad.empty();
        const bool gv = vi->requires_grad && !vi->grad.empty();
        std::vector<double> da(n);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* a = weights.data() + b * n * n;
          for (std::size_t i = 0; i < n; ++i) {
            const double* go = o.grad.data() + (i * batch + b) * m;
            // dA_ij = dO_i . v_j ; dV_j += A_ij dO_i
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double w = a[i * n + j];
              da[j] = 0.0;
              if (w == 0.0) continue;
              const double* vj = vi->data.data() + (j * batch + b) * m;
              double s = 0.0;
              for (std::size_t c = 0; c < m; ++c) s += go[c] * vj[c];
              da[j] = s;
              dot += w * s;
              if (gv) {
                double* gvj = vi->grad.data() + (j * batch + b) * m;
                for (std::size_t c = 0; c < m; ++c) gvj[c] += w * go[c];
              }
            }
            if (!gq && !gk) continue;
            const double* q_row = qi->data.data() + (i * batch + b) * m;
            for (std::size_t j = 0; j < n; ++j) {
              const double w = a[i * n + j];
              if (w == 0.0) continue;
              const double dlogit = w * (da[j] - dot) * inv;
              const double* kj = ki->data.data() + (j * batch + b) * m;
              if (gq) {
                double* gqi = qi->grad.data() + (i * batch + b) * m;
                for (std::size_t c = 0; c < m; ++c) gqi[c] += dlogit * kj[c];
              }
              if (gk) {
                double* gkj = ki->grad.data() + (j * batch + b) * m;
                for (std::size_t c = 0; c < m; ++c) gkj[c] += dlogit * q_row[c];
              }
            }
          }
        }
      });
}

HeadConfig HeadConfig::init(std::size_t hidden, std::size_t head_dim, const std::vector<MaskSpec>& masks, Rng& rng) {
  if (masks.empty()) throw ConfigError("attention needs at least one head");
  HeadConfig cfg;
  for (const auto& spec : masks) {
    AttentionHead h;
    h.mask = spec;
    h.w_q = init_uniform({hidden, head_dim}, hidden, rng);
    h.w_k = init_uniform({hidden, head_dim}, hidden, rng);
    h.w_v = init_uniform({hidden, head_dim}, hidden, rng);
    cfg.heads.push_back(std::move(h));
  }
  cfg.w_o = init_uniform({masks.size() * head_dim, hidden}, masks.size() * head_dim, rng);
  return cfg;
}

void HeadConfig::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto p = prefix + ".head" + std::to_string(i);
    out.emplace_back(p + ".w_q", heads[i].w_q);
    out.emplace_back(p + ".w_k", heads[i].w_k);
    out.emplace_back(p + ".w_v", heads[i].w_v);
  }
  out.emplace_back(prefix + ".w_o", w_o);
}

TemporalAttentionParams TemporalAttentionParams::init(std::size_t hidden, std::size_t temporal_dim, Rng& rng) {
  auto w_t = init_uniform({hidden, temporal_dim}, hidden, rng);
  auto w_l = init_uniform({temporal_dim, 1}, temporal_dim, rng);
  return {std::move(w_t), std::move(w_l)};
}

void TemporalAttentionParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".w_t", w_t);
  out.emplace_back(prefix + ".w_l", w_l);
}

Tensor masked_attention(const Tensor& x, const AttentionHead& head, const AttentionMask& mask, std::size_t batch) {
  return scaled_masked_attention(matmul(x, head.w_q), matmul(x, head.w_k), matmul(x, head.w_v), mask, batch);
}

Tensor multi_head(const Tensor& x, const HeadConfig& cfg, const std::vector<AttentionMask>& masks,
                  std::size_t batch) {
  if (masks.size() != cfg.heads.size()) throw ShapeError("multi_head: one mask per head required");
  std::vector<Tensor> outputs;
  outputs.reserve(cfg.heads.size());
  for (std::size_t i = 0; i < cfg.heads.size(); ++i) outputs.push_back(masked_attention(x, cfg.heads[i], masks[i], batch));
  const Tensor stacked = outputs.size() == 1 ? outputs.front() : concat_cols(outputs);
  return matmul(stacked, cfg.w_o);
}

Tensor temporal_attention(const Tensor& x, const TemporalAttentionParams& params, std::size_t batch) {
  if (x.ndim() != 2 || batch == 0 || x.dim(0) % batch != 0) {
    throw ShapeError("temporal_attention: bad input " + shape_str(x.shape()));
  }
  const std::size_t len = x.dim(0) / batch;
  const Tensor scores = matmul(tanh(matmul(x, params.w_t)), params.w_l);  // [N*B, 1]
  // Time-major rows viewed as [N, B]: softmax down each column.
  const Tensor weights = softmax(reshape(scores, {len, batch}), 0);
  return reshape(weights, {len * batch});
}

Tmsab Tmsab::init(std::size_t hidden, std::size_t seq_len, std::size_t head_dim, std::size_t temporal_dim,
                  const std::vector<MaskSpec>& mask_specs, Rng& rng) {
  Tmsab block;
  block.heads = HeadConfig::init(hidden, head_dim, mask_specs, rng);
  block.temporal = TemporalAttentionParams::init(hidden, temporal_dim, rng);
  block.seq_len = seq_len;
  for (const auto& spec : mask_specs) block.masks.push_back(build_mask(spec, seq_len));
  return block;
}

void Tmsab::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  heads.collect(prefix + ".mha", out);
  temporal.collect(prefix + ".temporal", out);
}

Tensor tmsab_forward(const Tensor& x, const Tmsab& block, std::size_t batch) {
  if (x.ndim() != 2 || x.dim(0) != block.seq_len * batch) {
    throw ShapeError("tmsab: input " + shape_str(x.shape()) + " does not match sequence length " +
                     std::to_string(block.seq_len));
  }
  const Tensor attended = multi_head(x, block.heads, block.masks, batch);
  const Tensor temporal = temporal_attention(x, block.temporal, batch);
  const Tensor modulated = scale_rows(attended, scale(temporal, static_cast<double>(block.seq_len)));
  return add(modulated, x);
}

}  // namespace dalnet
