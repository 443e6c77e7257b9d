#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dalnet/layers.hpp"
#include "dalnet/tensor.hpp"

namespace dalnet {

enum class MaskKind { global, window, dilated };

/// Which positions a head may attend to. `window` is a one-sided half-width:
/// window(w) allows |i-j| <= w. dilated(w, d) allows offsets that are
/// multiples of d+1 up to w*(d+1).
struct MaskSpec {
  MaskKind kind = MaskKind::global;
  int window = 0;
  int dilation = 0;

  static MaskSpec global() { return {}; }
  static MaskSpec windowed(int w) { return {MaskKind::window, w, 0}; }
  static MaskSpec dilated(int w, int d) { return {MaskKind::dilated, w, d}; }

  // "global", "window:W", "dilated:W:D"
  std::string label() const;
  static MaskSpec parse(const std::string& text);

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(MaskSpec spec, std::size_t n, std::vector<char> allowed)
      : spec_(spec), n_(n), allowed_(std::move(allowed)) {}

  const MaskSpec& spec() const { return spec_; }
  std::size_t size() const { return n_; }
  bool allowed(std::size_t i, std::size_t j) const { return allowed_[i * n_ + j] != 0; }

 private:
  MaskSpec spec_;
  std::size_t n_ = 0;
  std::vector<char> allowed_;
};

AttentionMask build_mask(const MaskSpec& spec, std::size_t n);

// Logit assigned to masked pairs before softmax.
inline constexpr double kMaskedLogit = -1e30;

// softmax(Q K^T / sqrt(M)) V per sequence, masked pairs excluded.
// q, k, v: [N*B, M] time-major; result [N*B, M].
Tensor scaled_masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
                               std::size_t batch = 1);

// Attention map [N, N] for a single sequence (no gradient).
std::vector<double> attention_map(const Tensor& q, const Tensor& k, const AttentionMask& mask);

struct AttentionHead {
  MaskSpec mask;
  Tensor w_q;  // [H, M]
  Tensor w_k;  // [H, M]
  Tensor w_v;  // [H, M]
};

struct HeadConfig {
  std::vector<AttentionHead> heads;
  Tensor w_o;  // [h*M, H]

  static HeadConfig init(std::size_t hidden, std::size_t head_dim, const std::vector<MaskSpec>& masks, Rng& rng);
  std::size_t head_dim() const { return heads.front().w_q.dim(1); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct TemporalAttentionParams {
  Tensor w_t;  // [H, M_T]
  Tensor w_l;  // [M_T, 1]

  static TemporalAttentionParams init(std::size_t hidden, std::size_t temporal_dim, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// One head on x [N*B, H] -> [N*B, M].
Tensor masked_attention(const Tensor& x, const AttentionHead& head, const AttentionMask& mask, std::size_t batch = 1);

// [O_1, ..., O_h] w_O; masks[i] belongs to cfg.heads[i].
Tensor multi_head(const Tensor& x, const HeadConfig& cfg, const std::vector<AttentionMask>& masks,
                  std::size_t batch = 1);

// softmax over positions of tanh(x w_T) w_l, one distribution per sequence.
// x: [N*B, H] -> [N*B] (time-major, sums to 1 within each sequence).
Tensor temporal_attention(const Tensor& x, const TemporalAttentionParams& params, std::size_t batch = 1);

/// Temporal multi-scale attention block: multi-head output with row n of each
/// sequence scaled by N*T_n, plus a residual from the input.
struct Tmsab {
  HeadConfig heads;
  TemporalAttentionParams temporal;
  std::vector<AttentionMask> masks;
  std::size_t seq_len = 0;

  static Tmsab init(std::size_t hidden, std::size_t seq_len, std::size_t head_dim, std::size_t temporal_dim,
                    const std::vector<MaskSpec>& mask_specs, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor tmsab_forward(const Tensor& x, const Tmsab& block, std::size_t batch = 1);

}  // namespace dalnet
