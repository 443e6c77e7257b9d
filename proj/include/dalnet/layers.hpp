#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dalnet/rng.hpp"
#include "dalnet/tensor.hpp"

// Sequence tensors are 2-D and time-major: a batch of B sequences of length N
// with F features is stored as [N*B, F], row n*B + b holding position n of
// sequence b. With B = 1 this is the plain [N, F] layout.

namespace dalnet {

using NamedTensor = std::pair<std::string, Tensor>;

// Uniform in +-1/sqrt(fan_in).
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

struct DenseLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static DenseLayer init(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// x: [R, in] -> x W + b.
Tensor dense_forward(const DenseLayer& layer, const Tensor& x);

/// Single-layer unidirectional LSTM. The four gates are packed along the
/// output axis in the order input, forget, output, candidate.
struct LstmLayer {
  Tensor input_weight;   // [in, 4H]
  Tensor hidden_weight;  // [H, 4H]
  Tensor bias;           // [4H]

  static LstmLayer init(std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t hidden_size() const { return hidden_weight.dim(0); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// seq: [N*B, in] time-major -> hidden states [N*B, H]. Initial h and c are zero.
Tensor lstm_forward(const LstmLayer& layer, const Tensor& seq, std::size_t batch = 1);

// Zero same-padding 1-D convolution along the sequence axis (cross-correlation).
struct Conv1D {
  Tensor kernel;  // [out_channels, in_channels, width]
  Tensor bias;    // [out_channels]

  static Conv1D init(std::size_t in_channels, std::size_t out_channels, std::size_t width, Rng& rng);
  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t width() const { return kernel.dim(2); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// x: [N*B, in_channels] -> [N*B, out_channels].
Tensor conv1d_forward(const Conv1D& layer, const Tensor& x, std::size_t batch = 1);

struct Dropout {
  double rate = 0.0;
  bool training = false;
};

// Inverted dropout in training mode, identity otherwise.
Tensor dropout_apply(const Dropout& d, const Tensor& x, Rng& rng);

inline constexpr std::size_t kStepEmbeddingDim = 64;

// Raw sinusoidal step features: 32 sines then 32 cosines at
// frequencies 10^(4k/31). No range check, so t = 0 is allowed.
std::vector<double> sinusoidal_embedding(double t, std::size_t dim = kStepEmbeddingDim);

// Step embedding for 1 <= t <= total_steps, shape [dim].
Tensor step_embedding(int t, int total_steps, std::size_t dim = kStepEmbeddingDim);

// SiLU(FC(SiLU(FC(e)))): [B, 64] -> [B, H].
struct StepEmbedMlp {
  DenseLayer first;
  DenseLayer second;

  static StepEmbedMlp init(std::size_t embed_dim, std::size_t hidden, Rng& rng);
  Tensor forward(const Tensor& e) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor step_embed_mlp(const StepEmbedMlp& mlp, const Tensor& e);

// Stack of 1x1 convolutions mapping the 1-channel condition to H channels,
// SiLU between layers, none after the last.
struct ConditionEmbed {
  std::vector<Conv1D> layers;
  std::size_t seq_len = 24;

  static ConditionEmbed init(std::size_t hidden, std::size_t seq_len, std::size_t depth, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// c: [N*B, 1] time-major with N == embed.seq_len -> [N*B, H].
Tensor condition_embed(const ConditionEmbed& embed, const Tensor& c, std::size_t batch = 1);

}  // namespace dalnet
