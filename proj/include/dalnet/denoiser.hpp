#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dalnet/attention.hpp"
#include "dalnet/diffusion.hpp"
#include "dalnet/layers.hpp"

namespace dalnet {

struct DalnetConfig {
  std::size_t hidden = 128;
  std::size_t seq_len = 24;
  int steps = 1000;  // T; bounds the step embedding
  std::size_t head_dim = 32;
  std::size_t temporal_dim = 32;
  std::vector<MaskSpec> heads = {MaskSpec::global(), MaskSpec::windowed(3), MaskSpec::windowed(6),
                                 MaskSpec::dilated(3, 1)};
  std::size_t condition_layers = 2;
  std::size_t head_kernel = 3;
  double dropout = 0.3;

  // Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const DalnetConfig&, const DalnetConfig&) = default;
};

/// Denoising network eps_theta(x_t, c, t): input projection, LSTM, additive
/// fusion with step and condition embeddings, TMSAB, and a 1-D conv head.
class DalnetModel : public TrainableDenoiser {
 public:
  static DalnetModel init(const DalnetConfig& config, std::uint64_t seed);

  Tensor predict_noise(const Tensor& xt, const Tensor& c, std::span<const int> steps,
                       const ForwardContext& ctx) const override;
  std::size_t sequence_length() const override { return config_.seq_len; }
  std::vector<Tensor> parameters() const override;

  // Stable, name-tagged enumeration used by the optimizer and checkpoints.
  std::vector<NamedTensor> named_parameters() const;
  std::size_t parameter_count() const;

  const DalnetConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

 private:
  DalnetConfig config_;
  std::uint64_t seed_ = 0;
  DenseLayer input_projection_;
  LstmLayer lstm_;
  StepEmbedMlp step_mlp_;
  ConditionEmbed condition_;
  Tmsab tmsab_;
  Conv1D head_hidden_;
  Conv1D head_out_;
};

// Single-sequence form: xt, c are [N, 1]; returns [N, 1] in eval mode.
Tensor predict_noise(const DalnetModel& model, const Tensor& xt, const Tensor& c, int t);

DalnetModel init_model(const DalnetConfig& config, std::uint64_t seed);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const DalnetModel& model, const std::filesystem::path& path);
DalnetModel load_checkpoint(const std::filesystem::path& path);
// Also requires the stored architecture to match `expected`.
DalnetModel load_checkpoint(const std::filesystem::path& path, const DalnetConfig& expected);

}  // namespace dalnet
