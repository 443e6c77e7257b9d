#include "dalnet/denoiser.hpp"

#include "dalnet/ops.hpp"

namespace dalnet {

void DalnetConfig::validate() const {
  if (hidden < 1) throw ConfigError("model.hidden must be >= 1");
  if (seq_len < 1) throw ConfigError("model.seq_len must be >= 1");
  if (steps < 2) throw ConfigError("model.steps must be >= 2");
  if (head_dim < 1) throw ConfigError("model.head_dim must be >= 1");
  if (temporal_dim < 1) throw ConfigError("model.temporal_dim must be >= 1");
  if (heads.empty()) throw ConfigError("model.heads must list at least one head");
  for (const auto& h : heads) {
    if (h.kind != MaskKind::global && h.window < 1) throw ConfigError("model.heads: window must be >= 1 in " + h.label());
    if (h.kind == MaskKind::dilated && h.dilation < 1) {
      throw ConfigError("model.heads: dilation must be >= 1 in " + h.label());
    }
  }
  if (condition_layers < 1) throw ConfigError("model.condition_layers must be >= 1");
  if (head_kernel < 1) throw ConfigError("model.head_kernel must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must be in [0, 1)");
}

DalnetModel DalnetModel::init(const DalnetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  DalnetModel m;
  m.config_ = config;
  m.seed_ = seed;
  const auto h = config.hidden;
  m.input_projection_ = DenseLayer::init(1, h, rng);
  m.lstm_ = LstmLayer::init(h, h, rng);
  m.step_mlp_ = StepEmbedMlp::init(kStepEmbeddingDim, h, rng);
  m.condition_ = ConditionEmbed::init(h, config.seq_len, config.condition_layers, rng);
  m.tmsab_ = Tmsab::init(h, config.seq_len, config.head_dim, config.temporal_dim, config.heads, rng);
  m.head_hidden_ = Conv1D::init(h, h, config.head_kernel, rng);
  m.head_out_ = Conv1D::init(h, 1, config.head_kernel, rng);
  return m;
}

DalnetModel init_model(const DalnetConfig& config, std::uint64_t seed) { return DalnetModel::init(config, seed); }

std::vector<NamedTensor> DalnetModel::named_parameters() const {
  std::vector<NamedTensor> out;
  input_projection_.collect("input_projection", out);
  lstm_.collect("lstm", out);
  step_mlp_.collect("step_mlp", out);
  condition_.collect("condition", out);
  tmsab_.collect("tmsab", out);
  head_hidden_.collect("head.conv0", out);
  head_out_.collect("head.conv1", out);
  return out;
}

std::vector<Tensor> DalnetModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t DalnetModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

namespace {
// [B, N] -> time-major column [N*B, 1].
Tensor to_time_major(const Tensor& x) {
  const auto b = x.dim(0), n = x.dim(1);
  return reshape(transpose(x), {n * b, 1});
}
}  // namespace

Tensor DalnetModel::predict_noise(const Tensor& xt, const Tensor& c, std::span<const int> steps,
                                  const ForwardContext& ctx) const {
  const auto n = config_.seq_len;
  if (xt.ndim() != 2 || xt.dim(1) != n || c.shape() != xt.shape()) {
    throw ShapeError("predict_noise: expected x_t and c of shape [B," + std::to_string(n) + "], got " +
                     shape_str(xt.shape()) + " and " + shape_str(c.shape()));
  }
  const auto batch = xt.dim(0);
  if (steps.size() != batch) throw ShapeError("predict_noise: need one diffusion step per batch row");
  if (ctx.training && ctx.rng == nullptr) throw ShapeError("predict_noise: training mode needs an RNG");
  const Dropout dropout{config_.dropout, ctx.training};

  std::vector<double> embeddings;
  embeddings.reserve(batch * kStepEmbeddingDim);
  for (int t : steps) {
    if (t < 1 || t > config_.steps) {
      throw ShapeError("predict_noise: step " + std::to_string(t) + " outside [1, " + std::to_string(config_.steps) + "]");
    }
    const auto e = sinusoidal_embedding(static_cast<double>(t));
    embeddings.insert(embeddings.end(), e.begin(), e.end());
  }
  const Tensor step_features = step_mlp_.forward(Tensor({batch, kStepEmbeddingDim}, std::move(embeddings)));

  Tensor hidden = lstm_forward(lstm_, input_projection_.forward(to_time_major(xt)), batch);
  if (ctx.training) hidden = dropout_apply(dropout, hidden, *ctx.rng);
  const Tensor cond = condition_embed(condition_, to_time_major(c), batch);
  const Tensor fused = add(add(hidden, tile_rows(step_features, n)), cond);

  Tensor attended = tmsab_forward(fused, tmsab_, batch);
  if (ctx.training) attended = dropout_apply(dropout, attended, *ctx.rng);
  const Tensor out = conv1d_forward(head_out_, silu(conv1d_forward(head_hidden_, attended, batch)), batch);
  return transpose(reshape(out, {n, batch}));
}

Tensor predict_noise(const DalnetModel& model, const Tensor& xt, const Tensor& c, int t) {
  const auto n = model.sequence_length();
  if (xt.shape() != Shape{n, 1} || c.shape() != Shape{n, 1}) {
    throw ShapeError("predict_noise: expected [" + std::to_string(n) + ",1] inputs, got " + shape_str(xt.shape()) +
                     " and " + shape_str(c.shape()));
  }
  const int steps[] = {t};
  const Tensor out = model.predict_noise(reshape(xt, {1, n}), reshape(c, {1, n}), steps, ForwardContext{});
  return reshape(out, {n, 1});
}

}  // namespace dalnet
