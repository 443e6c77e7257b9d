// Checkpoint layout (all integers and IEEE-754 doubles little-endian):
//
//   magic        8 bytes  "DALNETCK"
//   version      u32
//   init seed    u64
//   hyperparameters:
//     hidden, seq_len u64; steps i64; head_dim, temporal_dim,
//     condition_layers, head_kernel u64; dropout f64;
//     head count u32, then per head: kind u8, window i32, dilation i32
//   tensor count u32, then per tensor:
//     name length u16, name bytes, ndim u8, dims u64[ndim], values f64[numel]
//   checksum     u64 FNV-1a over every preceding byte

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dalnet/denoiser.hpp"

namespace dalnet {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'L', 'N', 'E', 'T', 'C', 'K'};

std::uint64_t fnv1a(const std::vector<unsigned char>& bytes, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    std::uint64_t bits;
    if constexpr (std::is_same_v<T, double>) {
      bits = std::bit_cast<std::uint64_t>(v);
    } else {
      bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
      return std::bit_cast<double>(bits);
    } else {
      return static_cast<T>(bits);
    }
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CheckpointError(CheckpointError::Kind::corrupt, "checkpoint is truncated or corrupt");
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const DalnetModel& model, const std::filesystem::path& path) {
  const auto& cfg = model.config();
  Writer w;
  w.put_bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(model.seed());
  w.put<std::uint64_t>(cfg.hidden);
  w.put<std::uint64_t>(cfg.seq_len);
  w.put<std::int64_t>(cfg.steps);
  w.put<std::uint64_t>(cfg.head_dim);
  w.put<std::uint64_t>(cfg.temporal_dim);
  w.put<std::uint64_t>(cfg.condition_layers);
  w.put<std::uint64_t>(cfg.head_kernel);
  w.put<double>(cfg.dropout);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.heads.size()));
  for (const auto& h : cfg.heads) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(h.kind));
    w.put<std::int32_t>(h.window);
    w.put<std::int32_t>(h.dilation);
  }
  const auto params = model.named_parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.ndim()));
    for (auto d : t.shape()) w.put<std::uint64_t>(d);
    for (double v : t.data()) w.put<double>(v);
  }
  w.put<std::uint64_t>(fnv1a(w.bytes, w.bytes.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "failed writing checkpoint '" + path.string() + "'");
}

DalnetModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto corrupt = [&](const std::string& why) {
    return CheckpointError(CheckpointError::Kind::corrupt, "checkpoint '" + path.string() + "': " + why);
  };
  if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw corrupt("not a checkpoint file (bad magic or truncated)");
  }
  Reader header(bytes, bytes.size());
  header.get_string(sizeof kMagic);
  const auto version = header.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::version, "checkpoint '" + path.string() + "' has version " +
                                                              std::to_string(version) + ", expected " +
                                                              std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < 8 + header.position()) throw corrupt("truncated");
  const std::size_t body_end = bytes.size() - 8;
  std::uint64_t stored_sum = 0;
  for (std::size_t i = 0; i < 8; ++i) stored_sum |= static_cast<std::uint64_t>(bytes[body_end + i]) << (8 * i);
  if (stored_sum != fnv1a(bytes, body_end)) throw corrupt("checksum mismatch (truncated or corrupt)");

  Reader r(bytes, body_end);
  r.get_string(sizeof kMagic);
  r.get<std::uint32_t>();
  const auto seed = r.get<std::uint64_t>();
  DalnetConfig cfg;
  cfg.hidden = r.get<std::uint64_t>();
  cfg.seq_len = r.get<std::uint64_t>();
  cfg.steps = static_cast<int>(r.get<std::int64_t>());
  cfg.head_dim = r.get<std::uint64_t>();
  cfg.temporal_dim = r.get<std::uint64_t>();
  cfg.condition_layers = r.get<std::uint64_t>();
  cfg.head_kernel = r.get<std::uint64_t>();
  cfg.dropout = r.get<double>();
  const auto n_heads = r.get<std::uint32_t>();
  if (n_heads > 4096) throw corrupt("implausible head count");
  cfg.heads.clear();
  for (std::uint32_t i = 0; i < n_heads; ++i) {
    MaskSpec spec;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 2) throw corrupt("unknown mask kind");
    spec.kind = static_cast<MaskKind>(kind);
    spec.window = r.get<std::int32_t>();
    spec.dilation = r.get<std::int32_t>();
    cfg.heads.push_back(spec);
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw corrupt(std::string("invalid hyperparameters: ") + e.what());
  }

  DalnetModel model = DalnetModel::init(cfg, seed);
  auto params = model.named_parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) {
    throw CheckpointError(CheckpointError::Kind::shape, "checkpoint holds " + std::to_string(count) +
                                                            " tensors, model expects " + std::to_string(params.size()));
  }
  for (auto& [name, tensor] : params) {
    const auto stored_name = r.get_string(r.get<std::uint16_t>());
    if (stored_name != name) {
      throw CheckpointError(CheckpointError::Kind::shape, "checkpoint tensor '" + stored_name + "' where '" + name +
                                                              "' was expected");
    }
    Shape shape(r.get<std::uint8_t>());
    for (auto& d : shape) d = r.get<std::uint64_t>();
    if (shape != tensor.shape()) {
      throw CheckpointError(CheckpointError::Kind::shape, "tensor '" + name + "' stored as " + shape_str(shape) +
                                                              ", model expects " + shape_str(tensor.shape()));
    }
    for (auto& v : tensor.mutable_data()) v = r.get<double>();
  }
  if (r.position() != body_end) throw corrupt("trailing bytes after tensors");
  return model;
}

DalnetModel load_checkpoint(const std::filesystem::path& path, const DalnetConfig& expected) {
  DalnetModel model = load_checkpoint(path);
  const auto& got = model.config();
  if (got.seq_len != expected.seq_len || got.hidden != expected.hidden || got.steps != expected.steps ||
      got.heads != expected.heads || got.head_dim != expected.head_dim || got.temporal_dim != expected.temporal_dim ||
      got.condition_layers != expected.condition_layers || got.head_kernel != expected.head_kernel) {
    throw CheckpointError(CheckpointError::Kind::shape,
                          "checkpoint '" + path.string() + "' architecture (N=" + std::to_string(got.seq_len) +
                              ", H=" + std::to_string(got.hidden) + ", T=" + std::to_string(got.steps) +
                              ") disagrees with the configuration (N=" + std::to_string(expected.seq_len) +
                              ", H=" + std::to_string(expected.hidden) + ", T=" + std::to_string(expected.steps) + ")");
  }
  return model;
}

}  // namespace dalnet
