#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dalnet/denoiser.hpp"
#include "dalnet/errors.hpp"
#include "dalnet/ops.hpp"
#include "gradcheck.hpp"

using namespace dalnet;
namespace fs = std::filesystem;

namespace {

DalnetConfig tiny_config() {
  DalnetConfig c;
  c.hidden = 4;
  c.seq_len = 6;
  c.steps = 50;
  c.head_dim = 3;
  c.temporal_dim = 3;
  c.heads = {MaskSpec::global(), MaskSpec::windowed(1), MaskSpec::dilated(1, 1)};
  return c;
}

Tensor column(Rng& rng, std::size_t n) { return gradcheck::random_tensor({n, 1}, rng, 1.0, false); }

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dalnet_denoiser_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<double> flat(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("predict_noise shape and eval determinism") {
  const auto model = init_model(DalnetConfig{}, 1);
  Rng rng(2);
  const auto xt = column(rng, 24), c = column(rng, 24);
  const auto out = predict_noise(model, xt, c, 10);
  CHECK(out.shape() == Shape{24, 1});
  CHECK(flat(predict_noise(model, xt, c, 10)) == flat(out));
  CHECK_THROWS_AS(predict_noise(model, column(rng, 23), c, 10), ShapeError);
  CHECK_THROWS_AS(predict_noise(model, xt, c, 0), ShapeError);
  CHECK_THROWS_AS(predict_noise(model, xt, c, 1001), ShapeError);
}

TEST_CASE("output depends on the step and the condition") {
  const auto model = init_model(DalnetConfig{}, 3);
  Rng rng(4);
  const auto xt = column(rng, 24), c = column(rng, 24), c2 = column(rng, 24);
  const auto a = predict_noise(model, xt, c, 1);
  const auto b = predict_noise(model, xt, c, 500);
  const auto d = predict_noise(model, xt, c2, 1);
  double step_diff = 0.0, cond_diff = 0.0;
  for (std::size_t i = 0; i < 24; ++i) {
    step_diff = std::max(step_diff, std::abs(a[i] - b[i]));
    cond_diff = std::max(cond_diff, std::abs(a[i] - d[i]));
  }
  CHECK(step_diff > 1e-8);
  CHECK(cond_diff > 1e-8);
}

TEST_CASE("batched prediction equals per-curve prediction") {
  const auto cfg = tiny_config();
  const auto model = init_model(cfg, 5);
  Rng rng(6);
  const auto xt = gradcheck::random_tensor({3, 6}, rng, 1.0, false);
  const auto c = gradcheck::random_tensor({3, 6}, rng, 1.0, false);
  const std::vector<int> steps{1, 25, 50};
  const auto all = model.predict_noise(xt, c, steps, {});
  for (std::size_t b = 0; b < 3; ++b) {
    const auto one = predict_noise(model, reshape(slice_rows(xt, b, b + 1), {6, 1}),
                                   reshape(slice_rows(c, b, b + 1), {6, 1}), steps[b]);
    for (std::size_t i = 0; i < 6; ++i) CHECK(all.at(b, i) == doctest::Approx(one[i]).epsilon(1e-13));
  }
}

TEST_CASE("init examples") {
  const auto a = init_model(tiny_config(), 7);
  const auto b = init_model(tiny_config(), 7);
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  REQUIRE(pa.size() == pb.size());
  std::set<std::string> names;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(flat(pa[i].second) == flat(pb[i].second));
    names.insert(pa[i].first);
  }
  CHECK(names.size() == pa.size());
  CHECK(init_model(DalnetConfig{}, 1).parameter_count() > 10000);

  DalnetConfig degenerate = tiny_config();
  degenerate.hidden = 1;
  degenerate.head_dim = 1;
  degenerate.temporal_dim = 1;
  const auto small = init_model(degenerate, 8);
  Rng rng(9);
  CHECK(predict_noise(small, column(rng, 6), column(rng, 6), 3).shape() == Shape{6, 1});

  DalnetConfig bad = tiny_config();
  bad.hidden = 0;
  try {
    init_model(bad, 1);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.hidden") != std::string::npos);
  }
}

TEST_CASE("every parameter group receives gradient") {
  const auto model = init_model(tiny_config(), 10);
  Rng rng(11);
  const auto xt = gradcheck::random_tensor({4, 6}, rng, 1.0, false);
  const auto c = gradcheck::random_tensor({4, 6}, rng, 1.0, false);
  const std::vector<int> steps{3, 9, 27, 50};
  backward(gradcheck::project(model.predict_noise(xt, c, steps, {})));
  for (const auto& [name, t] : model.named_parameters()) {
    INFO(name);
    REQUIRE(t.has_grad());
    double mx = 0.0;
    for (double g : t.grad()) mx = std::max(mx, std::abs(g));
    CHECK(mx > 0.0);
  }
}

TEST_CASE("full tiny model passes a finite-difference check on 20 parameters") {
  const auto model = init_model(tiny_config(), 12);
  Rng rng(13);
  const auto xt = gradcheck::random_tensor({2, 6}, rng, 1.0, false);
  const auto c = gradcheck::random_tensor({2, 6}, rng, 1.0, false);
  const auto eps = gradcheck::random_tensor({2, 6}, rng, 1.0, false);
  const std::vector<int> steps{4, 40};
  const auto loss = [&] { return mean(square(sub(eps, model.predict_noise(xt, c, steps, {})))); };
  const auto params = model.parameters();
  std::vector<gradcheck::Probe> probes;
  for (int i = 0; i < 20; ++i) {
    const auto& p = params[rng.below(params.size())];
    probes.push_back({p, static_cast<std::size_t>(rng.below(p.numel()))});
  }
  CHECK(gradcheck::max_error(loss, probes) < 1e-3);
}

TEST_CASE("training mode applies dropout, eval mode does not") {
  const auto model = init_model(tiny_config(), 14);
  Rng rng(15);
  const auto xt = gradcheck::random_tensor({2, 6}, rng, 1.0, false);
  const auto c = gradcheck::random_tensor({2, 6}, rng, 1.0, false);
  const std::vector<int> steps{5, 5};
  const auto eval = model.predict_noise(xt, c, steps, {});
  Rng drop(16);
  const auto train = model.predict_noise(xt, c, steps, {true, &drop});
  CHECK(flat(eval) != flat(train));
  CHECK_THROWS_AS(model.predict_noise(xt, c, steps, {true, nullptr}), ShapeError);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  const auto model = init_model(tiny_config(), 17);
  const auto path = temp_path("roundtrip.bin");
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.config() == model.config());
  CHECK(loaded.seed() == model.seed());
  const auto a = model.named_parameters(), b = loaded.named_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(flat(a[i].second) == flat(b[i].second));
}

TEST_CASE("checkpoint errors") {
  const auto model = init_model(tiny_config(), 18);
  const auto path = temp_path("errors.bin");
  save_checkpoint(model, path);
  const auto size = fs::file_size(path);

  const auto truncated = temp_path("truncated.bin");
  fs::copy_file(path, truncated, fs::copy_options::overwrite_existing);
  fs::resize_file(truncated, size / 2);
  try {
    load_checkpoint(truncated);
    FAIL("expected corrupt");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::corrupt);
  }

  const auto flipped = temp_path("flipped.bin");
  fs::copy_file(path, flipped, fs::copy_options::overwrite_existing);
  {
    std::fstream f(flipped, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size / 2));
    f.put('\x5a');
  }
  try {
    load_checkpoint(flipped);
    FAIL("expected corrupt");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::corrupt);
  }

  const auto versioned = temp_path("version.bin");
  fs::copy_file(path, versioned, fs::copy_options::overwrite_existing);
  {
    std::fstream f(versioned, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    f.put('\x63');
  }
  try {
    load_checkpoint(versioned);
    FAIL("expected version");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::version);
  }

  DalnetConfig other = tiny_config();
  other.seq_len = 8;
  try {
    load_checkpoint(path, other);
    FAIL("expected shape");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::shape);
  }
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.bin")), CheckpointError);
}
