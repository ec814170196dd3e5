#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "xtal/checkpoint.hpp"
#include "xtal/diffusion.hpp"
#include "xtal/errors.hpp"
#include "xtal/model.hpp"
#include "xtal/train.hpp"

using namespace xtal;

namespace {

ModelConfig tiny(Variant v, AtomMode m = AtomMode::TwoD) {
  ModelConfig c;
  c.variant = v;
  c.mode = m;
  c.hidden_dim = 8;
  c.num_layers = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.atom_layers = 2;
  c.lattice_layers = 1;
  c.joint_layers = 1;
  return c;
}

void randomize_all(ModelParameters& params, std::uint64_t seed, double scale = 0.1) {
  Rng rng(seed);
  for (auto& m : params.values)
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
}

std::vector<TrainItem> small_batch(AtomMode mode, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CrystalTensor> data{gaussian_like(mode, rng), gaussian_like(mode, rng)};
  std::vector<int> idx{0, 1};
  auto sched = NoiseSchedule::linear(50);
  Rng draw(seed + 1);
  return make_train_items(data, idx, sched, draw);
}

}  // namespace

TEST_CASE("parameter layout is consistent and uniquely named") {
  for (Variant v : {Variant::Unified, Variant::DualStream}) {
    ModelConfig cfg = ModelConfig::desk(v);
    auto layout = parameter_layout(cfg);
    std::set<std::string> names;
    std::int64_t total = 0;
    for (const auto& spec : layout) {
      CHECK(names.insert(spec.name).second);
      CHECK(spec.rows > 0);
      CHECK(spec.cols > 0);
      total += static_cast<std::int64_t>(spec.rows) * spec.cols;
    }
    CHECK(total == parameter_count(cfg));

    auto params = ModelParameters::init(cfg, 11);
    REQUIRE(params.values.size() == layout.size());
    CHECK(params.count() == total);
    for (size_t i = 0; i < layout.size(); ++i) {
      CHECK(params.values[i].rows() == layout[i].rows);
      CHECK(params.values[i].cols() == layout[i].cols);
      if (layout[i].zero_init) CHECK(params.values[i].cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(params.at("embed.lattice.w").rows() == 3);
  }
}

TEST_CASE("init is seeded and draws at the documented scale") {
  ModelConfig cfg = ModelConfig::desk();
  auto a = ModelParameters::init(cfg, 5);
  auto b = ModelParameters::init(cfg, 5);
  auto c = ModelParameters::init(cfg, 6);
  bool differs = false;
  for (size_t i = 0; i < a.values.size(); ++i) {
    CHECK((a.values[i] - b.values[i]).cwiseAbs().maxCoeff() == 0.0);
    if ((a.values[i] - c.values[i]).cwiseAbs().maxCoeff() != 0.0) differs = true;
  }
  CHECK(differs);

  // Sample std of a large non-zero-init tensor should sit near 0.02.
  const auto& w = a.at("block0.attn.wq");
  double n = static_cast<double>(w.size());
  double mean = w.sum() / n;
  double var = (w.array() - mean).square().sum() / n;
  CHECK(std::sqrt(var) == doctest::Approx(0.02).epsilon(0.15));
}

TEST_CASE("fresh models predict exactly zero") {
  for (Variant v : {Variant::Unified, Variant::DualStream}) {
    for (AtomMode m : {AtomMode::TwoD, AtomMode::OneD}) {
      auto params = ModelParameters::init(tiny(v, m), 3);
      Rng rng(9);
      CrystalTensor state = gaussian_like(m, rng);
      NetOutput out = forward_one(params, state, 17);
      CHECK(out.lattice.cwiseAbs().maxCoeff() == 0.0);
      CHECK(out.atoms.rows() == kMaxAtoms);
      CHECK(out.atoms.cols() == feature_dim(m));
      CHECK(out.atoms.cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("time features follow the sinusoidal recipe") {
  auto feat = time_features(7, 8);
  REQUIRE(feat.size() == 8);
  for (int k = 0; k < 4; ++k) {
    double freq = std::pow(10000.0, -k / 4.0);
    CHECK(feat(k) == doctest::Approx(std::sin(7.0 * freq)).epsilon(1e-12));
    CHECK(feat(4 + k) == doctest::Approx(std::cos(7.0 * freq)).epsilon(1e-12));
  }
  CHECK((time_features(3, 8) - time_features(4, 8)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("attention softmax rows sum to one") {
  ModelConfig cfg = ModelConfig::desk(Variant::Unified);
  auto params = ModelParameters::init(cfg, 21);
  randomize_all(params, 22, 0.05);
  Rng rng(23);
  std::vector<CrystalTensor> states{gaussian_like(cfg.mode, rng), gaussian_like(cfg.mode, rng)};
  ForwardTrace trace;
  forward_batch(params, states, 12, &trace);
  REQUIRE(trace.softmax_row_sums.size() ==
          static_cast<size_t>(cfg.num_layers * 2 * cfg.num_heads));
  for (const auto& sums : trace.softmax_row_sums) {
    CHECK(sums.size() == cfg.tokens());
    for (int i = 0; i < sums.size(); ++i) CHECK(std::abs(sums(i) - 1.0) < 1e-6);
  }

  ModelConfig dual = ModelConfig::desk(Variant::DualStream);
  auto dparams = ModelParameters::init(dual, 31);
  randomize_all(dparams, 32, 0.05);
  ForwardTrace dtrace;
  forward_batch(dparams, states, 12, &dtrace);
  CHECK(!dtrace.softmax_row_sums.empty());
  for (const auto& sums : dtrace.softmax_row_sums)
    for (int i = 0; i < sums.size(); ++i) CHECK(std::abs(sums(i) - 1.0) < 1e-6);
}

TEST_CASE("batched forward matches single forward") {
  for (Variant v : {Variant::Unified, Variant::DualStream}) {
    auto params = ModelParameters::init(tiny(v), 41);
    randomize_all(params, 42);
    Rng rng(43);
    std::vector<CrystalTensor> states;
    for (int i = 0; i < 3; ++i) states.push_back(gaussian_like(AtomMode::TwoD, rng));
    auto batched = forward_batch(params, states, 5);
    REQUIRE(batched.size() == 3);
    for (size_t i = 0; i < states.size(); ++i) {
      NetOutput single = forward_one(params, states[i], 5);
      CHECK((batched[i].lattice - single.lattice).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((batched[i].atoms - single.atoms).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("loss_value agrees with the tape loss") {
  for (Variant v : {Variant::Unified, Variant::DualStream}) {
    auto params = ModelParameters::init(tiny(v), 51);
    randomize_all(params, 52);
    auto batch = small_batch(AtomMode::TwoD, 53);
    LossWeights w = LossWeights::defaults(AtomMode::TwoD);
    LossBreakdown plain = loss_value(params, batch, w);
    LossBreakdown taped = loss_and_gradients(params, batch, w);
    CHECK(std::abs(plain.total - taped.total) <= 1e-12);
    CHECK(std::abs(plain.lattice - taped.lattice) <= 1e-12);
    CHECK(std::abs(plain.atoms - taped.atoms) <= 1e-12);
  }
}

TEST_CASE("tape gradients match finite differences") {
  for (Variant v : {Variant::Unified, Variant::DualStream}) {
    CAPTURE(variant_name(v));
    auto params = ModelParameters::init(tiny(v), 61);
    randomize_all(params, 62);
    auto batch = small_batch(AtomMode::TwoD, 63);
    LossWeights w = LossWeights::defaults(AtomMode::TwoD);
    loss_and_gradients(params, batch, w);
    std::vector<Eigen::MatrixXd> grads = params.grads;

    const double h = 1e-5;
    for (size_t i = 0; i < params.values.size(); ++i) {
      auto& m = params.values[i];
      int rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
      for (auto [r, c] : {std::pair{0, 0}, std::pair{rows - 1, cols - 1}}) {
        double keep = m(r, c);
        m(r, c) = keep + h;
        double up = loss_value(params, batch, w).total;
        m(r, c) = keep - h;
        double down = loss_value(params, batch, w).total;
        m(r, c) = keep;
        double fd = (up - down) / (2.0 * h);
        double an = grads[i](r, c);
        CAPTURE(params.layout[i].name);
        CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(fd), std::abs(an)) + 1e-6);
      }
    }
  }
}

TEST_CASE("gradients blow up honestly on non-finite loss") {
  auto params = ModelParameters::init(tiny(Variant::Unified), 71);
  randomize_all(params, 72);
  params.values[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  auto batch = small_batch(AtomMode::TwoD, 73);
  LossWeights w = LossWeights::defaults(AtomMode::TwoD);
  CHECK_THROWS_AS(loss_and_gradients(params, batch, w), Error);
}

TEST_CASE("dual-stream parameter budget stays close to unified") {
  for (AtomMode m : {AtomMode::TwoD, AtomMode::OneD}) {
    auto unified = parameter_count(ModelConfig::full(Variant::Unified, m));
    auto dual = parameter_count(ModelConfig::full(Variant::DualStream, m));
    double ratio = std::abs(static_cast<double>(dual - unified)) / static_cast<double>(unified);
    CHECK(ratio < 0.15);
  }
}

TEST_CASE("checkpoint round trip preserves model and provenance") {
  oracle::TempDir dir("ckpt");
  auto params = ModelParameters::init(tiny(Variant::DualStream, AtomMode::OneD), 81);
  randomize_all(params, 82);
  CheckpointMeta meta;
  meta.epoch = 37;
  meta.seed = 99;
  meta.config_hash = "00d1e2f3a4b5c697";
  meta.command = "xtalgen train --cache cache.bin";
  std::string path = (dir.path() / "model.ckpt").string();
  save_checkpoint(path, params, meta);

  auto [loaded, got] = load_checkpoint(path);
  CHECK(loaded.config == params.config);
  CHECK(got.epoch == meta.epoch);
  CHECK(got.seed == meta.seed);
  CHECK(got.config_hash == meta.config_hash);
  CHECK(got.command == meta.command);
  REQUIRE(loaded.values.size() == params.values.size());
  double worst = 0.0;
  for (size_t i = 0; i < params.values.size(); ++i)
    for (int r = 0; r < params.values[i].rows(); ++r)
      for (int c = 0; c < params.values[i].cols(); ++c)
        worst = std::max(worst, oracle::rel_err(params.values[i](r, c),
                                                loaded.values[i](r, c)));
  // Tensors are stored as float32; doubles survive to single precision.
  CHECK(worst < 1e-6);
}

TEST_CASE("corrupt checkpoints are rejected") {
  oracle::TempDir dir("ckpt_bad");
  std::string garbage = (dir.path() / "garbage.ckpt").string();
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "this is not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(garbage), Error);

  auto params = ModelParameters::init(tiny(Variant::Unified), 91);
  std::string path = (dir.path() / "model.ckpt").string();
  save_checkpoint(path, params, {});
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  CHECK_THROWS_AS(load_checkpoint((dir.path() / "missing.ckpt").string()), Error);
}

TEST_CASE("impossible model configs are rejected") {
  ModelConfig cfg = ModelConfig::desk();
  cfg.hidden_dim = 63;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ModelConfig::desk();
  cfg.num_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ModelConfig::desk();
  cfg.num_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ModelConfig::desk(Variant::DualStream);
  cfg.joint_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(!variant_from_name("mixed").has_value());
  CHECK(variant_from_name("dual") == Variant::DualStream);
}
