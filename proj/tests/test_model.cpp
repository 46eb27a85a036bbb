#include <doctest.h>

#include <cmath>

#include "cycledance/model.hpp"
#include "test_util.hpp"

using namespace cycledance;
using cdtest::random_tensor;

namespace {

ArchConfig tiny_arch(bool motion_tx, bool music) {
  ArchConfig a;
  a.base_channels = 8;
  a.n_res_blocks = 1;
  a.transformer.layers = 1;
  a.transformer.heads = 4;
  a.transformer.model_dim = 16;
  a.transformer.ff_dim = 32;
  a.use_motion_transformer = motion_tx;
  a.use_music_pathway = music;
  return a;
}

}  // namespace

TEST_CASE("generator: shape contract and finite outputs at init") {
  Rng rng(1);
  Generator g;
  g.init(tiny_arch(true, true), rng);
  Rng drng(2);
  Tensor motion = random_tensor({64, 63}, drng, -1, 1, false);
  Tensor music = random_tensor({64, 35}, drng, -1, 1, false);
  Tensor out = g.forward(motion, &music);
  CHECK(out.shape() == Shape{64, 63});
  for (double v : out.data()) CHECK(std::isfinite(v));
}

TEST_CASE("generator: length contract errors instruct padding") {
  Rng rng(1);
  Generator g;
  g.init(tiny_arch(false, false), rng);
  Rng drng(2);
  Tensor bad_len = random_tensor({30, 63}, drng, -1, 1, false);
  try {
    g.forward(bad_len, nullptr);
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("pad") != std::string::npos);
  }
  Tensor too_short = random_tensor({12, 63}, drng, -1, 1, false);
  CHECK_THROWS_AS(g.forward(too_short, nullptr), ValidationError);
}

TEST_CASE("generator without music pathway ignores music bit-exactly") {
  Rng rng(3);
  Generator g;
  g.init(tiny_arch(true, false), rng);
  Rng drng(4);
  Tensor motion = random_tensor({32, 63}, drng, -1, 1, false);
  Tensor music1 = random_tensor({32, 35}, drng, -1, 1, false);
  Tensor music2 = random_tensor({32, 35}, drng, -1, 1, false);
  Tensor out1 = g.forward(motion, &music1);
  Tensor out2 = g.forward(motion, &music2);
  Tensor out3 = g.forward(motion, nullptr);
  CHECK(out1.data() == out2.data());
  CHECK(out1.data() == out3.data());
}

TEST_CASE("generator with music pathway requires music") {
  Rng rng(5);
  Generator g;
  g.init(tiny_arch(true, true), rng);
  Rng drng(6);
  Tensor motion = random_tensor({32, 63}, drng, -1, 1, false);
  CHECK_THROWS_AS(g.forward(motion, nullptr), ValidationError);
}

TEST_CASE("jacobian probe: transformer mixes beyond the conv receptive field") {
  const std::size_t t_len = 64;
  Rng drng(8);
  std::vector<double> mdata(t_len * 63);
  for (double& v : mdata) v = drng.uniform(-1, 1);

  auto grad_support = [&](bool with_transformer) {
    Rng rng(7);
    Generator g;
    g.init(tiny_arch(with_transformer, false), rng);
    Tensor motion = tensor({t_len, 63}, mdata, true);
    Tensor out = g.forward(motion, nullptr);
    // loss reads only output frame 0
    Tensor first = narrow(out, 0, 0, 1);
    backward(sum(first));
    std::vector<double> row_norm(t_len, 0.0);
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t j = 0; j < 63; ++j)
        row_norm[t] += std::abs(motion.grad()[t * 63 + j]);
    return row_norm;
  };

  auto conv_only = grad_support(false);
  auto with_tx = grad_support(true);

  std::size_t conv_extent = 0;
  for (std::size_t t = 0; t < t_len; ++t)
    if (conv_only[t] != 0.0) conv_extent = t;
  // A stride-limited conv stack cannot reach the clip's far end.
  CHECK(conv_extent < t_len - 8);
  // Self-attention reaches every frame, in particular the last one.
  CHECK(with_tx[t_len - 1] != 0.0);
  std::size_t tx_extent = 0;
  for (std::size_t t = 0; t < t_len; ++t)
    if (with_tx[t] != 0.0) tx_extent = t;
  CHECK(tx_extent > conv_extent);
}

TEST_CASE("discriminator: outputs in (0,1); zeroed weights give exactly 0.5") {
  Rng rng(9);
  Discriminator d;
  d.init(tiny_arch(true, true), rng);
  Rng drng(10);
  Tensor motion = random_tensor({64, 63}, drng, -2, 2, false);
  Tensor out = d.forward(motion);
  REQUIRE(out.ndim() == 2);
  for (double v : out.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  std::vector<Param> params;
  d.collect("d", params);
  for (auto& p : params)
    p.value.set_data(std::vector<double>(p.value.size(), 0.0));
  Tensor flat = d.forward(motion);
  for (double v : flat.data()) CHECK(v == 0.5);

  CHECK_THROWS_AS(d.forward(random_tensor({8, 63}, drng, -1, 1, false)),
                  ValidationError);
}

TEST_CASE("discriminator: patch grid size matches the stride arithmetic for T=64") {
  Rng rng(11);
  Discriminator d;
  d.init(tiny_arch(true, true), rng);
  Rng drng(12);
  Tensor motion = random_tensor({64, 63}, drng, -1, 1, false);
  Tensor out = d.forward(motion);
  // two k5 s2 p2 stages on [63, 64], then a k3 s1 p1 conv
  auto down = [](std::size_t n) { return (n + 4 - 5) / 2 + 1; };
  std::size_t h = down(down(63));
  std::size_t w = down(down(64));
  CHECK(out.shape() == Shape{h, w});
}

TEST_CASE("ablations: flags per configuration") {
  ArchConfig base = tiny_arch(true, true);

  AblationSpec b = build_ablation("baseline", base);
  CHECK(!b.arch.use_motion_transformer);
  CHECK(!b.arch.use_music_pathway);
  CHECK(!b.curriculum);

  AblationSpec t = build_ablation("transgan", base);
  CHECK(t.arch.use_motion_transformer);
  CHECK(!t.arch.use_music_pathway);
  CHECK(!t.curriculum);

  AblationSpec tcl = build_ablation("transgan_cl", base);
  CHECK(tcl.arch.use_motion_transformer == t.arch.use_motion_transformer);
  CHECK(tcl.arch.use_music_pathway == t.arch.use_music_pathway);
  CHECK(tcl.curriculum);
  CHECK(tcl.arch.canonical_string() == t.arch.canonical_string());

  AblationSpec x = build_ablation("crosstransgan", base);
  CHECK(x.arch.use_music_pathway);
  CHECK(!x.curriculum);

  AblationSpec cd = build_ablation("cycledance", base);
  CHECK(cd.arch.use_motion_transformer);
  CHECK(cd.arch.use_music_pathway);
  CHECK(cd.curriculum);

  CHECK_THROWS_AS(build_ablation("dance_dance_revolution", base), ValidationError);
}

TEST_CASE("ablations: parameter-count monotonicity") {
  ArchConfig base = tiny_arch(true, true);
  auto count = [&base](const std::string& name) {
    AblationSpec spec = build_ablation(name, base);
    return TransferModel::build(spec.arch, 1).parameter_count();
  };
  std::size_t baseline = count("baseline");
  std::size_t transgan = count("transgan");
  std::size_t crosstransgan = count("crosstransgan");
  std::size_t cycledance = count("cycledance");
  CHECK(baseline < transgan);
  CHECK(transgan <= crosstransgan);
  CHECK(crosstransgan == cycledance);
}

TEST_CASE("position embedding breaks permutation equivariance") {
  Rng rng(13);
  TransformerConfig cfg{1, 4, 16, 32};
  nn::TransformerEncoder enc;
  enc.init(cfg, rng);

  Rng drng(14);
  const std::size_t t_len = 12;
  Tensor tokens = random_tensor({t_len, 16}, drng, -1, 1, false);
  std::vector<double> reversed(t_len * 16);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t j = 0; j < 16; ++j)
      reversed[t * 16 + j] = tokens.data()[(t_len - 1 - t) * 16 + j];
  Tensor tokens_rev = tensor({t_len, 16}, reversed);

  // Without the embedding the encoder is permutation-equivariant.
  enc.add_position_embedding = false;
  Tensor plain = enc.forward(tokens);
  Tensor plain_rev = enc.forward(tokens_rev);
  double equivariance_gap = 0.0;
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t j = 0; j < 16; ++j)
      equivariance_gap = std::max(
          equivariance_gap, std::abs(plain.data()[t * 16 + j] -
                                     plain_rev.data()[(t_len - 1 - t) * 16 + j]));
  CHECK(equivariance_gap < 1e-9);

  // With it, reversing the frames genuinely changes the outputs.
  enc.add_position_embedding = true;
  Tensor pe = enc.forward(tokens);
  Tensor pe_rev = enc.forward(tokens_rev);
  double pe_gap = 0.0;
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t j = 0; j < 16; ++j)
      pe_gap = std::max(pe_gap, std::abs(pe.data()[t * 16 + j] -
                                         pe_rev.data()[(t_len - 1 - t) * 16 + j]));
  CHECK(pe_gap > 1e-3);
}

TEST_CASE("generator outputs depend on frame order (no permutation invariance)") {
  Rng rng(15);
  Generator g;
  g.init(tiny_arch(true, false), rng);
  Rng drng(16);
  const std::size_t t_len = 32;
  Tensor motion = random_tensor({t_len, 63}, drng, -1, 1, false);
  std::vector<double> reversed(t_len * 63);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t j = 0; j < 63; ++j)
      reversed[t * 63 + j] = motion.data()[(t_len - 1 - t) * 63 + j];
  Tensor out1 = g.forward(motion, nullptr);
  Tensor out2 = g.forward(tensor({t_len, 63}, reversed), nullptr);
  double diff = 0.0;
  for (std::size_t i = 0; i < out1.size(); ++i)
    diff = std::max(diff, std::abs(out1.data()[i] - out2.data()[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("transfer model: build, named params, transfer round trip") {
  ArchConfig arch = tiny_arch(true, true);
  TransferModel model = TransferModel::build(arch, 99);
  auto gp = model.generator_params();
  auto dp = model.discriminator_params();
  CHECK(!gp.empty());
  CHECK(dp.size() == 4 * 6);  // four discriminators, three layers of (w, b)
  CHECK(gp[0].name.rfind("g_xy.", 0) == 0);

  // 61-frame clip: padded internally, trimmed back
  MotionSequence m;
  m.n_frames = 61;
  m.data.assign(61 * kMotionDim, 0.0);
  Rng drng(17);
  for (double& v : m.data) v = drng.uniform(-1, 1);
  AudioSequence a;
  a.n_frames = 61;
  a.data.assign(61 * kAudioDim, 0.25);
  MotionSequence out = model.transfer(m, &a, true);
  CHECK(out.n_frames == 61);
  out.validate();

  CHECK_THROWS_AS(model.transfer(m, nullptr, true), ValidationError);

  // determinism of the whole transfer path
  MotionSequence out2 = model.transfer(m, &a, true);
  CHECK(out.data == out2.data);
}
