#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cycledance/data.hpp"
#include "cycledance/metrics.hpp"

using namespace cycledance;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<MotionSequence> motions_of(const StyleDomain& d) {
  std::vector<MotionSequence> out;
  for (const auto& c : d.clips) out.push_back(c.motion);
  return out;
}

}  // namespace

TEST_CASE("generate_synthetic: deterministic per seed, aligned and width-valid") {
  auto [x1, y1] = generate_synthetic(smooth_style_spec(5), jerky_style_spec(6), 3, 3.0);
  auto [x2, y2] = generate_synthetic(smooth_style_spec(5), jerky_style_spec(6), 3, 3.0);
  REQUIRE(x1.clips.size() == 3);
  CHECK(x1.label == "X");
  CHECK(y1.label == "Y");
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(x1.clips[k].motion.data == x2.clips[k].motion.data);
    CHECK(y1.clips[k].audio.data == y2.clips[k].audio.data);
    CHECK(x1.clips[k].motion.n_frames == x1.clips[k].audio.n_frames);
    CHECK(x1.clips[k].motion.n_frames == 90);
  }

  auto [x3, _] = generate_synthetic(smooth_style_spec(7), jerky_style_spec(6), 3, 3.0);
  CHECK(x3.clips[0].motion.data != x1.clips[0].motion.data);

  SyntheticStyleSpec bad = smooth_style_spec(1);
  bad.jerkiness = 2.0;
  CHECK_THROWS_AS(generate_synthetic(bad, jerky_style_spec(2), 1, 3.0), ValidationError);
  CHECK_THROWS_AS(generate_synthetic(smooth_style_spec(1), jerky_style_spec(2), 0, 3.0),
                  ValidationError);
}

TEST_CASE("jerkiness shapes the acceleration histogram") {
  SyntheticStyleSpec smooth = smooth_style_spec(11);
  SyntheticStyleSpec jerky = smooth;  // same oscillators, only the hold differs
  jerky.jerkiness = 1.0;
  auto [dx, dy] = generate_synthetic(smooth, jerky, 4, 4.0);

  auto accel_curve = [](const StyleDomain& d) {
    std::vector<double> s;
    for (const auto& clip : d.clips) {
      KinematicFeatures kin = kinematic_features(clip.motion);
      for (std::size_t i = 0; i < kin.n_a; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < kMotionDim; ++j)
          acc += std::abs(kin.accelerations[i * kMotionDim + j]);
        s.push_back(acc / kMotionDim);
      }
    }
    std::sort(s.begin(), s.end());
    return s;
  };
  auto smooth_curve = accel_curve(dx);
  auto jerky_curve = accel_curve(dy);
  double smooth_max = smooth_curve.back();
  double smooth_median = smooth_curve[smooth_curve.size() / 2];
  double jerky_median = jerky_curve[jerky_curve.size() / 2];
  double jerky_p99 = jerky_curve[jerky_curve.size() * 99 / 100];

  // Held frames concentrate near zero; beat transitions form the heavy tail.
  CHECK(jerky_median < smooth_median);
  double tail_frac =
      static_cast<double>(std::count_if(jerky_curve.begin(), jerky_curve.end(),
                                        [&](double v) { return v > smooth_max; })) /
      jerky_curve.size();
  CHECK(tail_frac > 0.02);
  double separation_factor = jerky_p99 / smooth_max;
  MESSAGE("histogram separation factor (jerky p99 / smooth max): ", separation_factor);
  CHECK(separation_factor > 2.0);
}

TEST_CASE("benchmark signal: cross-style MFD at least 10x same-style MFD") {
  auto [dx, dy] =
      generate_synthetic(smooth_style_spec(42), jerky_style_spec(43), 8, 4.0);
  auto xm = motions_of(dx);
  auto ym = motions_of(dy);
  std::vector<MotionSequence> xa(xm.begin(), xm.begin() + 4);
  std::vector<MotionSequence> xb(xm.begin() + 4, xm.end());
  double same_style = mfd(xa, xb);
  double cross_style = mfd(xm, ym);
  CHECK(cross_style >= 10.0 * same_style);
}

TEST_CASE("motion/audio CSV round trips and loader validation") {
  auto dir = temp_dir("cd_csv_test");
  auto [dx, dy] = generate_synthetic(smooth_style_spec(3), jerky_style_spec(4), 2, 2.0);

  save_motion_csv(dir / "m.csv", dx.clips[0].motion);
  MotionSequence m = load_motion_csv(dir / "m.csv");
  CHECK(m.data == dx.clips[0].motion.data);
  CHECK(m.fps == 30.0);

  save_audio_csv(dir / "a.csv", dx.clips[0].audio);
  AudioSequence a = load_audio_csv(dir / "a.csv");
  CHECK(a.data == dx.clips[0].audio.data);

  std::ofstream(dir / "bad.csv") << "1,2,3\n";
  CHECK_THROWS_AS(load_motion_csv(dir / "bad.csv"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("save/load domain round trip; malformed clips rejected by name") {
  auto dir = temp_dir("cd_domain_test");
  auto [dx, dy] = generate_synthetic(smooth_style_spec(8), jerky_style_spec(9), 2, 2.0);
  save_domain(dir, dx);
  save_domain(dir, dy);
  Dataset ds = load_dataset(dir);
  REQUIRE(ds.x.clips.size() == 2);
  CHECK(ds.x.clips[0].motion.data == dx.clips[0].motion.data);
  CHECK(ds.y.clips[1].audio.data == dy.clips[1].audio.data);

  SUBCASE("empty dir errors") {
    auto empty = temp_dir("cd_empty_domain");
    CHECK_THROWS_AS(load_domain(empty), ValidationError);
    fs::remove_all(empty);
  }
  SUBCASE("NaN clip is rejected with the file named") {
    auto path = dir / "domain_X" / "clip_000.motion.csv";
    std::ofstream os(path);
    os << "fps,joints,layout_version\n30,21,1\n";
    for (int t = 0; t < 20; ++t) {
      for (int j = 0; j < 63; ++j) os << (j ? "," : "") << (t == 7 && j == 5 ? "nan" : "0.5");
      os << "\n";
    }
    os.close();
    try {
      load_domain(dir / "domain_X");
      FAIL("expected rejection");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("clip_000.motion.csv") != std::string::npos);
    }
  }
  SUBCASE("missing audio pair is rejected") {
    fs::remove(dir / "domain_Y" / "clip_001.audio.csv");
    CHECK_THROWS_AS(load_domain(dir / "domain_Y"), ValidationError);
  }
  fs::remove_all(dir);
}

TEST_CASE("sample_unpaired_batch: bounds, reproducibility, validation") {
  auto [dx, dy] = generate_synthetic(smooth_style_spec(12), jerky_style_spec(13), 2, 3.0);
  Rng rng(100);
  BatchPair batch = sample_unpaired_batch(dx, dy, 4, 32, rng);
  REQUIRE(batch.x.size() == 4);
  for (const auto& clip : batch.x) {
    CHECK(clip.motion.n_frames == 32);
    CHECK(clip.audio.n_frames == 32);
  }

  Rng r1(7), r2(7);
  BatchPair b1 = sample_unpaired_batch(dx, dy, 2, 32, r1);
  BatchPair b2 = sample_unpaired_batch(dx, dy, 2, 32, r2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(b1.x[i].motion.data == b2.x[i].motion.data);
    CHECK(b1.y[i].audio.data == b2.y[i].audio.data);
  }

  CHECK_THROWS_AS(sample_unpaired_batch(dx, dy, 1, 30, rng), ValidationError);
  CHECK_THROWS_AS(sample_unpaired_batch(dx, dy, 1, 128, rng), ValidationError);
}

TEST_CASE("window starts are uniform (chi-squared over 1e5 draws)") {
  // One clip of 90 frames, window 32 -> starts in [0, 58]; bin and test.
  auto [dx, dy] = generate_synthetic(smooth_style_spec(21), jerky_style_spec(22), 1, 3.0);
  const std::size_t n_starts = 90 - 32 + 1;
  std::vector<std::size_t> counts(n_starts, 0);
  Rng rng(12345);
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) {
    BatchPair b = sample_unpaired_batch(dx, dy, 1, 32, rng);
    // recover the start from the window's first frame by matching data
    const double* w0 = b.x[0].motion.frame(0);
    bool found = false;
    for (std::size_t s = 0; s < n_starts && !found; ++s) {
      if (std::equal(w0, w0 + kMotionDim, dx.clips[0].motion.frame(s))) {
        ++counts[s];
        found = true;
      }
    }
    REQUIRE(found);
  }
  double expected = static_cast<double>(draws) / n_starts;
  double chi2 = 0.0;
  for (std::size_t s = 0; s < n_starts; ++s) {
    double d = counts[s] - expected;
    chi2 += d * d / expected;
  }
  // df = 58; mean 58, sd ~ sqrt(116) ~ 10.8; 120 is beyond the 1e-5 quantile.
  CHECK(chi2 < 120.0);
}

TEST_CASE("pad_to_multiple repeats the last frame") {
  auto [dx, dy] = generate_synthetic(smooth_style_spec(31), jerky_style_spec(32), 1, 2.0);
  MotionSequence m = dx.clips[0].motion;
  m.n_frames = 61;
  m.data.resize(61 * kMotionDim);
  MotionSequence padded = pad_to_multiple(m, 4);
  CHECK(padded.n_frames == 64);
  for (std::size_t t = 61; t < 64; ++t)
    for (std::size_t j = 0; j < kMotionDim; ++j)
      CHECK(padded.frame(t)[j] == m.frame(60)[j]);
}
