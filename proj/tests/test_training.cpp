#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cycledance/training.hpp"

using namespace cycledance;
namespace fs = std::filesystem;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.base_channels = 8;
  a.n_res_blocks = 1;
  a.transformer.layers = 1;
  a.transformer.heads = 4;
  a.transformer.model_dim = 16;
  a.transformer.ff_dim = 32;
  a.use_motion_transformer = true;
  a.use_music_pathway = true;
  return a;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 1;
  cfg.seed = 11;
  cfg.schedule.stages = {{0, 32}};
  cfg.weights.id_anneal_step = 1000;
  return cfg;
}

Dataset tiny_dataset(std::uint64_t seed = 50) {
  auto [dx, dy] = generate_synthetic(smooth_style_spec(seed), jerky_style_spec(seed + 1),
                                     2, 2.0);
  return Dataset{std::move(dx), std::move(dy)};
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<double>> snapshot(const std::vector<Param>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.push_back(p.value.data());
  return out;
}

}  // namespace

TEST_CASE("adam_update: zero grad leaves the parameter unchanged") {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0}, m(2, 0.0), v(2, 0.0);
  adam_update(p, g, m, v, 1, 0.1, 0.9, 0.999);
  CHECK(p == std::vector<double>{1.0, -2.0});
}

TEST_CASE("adam_update: first step with unit gradient moves by about -lr") {
  std::vector<double> p{0.0}, g{1.0}, m(1, 0.0), v(1, 0.0);
  adam_update(p, g, m, v, 1, 0.1, 0.9, 0.999);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam: 100-step trajectory on f(w) = w^2 matches a scalar oracle exactly") {
  // library path
  Tensor w = tensor({1}, {1.0}, true);
  Adam opt({{"w", w}}, 0.05, 0.9, 0.999, 1e-8);
  std::vector<double> trajectory;
  for (int i = 0; i < 100; ++i) {
    w.zero_grad();
    backward(mul(w, w));
    opt.step();
    trajectory.push_back(w.data()[0]);
  }

  // independent scalar oracle of the bias-corrected recurrence
  const double b1 = 0.9, b2 = 0.999;
  double wo = 1.0, mo = 0.0, vo = 0.0;
  for (int t = 1; t <= 100; ++t) {
    double grad = 2.0 * wo;
    mo = b1 * mo + (1.0 - b1) * grad;
    vo = b2 * vo + (1.0 - b2) * grad * grad;
    double mhat = mo / (1.0 - std::pow(b1, t));
    double vhat = vo / (1.0 - std::pow(b2, t));
    wo -= 0.05 * mhat / (std::sqrt(vhat) + 1e-8);
    REQUIRE(trajectory[t - 1] == wo);  // bit-exact
  }
}

TEST_CASE("curriculum_length: stage boundaries use the half-open rule") {
  CurriculumSchedule s;
  s.stages = {{0, 32}, {10, 64}, {20, 128}};
  s.enabled = true;
  CHECK(curriculum_length(s, 0) == 32);
  CHECK(curriculum_length(s, 9) == 32);
  CHECK(curriculum_length(s, 10) == 64);
  CHECK(curriculum_length(s, 15) == 64);
  CHECK(curriculum_length(s, 20) == 128);
  CHECK(curriculum_length(s, 1000) == 128);

  s.enabled = false;
  CHECK(curriculum_length(s, 0) == 128);

  CurriculumSchedule empty;
  empty.stages.clear();
  CHECK_THROWS_AS(curriculum_length(empty, 0), ValidationError);

  CurriculumSchedule bad;
  bad.stages = {{0, 32}, {5, 32}};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CurriculumSchedule not_div4;
  not_div4.stages = {{0, 30}};
  CHECK_THROWS_AS(not_div4.validate(), ValidationError);
}

TEST_CASE("train_step: zero lr keeps weights unchanged and losses repeat") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.g_lr = 0.0;
  cfg.d_lr = 0.0;
  Trainer trainer(TransferModel::build(tiny_arch(), 5), cfg, false);

  Rng rng(1);
  BatchPair batch = sample_unpaired_batch(ds.x, ds.y, 1, 32, rng);
  auto before = snapshot(trainer.model().parameters());
  LossRecord r1 = trainer.train_step(batch);
  auto after = snapshot(trainer.model().parameters());
  CHECK(before == after);

  LossRecord r2 = trainer.train_step(batch);
  CHECK(r1.g_total == r2.g_total);
  CHECK(r1.d_total == r2.d_total);
  CHECK(r1.cyc == r2.cyc);
}

TEST_CASE("parameter partition: D step never writes G params and vice versa") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = tiny_config();
  Trainer trainer(TransferModel::build(tiny_arch(), 6), cfg, false);
  Rng rng(2);
  BatchPair batch = sample_unpaired_batch(ds.x, ds.y, 1, 32, rng);

  auto g_before = snapshot(trainer.model().generator_params());
  trainer.discriminator_phase(batch);
  auto g_after = snapshot(trainer.model().generator_params());
  CHECK(g_before == g_after);

  auto d_before = snapshot(trainer.model().discriminator_params());
  trainer.generator_phase(batch);
  auto d_after = snapshot(trainer.model().discriminator_params());
  CHECK(d_before == d_after);
}

TEST_CASE("train_step: losses move the model (nonzero lr changes weights)") {
  Dataset ds = tiny_dataset();
  Trainer trainer(TransferModel::build(tiny_arch(), 7), tiny_config(), false);
  Rng rng(3);
  BatchPair batch = sample_unpaired_batch(ds.x, ds.y, 1, 32, rng);
  auto before = snapshot(trainer.model().parameters());
  LossRecord rec = trainer.train_step(batch);
  auto after = snapshot(trainer.model().parameters());
  CHECK(before != after);
  CHECK(std::isfinite(rec.g_total));
  CHECK(rec.cyc > 0.0);
  CHECK(rec.id > 0.0);
}

TEST_CASE("train: epochs = 0 returns the init checkpoint unchanged") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  auto dir = temp_dir("cd_train_zero");
  Trainer trainer(TransferModel::build(tiny_arch(), 8), cfg, false);
  auto init = snapshot(trainer.model().parameters());
  auto records = trainer.train(ds, dir);
  CHECK(records.empty());
  Trainer loaded = Trainer::load_checkpoint(dir / "checkpoint_final");
  CHECK(snapshot(loaded.model().parameters()) == init);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: resume then train reproduces the uninterrupted run bit-exactly") {
  Dataset ds = tiny_dataset(60);
  auto dir_full = temp_dir("cd_train_full");
  auto dir_half = temp_dir("cd_train_half");
  auto dir_resume = temp_dir("cd_train_resume");

  TrainConfig cfg = tiny_config();
  cfg.epochs = 2;
  Trainer full(TransferModel::build(tiny_arch(), 9), cfg, false);
  auto full_records = full.train(ds, dir_full);

  TrainConfig cfg_half = cfg;
  cfg_half.epochs = 1;
  Trainer half(TransferModel::build(tiny_arch(), 9), cfg_half, false);
  auto half_records = half.train(ds, dir_half);

  Trainer resumed = Trainer::load_checkpoint(dir_half / "checkpoint_final");
  CHECK(resumed.rng().serialize() == half.rng().serialize());
  resumed.set_epochs(2);
  auto resume_records = resumed.train(ds, dir_resume);

  REQUIRE(half_records.size() + resume_records.size() == full_records.size());
  for (std::size_t i = 0; i < resume_records.size(); ++i) {
    const LossRecord& a = resume_records[i];
    const LossRecord& b = full_records[half_records.size() + i];
    CHECK(a.step == b.step);
    CHECK(a.g_total == b.g_total);  // bit-exact
    CHECK(a.d_total == b.d_total);
    CHECK(a.cyc == b.cyc);
    CHECK(a.id == b.id);
  }
  CHECK(snapshot(resumed.model().parameters()) ==
        snapshot(full.model().parameters()));

  fs::remove_all(dir_full);
  fs::remove_all(dir_half);
  fs::remove_all(dir_resume);
}

TEST_CASE("train: determinism across identical runs; curriculum cuts clip lengths") {
  auto [dx, dy] = generate_synthetic(smooth_style_spec(70), jerky_style_spec(71), 2, 3.0);
  Dataset ds{std::move(dx), std::move(dy)};
  TrainConfig cfg = tiny_config();
  cfg.epochs = 2;
  cfg.schedule.stages = {{0, 32}, {1, 64}};

  auto dir1 = temp_dir("cd_det_1");
  auto dir2 = temp_dir("cd_det_2");
  Trainer t1(TransferModel::build(tiny_arch(), 12), cfg, true);
  Trainer t2(TransferModel::build(tiny_arch(), 12), cfg, true);
  auto r1 = t1.train(ds, dir1);
  auto r2 = t2.train(ds, dir2);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].g_total == r2[i].g_total);
    CHECK(r1[i].d_total == r2[i].d_total);
  }
  // stage boundary checkpoint exists for the epoch-1 length switch
  CHECK(fs::exists(dir1 / "checkpoint_epoch1" / "manifest.json"));

  // curriculum off: the final stage length is used from epoch 0
  Trainer t3(TransferModel::build(tiny_arch(), 12), cfg, false);
  CHECK(curriculum_length(cfg.schedule, 0) == 32);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("train: empty domain errors") {
  Dataset ds = tiny_dataset();
  ds.y.clips.clear();
  Trainer trainer(TransferModel::build(tiny_arch(), 13), tiny_config(), false);
  CHECK_THROWS_AS(trainer.train(ds, temp_dir("cd_empty_train")), ValidationError);
}

TEST_CASE("loss CSV format: step,loss_name,value") {
  std::vector<LossRecord> records(1);
  records[0].step = 3;
  records[0].g_adv_xy = 0.5;
  auto dir = temp_dir("cd_losscsv");
  write_loss_csv(dir / "losses.csv", records);
  std::ifstream is(dir / "losses.csv");
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(header == "step,loss_name,value");
  CHECK(first == "3,g_adv_xy,0.5");
  fs::remove_all(dir);
}

TEST_CASE("run config: JSON round trip and validation") {
  auto dir = temp_dir("cd_cfg");
  TrainConfig cfg = tiny_config();
  cfg.g_lr = 3e-4;
  train_config_to_json_file(cfg, dir / "cfg.json");
  TrainConfig back = train_config_from_json_file(dir / "cfg.json");
  CHECK(back.g_lr == cfg.g_lr);
  CHECK(back.schedule.stages == cfg.schedule.stages);
  CHECK(back.canonical_string() == cfg.canonical_string());

  std::ofstream(dir / "arch.json")
      << R"({"epochs": 4, "arch": {"base_channels": 8, "transformer": {"model_dim": 20, "heads": 4}}})";
  RunConfig rc = run_config_from_json_file(dir / "arch.json");
  CHECK(rc.train.epochs == 4);
  CHECK(rc.arch.base_channels == 8);
  CHECK(rc.arch.transformer.model_dim == 20);

  std::ofstream(dir / "bad.json") << R"({"batch_size": 0})";
  CHECK_THROWS_AS(run_config_from_json_file(dir / "bad.json"), ValidationError);
  fs::remove_all(dir);
}
