// cycledance: synthetic dance-style-transfer pipeline driver.
//
// Subcommands: synth-data, train, transfer, evaluate, ablate.
// Exit codes: 0 success, 2 validation error, 3 numeric failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cycledance/data.hpp"
#include "cycledance/metrics.hpp"
#include "cycledance/model.hpp"
#include "cycledance/training.hpp"

namespace fs = std::filesystem;
using namespace cycledance;

namespace {

std::size_t env_threads() {
  const char* v = std::getenv("CYCLEDANCE_THREADS");
  if (v == nullptr) return 1;
  long n = std::strtol(v, nullptr, 10);
  return n >= 1 ? static_cast<std::size_t>(n) : 1;
}

EvalDomain to_eval_domain(const StyleDomain& d) {
  EvalDomain out;
  for (const auto& clip : d.clips) {
    out.motions.push_back(clip.motion);
    out.audios.push_back(clip.audio);
  }
  return out;
}

TransferFn make_transfer(const TransferModel& model, bool x2y, bool identity_debug) {
  if (identity_debug)
    return [](const MotionSequence& m, const AudioSequence&) { return m; };
  return [&model, x2y](const MotionSequence& m, const AudioSequence& a) {
    return model.transfer(m, &a, x2y);
  };
}

int cmd_synth_data(const fs::path& out, std::uint64_t seed, std::size_t clips,
                   double seconds) {
  auto spec_x = smooth_style_spec(seed);
  auto spec_y = jerky_style_spec(seed + 1);
  auto [dx, dy] = generate_synthetic(spec_x, spec_y, clips, seconds);
  fs::create_directories(out);
  save_domain(out, dx);
  save_domain(out, dy);
  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.n_clips = clips;
  manifest.clip_seconds = seconds;
  manifest.spec_x = spec_x;
  manifest.spec_y = spec_y;
  save_manifest(out, manifest);
  std::cout << "wrote " << clips << " clips/domain (" << seconds << " s) to " << out
            << "\n";
  return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& out_dir,
              const std::string& config_path, const std::string& ablation,
              const std::string& resume, long long epochs_override) {
  Dataset dataset = load_dataset(data_dir);
  std::vector<LossRecord> records;
  if (!resume.empty()) {
    Trainer trainer = Trainer::load_checkpoint(resume);
    if (epochs_override >= 0)
      trainer.set_epochs(static_cast<std::size_t>(epochs_override));
    records = trainer.train(dataset, out_dir);
    write_loss_csv(out_dir / "losses.csv", records);
    std::cout << "resumed through epoch " << trainer.epoch() << ", step "
              << trainer.step() << "\n";
    return 0;
  }
  RunConfig cfg;
  if (!config_path.empty()) cfg = run_config_from_json_file(config_path);
  if (epochs_override >= 0) cfg.train.epochs = static_cast<std::size_t>(epochs_override);
  AblationSpec spec = build_ablation(ablation, cfg.arch);
  TransferModel model = TransferModel::build(spec.arch, cfg.train.seed);
  std::cout << "ablation " << spec.name << ": " << model.parameter_count()
            << " parameters\n";
  Trainer trainer(std::move(model), cfg.train, spec.curriculum);
  records = trainer.train(dataset, out_dir);
  write_loss_csv(out_dir / "losses.csv", records);
  std::cout << "trained " << trainer.step() << " steps; checkpoints in " << out_dir
            << "\n";
  return 0;
}

int cmd_transfer(const fs::path& ckpt, const fs::path& in_path,
                 const std::string& music_path, const std::string& direction,
                 const fs::path& out_path, bool identity_debug) {
  if (direction != "x2y" && direction != "y2x")
    throw ValidationError("transfer: --direction must be x2y or y2x");
  MotionSequence motion = load_motion_csv(in_path);
  MotionSequence result;
  if (identity_debug) {
    result = motion;
  } else {
    Trainer trainer = Trainer::load_checkpoint(ckpt);
    const TransferModel& model = trainer.model();
    AudioSequence music;
    const AudioSequence* music_ptr = nullptr;
    if (!music_path.empty()) {
      music = load_audio_csv(music_path);
      music_ptr = &music;
    }
    result = model.transfer(motion, music_ptr, direction == "x2y");
  }
  save_motion_csv(out_path, result);
  std::cout << "wrote " << result.n_frames << " frames to " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& ckpt, const fs::path& data_dir, const fs::path& out,
                 bool identity_debug) {
  Dataset dataset = load_dataset(data_dir);
  EvalDomain ex = to_eval_domain(dataset.x);
  EvalDomain ey = to_eval_domain(dataset.y);
  MetricsReport report;
  if (identity_debug) {
    auto id_fn = make_transfer(TransferModel{}, true, true);
    report = evaluate(id_fn, id_fn, ex, ey, {"x2y", "y2x"}, env_threads());
    report.config_hash = config_hash_hex("identity");
  } else {
    Trainer trainer = Trainer::load_checkpoint(ckpt);
    report = evaluate(make_transfer(trainer.model(), true, false),
                      make_transfer(trainer.model(), false, false), ex, ey,
                      {"x2y", "y2x"}, env_threads());
    report.config_hash = trainer.config_hash();
  }
  report.write_csv(out);
  for (const auto& row : report.rows)
    std::cout << row.direction << ": MFD=" << row.mfd_value << " PFD=" << row.pfd_value
              << " (n=" << row.n_clips << ")\n";
  return 0;
}

int cmd_ablate(const fs::path& data_dir, const fs::path& out_dir,
               const std::string& config_path, long long epochs_override) {
  Dataset dataset = load_dataset(data_dir);
  EvalDomain ex = to_eval_domain(dataset.x);
  EvalDomain ey = to_eval_domain(dataset.y);
  fs::create_directories(out_dir / "plots");

  RunConfig base;
  if (!config_path.empty()) base = run_config_from_json_file(config_path);
  if (epochs_override >= 0) base.train.epochs = static_cast<std::size_t>(epochs_override);

  std::ofstream table(out_dir / "ablation_report.csv");
  if (!table) throw ValidationError("cannot write ablation_report.csv");
  table << "# config_hash="
        << config_hash_hex(base.arch.canonical_string() + "|" +
                           base.train.canonical_string())
        << "\n";
  table << "method,x2y_mfd,y2x_mfd,x2y_pfd,y2x_pfd,seed,parameters\n";
  char buf[32];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };

  for (const std::string& name : ablation_names()) {
    AblationSpec spec = build_ablation(name, base.arch);
    TransferModel model = TransferModel::build(spec.arch, base.train.seed);
    std::size_t n_params = model.parameter_count();
    Trainer trainer(std::move(model), base.train, spec.curriculum);
    auto records = trainer.train(dataset, out_dir / name);
    write_loss_csv(out_dir / "plots" / (name + "_losses.csv"), records);
    MetricsReport report =
        evaluate(make_transfer(trainer.model(), true, false),
                 make_transfer(trainer.model(), false, false), ex, ey, {"x2y", "y2x"},
                 env_threads());
    report.config_hash = trainer.config_hash();
    report.write_csv(out_dir / (name + "_report.csv"));
    double m_x2y = 0, m_y2x = 0, p_x2y = 0, p_y2x = 0;
    for (const auto& row : report.rows) {
      if (row.direction == "x2y") {
        m_x2y = row.mfd_value;
        p_x2y = row.pfd_value;
      } else {
        m_y2x = row.mfd_value;
        p_y2x = row.pfd_value;
      }
    }
    table << name << "," << fmt(m_x2y) << "," << fmt(m_y2x) << "," << fmt(p_x2y) << ","
          << fmt(p_y2x) << "," << base.train.seed << "," << n_params << "\n";
    table.flush();
    std::cout << name << ": MFD x2y=" << m_x2y << " y2x=" << m_y2x
              << " PFD x2y=" << p_x2y << " y2x=" << p_y2x << " params=" << n_params
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CycleDance-style unpaired dance style transfer (synthetic benchmark)"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "Generate the two-style dataset");
  fs::path synth_out;
  std::uint64_t synth_seed = 42;
  std::size_t synth_clips = 20;
  double synth_seconds = 10.0;
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--seed", synth_seed, "Dataset seed");
  synth->add_option("--clips", synth_clips, "Clips per domain");
  synth->add_option("--seconds", synth_seconds, "Clip length in seconds");

  auto* train = app.add_subcommand("train", "Train one configuration");
  fs::path train_data, train_out;
  std::string train_config, train_ablation = "cycledance", train_resume;
  long long train_epochs = -1;
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--config", train_config, "Config JSON");
  train->add_option("--ablation", train_ablation,
                    "baseline|transgan|transgan_cl|crosstransgan|cycledance");
  train->add_option("--resume", train_resume, "Checkpoint directory to resume from");
  train->add_option("--epochs", train_epochs, "Override the epoch budget");

  auto* transfer = app.add_subcommand("transfer", "Transfer one motion clip");
  fs::path tr_ckpt, tr_in, tr_out;
  std::string tr_music, tr_dir = "x2y";
  bool tr_identity = false;
  transfer->add_option("--ckpt", tr_ckpt, "Checkpoint directory");
  transfer->add_option("--in", tr_in, "Input motion CSV")->required();
  transfer->add_option("--music", tr_music, "Paired audio CSV");
  transfer->add_option("--direction", tr_dir, "x2y or y2x");
  transfer->add_option("--out", tr_out, "Output motion CSV")->required();
  transfer->add_flag("--identity-debug", tr_identity,
                     "Bypass the model (passthrough sanity check)");

  auto* eval = app.add_subcommand("evaluate", "Compute MFD/PFD report");
  fs::path ev_ckpt, ev_data, ev_out;
  bool ev_identity = false;
  eval->add_option("--ckpt", ev_ckpt, "Checkpoint directory");
  eval->add_option("--data", ev_data, "Dataset directory")->required();
  eval->add_option("--out", ev_out, "Report CSV path")->required();
  eval->add_flag("--identity-debug", ev_identity, "Evaluate the identity transfer");

  auto* ablate = app.add_subcommand("ablate", "Train and compare all five configs");
  fs::path ab_data, ab_out;
  std::string ab_config;
  long long ab_epochs = -1;
  ablate->add_option("--data", ab_data, "Dataset directory")->required();
  ablate->add_option("--out", ab_out, "Output directory")->required();
  ablate->add_option("--config", ab_config, "Config JSON");
  ablate->add_option("--epochs", ab_epochs, "Override the epoch budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return cmd_synth_data(synth_out, synth_seed, synth_clips, synth_seconds);
    if (train->parsed())
      return cmd_train(train_data, train_out, train_config, train_ablation,
                       train_resume, train_epochs);
    if (transfer->parsed())
      return cmd_transfer(tr_ckpt, tr_in, tr_music, tr_dir, tr_out, tr_identity);
    if (eval->parsed()) return cmd_evaluate(ev_ckpt, ev_data, ev_out, ev_identity);
    if (ablate->parsed()) return cmd_ablate(ab_data, ab_out, ab_config, ab_epochs);
  } catch (const ValidationError& e) {
    std::cerr << "VALIDATION_ERROR: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "NUMERIC_ERROR: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "ERROR: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
