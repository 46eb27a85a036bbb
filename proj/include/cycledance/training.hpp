#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cycledance/data.hpp"
#include "cycledance/losses.hpp"
#include "cycledance/model.hpp"
#include "cycledance/rng.hpp"

namespace cycledance {

struct CurriculumSchedule {
  /// (start_epoch, clip_length_frames); lengths strictly increasing and
  /// divisible by 4, start epochs strictly increasing from 0.
  std::vector<std::pair<std::size_t, std::size_t>> stages = {{0, 32}, {10, 64}, {20, 128}};
  bool enabled = true;

  void validate() const;
};

/// Clip length of the last stage whose start_epoch <= epoch; when disabled,
/// always the final stage's length.
std::size_t curriculum_length(const CurriculumSchedule& schedule, std::size_t epoch);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 2;
  double g_lr = 2e-4;
  double d_lr = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  std::uint64_t seed = 7;
  LossWeights weights;
  CurriculumSchedule schedule;

  void validate() const;
  std::string canonical_string() const;
};

TrainConfig train_config_from_json_file(const std::filesystem::path& path);
void train_config_to_json_file(const TrainConfig& cfg, const std::filesystem::path& path);

/// Operator-facing config file: TrainConfig fields at the top level plus an
/// optional "arch" object. Missing fields keep their defaults.
struct RunConfig {
  TrainConfig train;
  ArchConfig arch;
};

RunConfig run_config_from_json_file(const std::filesystem::path& path);

/// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Param> params, double lr, double beta1, double beta2,
       double eps = 1e-8);

  void step();
  void zero_grad();

  std::size_t t() const { return t_; }
  const std::vector<Param>& params() const { return params_; }

  void save_state(std::ostream& os) const;
  void load_state(std::istream& is);

 private:
  std::vector<Param> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Single Adam update for one tensor; moments owned by the caller.
void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, std::size_t t,
                 double lr, double beta1, double beta2, double eps = 1e-8);

struct LossRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double g_adv_xy = 0, g_adv_yx = 0, cyc = 0, id = 0, g_adv2_xyx = 0, g_adv2_yxy = 0;
  double d_total = 0, g_total = 0;
};

class Trainer {
 public:
  Trainer(TransferModel model, TrainConfig cfg, bool curriculum_enabled);

  /// One two-step adversarial update: (1) forward all paths, (2) update the
  /// four discriminators on their d-terms, (3) recompute fakes and update
  /// both generators on the full objective.
  LossRecord train_step(const BatchPair& batch);

  /// Phase halves, exposed for the parameter-partition checks.
  double discriminator_phase(const BatchPair& batch);
  LossRecord generator_phase(const BatchPair& batch);

  /// Full loop: re-cuts clips per curriculum each epoch, checkpoints at
  /// stage boundaries and at the end. Returns the per-step loss records.
  std::vector<LossRecord> train(const Dataset& dataset,
                                const std::filesystem::path& out_dir);

  void save_checkpoint(const std::filesystem::path& dir) const;
  static Trainer load_checkpoint(const std::filesystem::path& dir);

  TransferModel& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  /// Extends the budget when resuming a finished checkpoint.
  void set_epochs(std::size_t epochs) { cfg_.epochs = epochs; }
  bool curriculum_enabled() const { return curriculum_enabled_; }
  std::size_t step() const { return step_; }
  std::size_t epoch() const { return epoch_; }
  Rng& rng() { return rng_; }
  std::string config_hash() const;

  /// Steps per epoch for a dataset: floor(min(|X|,|Y|) / batch), at least 1.
  std::size_t steps_per_epoch(const Dataset& dataset) const;
  /// Resolved id-anneal step (20% of total when the config leaves it negative).
  long long resolved_id_anneal(const Dataset& dataset) const;

 private:
  TransferModel model_;
  TrainConfig cfg_;
  bool curriculum_enabled_;
  Adam g_opt_, d_opt_;
  Rng rng_;
  std::size_t step_ = 0;
  std::size_t epoch_ = 0;
  long long id_anneal_resolved_ = -1;
};

void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<LossRecord>& records);

}  // namespace cycledance
