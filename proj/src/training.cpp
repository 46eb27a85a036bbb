#include "cycledance/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cycledance/metrics.hpp"
#include "cycledance/serialize.hpp"

namespace cycledance {

using json = nlohmann::json;
namespace fs = std::filesystem;

void CurriculumSchedule::validate() const {
  if (stages.empty()) throw ValidationError("curriculum: empty schedule");
  if (stages.front().first != 0)
    throw ValidationError("curriculum: first stage must start at epoch 0");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].second % 4 != 0 || stages[i].second == 0)
      throw ValidationError("curriculum: clip lengths must be positive multiples of 4");
    if (i > 0) {
      if (stages[i].first <= stages[i - 1].first)
        throw ValidationError("curriculum: start epochs must be strictly increasing");
      if (stages[i].second <= stages[i - 1].second)
        throw ValidationError("curriculum: clip lengths must be strictly increasing");
    }
  }
}

std::size_t curriculum_length(const CurriculumSchedule& schedule, std::size_t epoch) {
  schedule.validate();
  if (!schedule.enabled) return schedule.stages.back().second;
  std::size_t len = schedule.stages.front().second;
  for (const auto& [start, stage_len] : schedule.stages)
    if (start <= epoch) len = stage_len;
  return len;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (g_lr < 0.0 || d_lr < 0.0)
    throw ValidationError("train config: learning rates must be non-negative");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
    throw ValidationError("train config: betas must be in [0, 1)");
  weights.validate();
  schedule.validate();
}

std::string TrainConfig::canonical_string() const {
  std::ostringstream os;
  os << "epochs=" << epochs << ";batch=" << batch_size << ";g_lr=" << g_lr
     << ";d_lr=" << d_lr << ";b1=" << adam_beta1 << ";b2=" << adam_beta2
     << ";seed=" << seed << ";cyc=" << weights.lambda_cyc << ";id=" << weights.lambda_id
     << ";anneal=" << weights.id_anneal_step << ";cl=" << schedule.enabled << ";stages=";
  for (const auto& [e, l] : schedule.stages) os << e << ":" << l << ",";
  return os.str();
}

namespace {

json schedule_to_json(const CurriculumSchedule& s) {
  json stages = json::array();
  for (const auto& [e, l] : s.stages) stages.push_back({e, l});
  return json{{"enabled", s.enabled}, {"stages", stages}};
}

CurriculumSchedule schedule_from_json(const json& j) {
  CurriculumSchedule s;
  if (j.contains("enabled")) s.enabled = j.at("enabled").get<bool>();
  if (j.contains("stages")) {
    s.stages.clear();
    for (const auto& st : j.at("stages"))
      s.stages.emplace_back(st.at(0).get<std::size_t>(), st.at(1).get<std::size_t>());
  }
  return s;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"g_lr", cfg.g_lr},
              {"d_lr", cfg.d_lr},
              {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},
              {"seed", cfg.seed},
              {"weights",
               {{"lambda_cyc", cfg.weights.lambda_cyc},
                {"lambda_id", cfg.weights.lambda_id},
                {"id_anneal_step", cfg.weights.id_anneal_step}}},
              {"curriculum", schedule_to_json(cfg.schedule)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("g_lr")) cfg.g_lr = j.at("g_lr").get<double>();
  if (j.contains("d_lr")) cfg.d_lr = j.at("d_lr").get<double>();
  if (j.contains("adam_beta1")) cfg.adam_beta1 = j.at("adam_beta1").get<double>();
  if (j.contains("adam_beta2")) cfg.adam_beta2 = j.at("adam_beta2").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (w.contains("lambda_cyc")) cfg.weights.lambda_cyc = w.at("lambda_cyc").get<double>();
    if (w.contains("lambda_id")) cfg.weights.lambda_id = w.at("lambda_id").get<double>();
    if (w.contains("id_anneal_step"))
      cfg.weights.id_anneal_step = w.at("id_anneal_step").get<long long>();
  }
  if (j.contains("curriculum")) cfg.schedule = schedule_from_json(j.at("curriculum"));
  cfg.validate();
  return cfg;
}

}  // namespace

TrainConfig train_config_from_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read config " + path.string());
  return train_config_from_json(json::parse(is));
}

RunConfig run_config_from_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read config " + path.string());
  json j = json::parse(is);
  RunConfig cfg;
  cfg.train = train_config_from_json(j);
  if (j.contains("arch")) {
    const auto& a = j.at("arch");
    if (a.contains("base_channels"))
      cfg.arch.base_channels = a.at("base_channels").get<std::size_t>();
    if (a.contains("n_down_blocks"))
      cfg.arch.n_down_blocks = a.at("n_down_blocks").get<std::size_t>();
    if (a.contains("n_res_blocks"))
      cfg.arch.n_res_blocks = a.at("n_res_blocks").get<std::size_t>();
    if (a.contains("transformer")) {
      const auto& t = a.at("transformer");
      if (t.contains("layers")) cfg.arch.transformer.layers = t.at("layers").get<std::size_t>();
      if (t.contains("heads")) cfg.arch.transformer.heads = t.at("heads").get<std::size_t>();
      if (t.contains("model_dim"))
        cfg.arch.transformer.model_dim = t.at("model_dim").get<std::size_t>();
      if (t.contains("ff_dim")) cfg.arch.transformer.ff_dim = t.at("ff_dim").get<std::size_t>();
    }
    if (a.contains("use_motion_transformer"))
      cfg.arch.use_motion_transformer = a.at("use_motion_transformer").get<bool>();
    if (a.contains("use_music_pathway"))
      cfg.arch.use_music_pathway = a.at("use_music_pathway").get<bool>();
  }
  cfg.arch.validate();
  return cfg;
}

void train_config_to_json_file(const TrainConfig& cfg, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write config " + path.string());
  os << train_config_to_json(cfg).dump(2) << "\n";
}

// ---- Adam ---------------------------------------------------------------------

void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, std::size_t t,
                 double lr, double beta1, double beta2, double eps) {
  if (param.size() != grad.size() || m.size() != param.size() || v.size() != param.size())
    throw ValidationError("adam_update: size mismatch");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

Adam::Adam(std::vector<Param> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].value;
    if (!t.has_grad()) continue;  // parameter untouched this step
    std::vector<double> data = t.data();
    adam_update(data, t.grad(), m_[i], v_[i], t_, lr_, beta1_, beta2_, eps_);
    t.set_data(data);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

void Adam::save_state(std::ostream& os) const {
  tnsr_write(os, {1}, {static_cast<double>(t_)});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    tnsr_write(os, {m_[i].size()}, m_[i]);
    tnsr_write(os, {v_[i].size()}, v_[i]);
  }
}

void Adam::load_state(std::istream& is) {
  TnsrBlob tb = tnsr_read(is);
  t_ = static_cast<std::size_t>(tb.data.at(0));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    TnsrBlob mb = tnsr_read(is);
    TnsrBlob vb = tnsr_read(is);
    if (mb.data.size() != m_[i].size() || vb.data.size() != v_[i].size())
      throw ValidationError("optimizer state does not match the model");
    m_[i] = std::move(mb.data);
    v_[i] = std::move(vb.data);
  }
}

// ---- trainer ---------------------------------------------------------------------

Trainer::Trainer(TransferModel model, TrainConfig cfg, bool curriculum_enabled)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      curriculum_enabled_(curriculum_enabled),
      g_opt_(model_.generator_params(), cfg_.g_lr, cfg_.adam_beta1, cfg_.adam_beta2),
      d_opt_(model_.discriminator_params(), cfg_.d_lr, cfg_.adam_beta1, cfg_.adam_beta2),
      rng_(cfg_.seed) {
  cfg_.validate();
  id_anneal_resolved_ = cfg_.weights.id_anneal_step;
}

std::string Trainer::config_hash() const {
  return config_hash_hex(model_.arch.canonical_string() + "|" + cfg_.canonical_string());
}

std::size_t Trainer::steps_per_epoch(const Dataset& dataset) const {
  std::size_t n = std::min(dataset.x.clips.size(), dataset.y.clips.size());
  return std::max<std::size_t>(1, n / cfg_.batch_size);
}

long long Trainer::resolved_id_anneal(const Dataset& dataset) const {
  if (cfg_.weights.id_anneal_step >= 0) return cfg_.weights.id_anneal_step;
  return static_cast<long long>(cfg_.epochs * steps_per_epoch(dataset) / 5);
}

namespace {

struct ItemTensors {
  Tensor x, y;
  Tensor mx, my;
  const Tensor* mx_ptr = nullptr;
  const Tensor* my_ptr = nullptr;
};

ItemTensors to_tensors(const Clip& cx, const Clip& cy, bool music) {
  ItemTensors t;
  t.x = motion_to_tensor(cx.motion);
  t.y = motion_to_tensor(cy.motion);
  if (music) {
    t.mx = audio_to_tensor(cx.audio);
    t.my = audio_to_tensor(cy.audio);
    t.mx_ptr = &t.mx;
    t.my_ptr = &t.my;
  }
  return t;
}

Tensor batch_mean(std::vector<Tensor> items) {
  Tensor acc = items[0];
  for (std::size_t i = 1; i < items.size(); ++i) acc = add(acc, items[i]);
  return mul_scalar(acc, 1.0 / static_cast<double>(items.size()));
}

}  // namespace

double Trainer::discriminator_phase(const BatchPair& batch) {
  const bool music = model_.arch.use_music_pathway;
  std::vector<Tensor> d_losses;
  for (std::size_t b = 0; b < batch.x.size(); ++b) {
    ItemTensors t = to_tensors(batch.x[b], batch.y[b], music);
    Tensor fake_y, fake_x, cycled_x, cycled_y;
    {
      // Fakes are constants here: the discriminator step must not write
      // generator parameters.
      NoGradGuard no_grad;
      fake_y = model_.g_xy.forward(t.x, t.mx_ptr);
      fake_x = model_.g_yx.forward(t.y, t.my_ptr);
      cycled_x = model_.g_yx.forward(fake_y, t.mx_ptr);
      cycled_y = model_.g_xy.forward(fake_x, t.my_ptr);
    }
    AdvPair adv_y = adv_loss(model_.d_y.forward(t.y), model_.d_y.forward(fake_y));
    AdvPair adv_x = adv_loss(model_.d_x.forward(t.x), model_.d_x.forward(fake_x));
    AdvPair adv2_x = adv2_loss(model_.d2_x.forward(t.x), model_.d2_x.forward(cycled_x));
    AdvPair adv2_y = adv2_loss(model_.d2_y.forward(t.y), model_.d2_y.forward(cycled_y));
    d_losses.push_back(
        add(add(adv_x.d_term, adv_y.d_term), add(adv2_x.d_term, adv2_y.d_term)));
  }
  Tensor d_total = batch_mean(std::move(d_losses));
  backward(d_total);
  d_opt_.step();
  d_opt_.zero_grad();
  g_opt_.zero_grad();
  return d_total.item();
}

LossRecord Trainer::generator_phase(const BatchPair& batch) {
  const bool music = model_.arch.use_music_pathway;
  LossWeights weights = cfg_.weights;
  weights.id_anneal_step = id_anneal_resolved_;
  const double lambda_id_now = weights.effective_lambda_id(step_);

  std::vector<Tensor> g_losses;
  LossRecord rec;
  rec.step = step_;
  rec.epoch = epoch_;
  for (std::size_t b = 0; b < batch.x.size(); ++b) {
    ItemTensors t = to_tensors(batch.x[b], batch.y[b], music);
    Tensor fake_y = model_.g_xy.forward(t.x, t.mx_ptr);
    Tensor cycled_x = model_.g_yx.forward(fake_y, t.mx_ptr);
    Tensor fake_x = model_.g_yx.forward(t.y, t.my_ptr);
    Tensor cycled_y = model_.g_xy.forward(fake_x, t.my_ptr);

    ObjectiveParts parts;
    parts.g_adv_xy = adv_loss(model_.d_y.forward(t.y), model_.d_y.forward(fake_y)).g_term;
    parts.g_adv_yx = adv_loss(model_.d_x.forward(t.x), model_.d_x.forward(fake_x)).g_term;
    parts.cyc = cycle_loss(t.x, cycled_x, t.y, cycled_y);
    if (lambda_id_now > 0.0) {
      Tensor id_x = model_.g_yx.forward(t.x, t.mx_ptr);
      Tensor id_y = model_.g_xy.forward(t.y, t.my_ptr);
      parts.id = identity_loss(t.x, id_x, t.y, id_y);
    }
    parts.g_adv2_xyx =
        adv2_loss(model_.d2_x.forward(t.x), model_.d2_x.forward(cycled_x)).g_term;
    parts.g_adv2_yxy =
        adv2_loss(model_.d2_y.forward(t.y), model_.d2_y.forward(cycled_y)).g_term;
    parts.d_adv_x = scalar(0.0);
    parts.d_adv_y = scalar(0.0);
    parts.d_adv2_x = scalar(0.0);
    parts.d_adv2_y = scalar(0.0);

    Objective obj = full_objective(parts, weights, step_);
    g_losses.push_back(obj.generator);

    const double bn = static_cast<double>(batch.x.size());
    rec.g_adv_xy += parts.g_adv_xy.item() / bn;
    rec.g_adv_yx += parts.g_adv_yx.item() / bn;
    rec.cyc += parts.cyc.item() / bn;
    rec.id += (parts.id.defined() ? parts.id.item() : 0.0) / bn;
    rec.g_adv2_xyx += parts.g_adv2_xyx.item() / bn;
    rec.g_adv2_yxy += parts.g_adv2_yxy.item() / bn;
  }
  Tensor g_total = batch_mean(std::move(g_losses));
  rec.g_total = g_total.item();
  backward(g_total);
  g_opt_.step();
  // The generator objective flows through the discriminators; their grads
  // must not leak into the next discriminator step.
  g_opt_.zero_grad();
  d_opt_.zero_grad();
  return rec;
}

LossRecord Trainer::train_step(const BatchPair& batch) {
  if (batch.x.empty() || batch.x.size() != batch.y.size())
    throw ValidationError("train_step: malformed batch");
  double d_total = discriminator_phase(batch);
  LossRecord rec = generator_phase(batch);
  rec.d_total = d_total;
  ++step_;
  return rec;
}

std::vector<LossRecord> Trainer::train(const Dataset& dataset, const fs::path& out_dir) {
  if (dataset.x.clips.empty() || dataset.y.clips.empty())
    throw ValidationError("train: both domains must be non-empty");
  fs::create_directories(out_dir);
  id_anneal_resolved_ = resolved_id_anneal(dataset);

  CurriculumSchedule sched = cfg_.schedule;
  sched.enabled = curriculum_enabled_;
  const std::size_t spe = steps_per_epoch(dataset);

  std::vector<LossRecord> records;
  std::size_t prev_len =
      epoch_ > 0 ? curriculum_length(sched, epoch_ - 1) : curriculum_length(sched, 0);
  for (; epoch_ < cfg_.epochs; ++epoch_) {
    std::size_t len = curriculum_length(sched, epoch_);
    if (epoch_ > 0 && len != prev_len)
      save_checkpoint(out_dir / ("checkpoint_epoch" + std::to_string(epoch_)));
    prev_len = len;
    for (std::size_t s = 0; s < spe; ++s) {
      BatchPair batch =
          sample_unpaired_batch(dataset.x, dataset.y, cfg_.batch_size, len, rng_);
      records.push_back(train_step(batch));
    }
  }
  save_checkpoint(out_dir / "checkpoint_final");
  return records;
}

// ---- checkpoints -------------------------------------------------------------------

namespace {

json arch_to_json(const ArchConfig& a) {
  return json{{"base_channels", a.base_channels},
              {"n_down_blocks", a.n_down_blocks},
              {"n_res_blocks", a.n_res_blocks},
              {"transformer",
               {{"layers", a.transformer.layers},
                {"heads", a.transformer.heads},
                {"model_dim", a.transformer.model_dim},
                {"ff_dim", a.transformer.ff_dim}}},
              {"use_motion_transformer", a.use_motion_transformer},
              {"use_music_pathway", a.use_music_pathway},
              {"motion_dim", a.motion_dim},
              {"music_dim", a.music_dim}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.base_channels = j.at("base_channels").get<std::size_t>();
  a.n_down_blocks = j.at("n_down_blocks").get<std::size_t>();
  a.n_res_blocks = j.at("n_res_blocks").get<std::size_t>();
  const auto& t = j.at("transformer");
  a.transformer.layers = t.at("layers").get<std::size_t>();
  a.transformer.heads = t.at("heads").get<std::size_t>();
  a.transformer.model_dim = t.at("model_dim").get<std::size_t>();
  a.transformer.ff_dim = t.at("ff_dim").get<std::size_t>();
  a.use_motion_transformer = j.at("use_motion_transformer").get<bool>();
  a.use_music_pathway = j.at("use_music_pathway").get<bool>();
  a.motion_dim = j.at("motion_dim").get<std::size_t>();
  a.music_dim = j.at("music_dim").get<std::size_t>();
  return a;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& dir) const {
  fs::create_directories(dir);
  json manifest;
  manifest["arch"] = arch_to_json(model_.arch);
  manifest["train_config"] = train_config_to_json(cfg_);
  manifest["curriculum_enabled"] = curriculum_enabled_;
  manifest["step"] = step_;
  manifest["epoch"] = epoch_;
  manifest["rng_state"] = rng_.serialize();
  manifest["id_anneal_resolved"] = id_anneal_resolved_;
  manifest["config_hash"] = config_hash();
  json names = json::array();
  for (const auto& p : model_.parameters())
    names.push_back(p.name);
  manifest["parameters"] = names;
  {
    std::ofstream os(dir / "manifest.json");
    if (!os) throw ValidationError("cannot write checkpoint manifest");
    os << manifest.dump(2) << "\n";
  }
  {
    std::ofstream os(dir / "weights.bin", std::ios::binary);
    for (const auto& p : model_.parameters())
      tnsr_write(os, p.value);
  }
  {
    std::ofstream os(dir / "optimizer.bin", std::ios::binary);
    g_opt_.save_state(os);
    d_opt_.save_state(os);
  }
}

Trainer Trainer::load_checkpoint(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw ValidationError("no checkpoint manifest at " + dir.string());
  json manifest = json::parse(is);
  ArchConfig arch = arch_from_json(manifest.at("arch"));
  TrainConfig cfg = train_config_from_json(manifest.at("train_config"));
  TransferModel model = TransferModel::build(arch, cfg.seed);

  Trainer trainer(std::move(model), cfg, manifest.at("curriculum_enabled").get<bool>());
  auto params = trainer.model_.parameters();
  const auto names = manifest.at("parameters");
  if (names.size() != params.size())
    throw ValidationError("checkpoint parameter list does not match the model");
  std::ifstream ws(dir / "weights.bin", std::ios::binary);
  if (!ws) throw ValidationError("missing weights.bin in " + dir.string());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (names[i].get<std::string>() != params[i].name)
      throw ValidationError("checkpoint parameter order mismatch at " + params[i].name);
    TnsrBlob blob = tnsr_read(ws);
    if (blob.shape != params[i].value.shape())
      throw ValidationError("checkpoint shape mismatch at " + params[i].name);
    params[i].value.set_data(blob.data);
  }
  std::ifstream os_state(dir / "optimizer.bin", std::ios::binary);
  if (os_state) {
    trainer.g_opt_.load_state(os_state);
    trainer.d_opt_.load_state(os_state);
  }
  trainer.step_ = manifest.at("step").get<std::size_t>();
  trainer.epoch_ = manifest.at("epoch").get<std::size_t>();
  trainer.rng_.deserialize(manifest.at("rng_state").get<std::string>());
  trainer.id_anneal_resolved_ = manifest.at("id_anneal_resolved").get<long long>();
  return trainer;
}

void write_loss_csv(const fs::path& path, const std::vector<LossRecord>& records) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << "step,loss_name,value\n";
  char buf[32];
  auto row = [&](std::size_t step, const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << step << "," << name << "," << buf << "\n";
  };
  for (const auto& r : records) {
    row(r.step, "g_adv_xy", r.g_adv_xy);
    row(r.step, "g_adv_yx", r.g_adv_yx);
    row(r.step, "cycle", r.cyc);
    row(r.step, "identity", r.id);
    row(r.step, "g_adv2_xyx", r.g_adv2_xyx);
    row(r.step, "g_adv2_yxy", r.g_adv2_yxy);
    row(r.step, "d_total", r.d_total);
    row(r.step, "g_total", r.g_total);
  }
}

}  // namespace cycledance
