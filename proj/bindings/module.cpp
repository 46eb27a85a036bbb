#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cycledance/data.hpp"
#include "cycledance/metrics.hpp"
#include "cycledance/model.hpp"
#include "cycledance/training.hpp"

namespace py = pybind11;
using namespace cycledance;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

MotionSequence motion_from_array(const Arr& a, const std::string& style) {
  if (a.ndim() != 2 || a.shape(1) != static_cast<py::ssize_t>(kMotionDim))
    throw ValidationError("motion array must be [T, 63]");
  MotionSequence m;
  m.n_frames = static_cast<std::size_t>(a.shape(0));
  m.style = style;
  m.data.assign(a.data(), a.data() + a.size());
  m.validate();
  return m;
}

AudioSequence audio_from_array(const Arr& a) {
  if (a.ndim() != 2 || a.shape(1) != static_cast<py::ssize_t>(kAudioDim))
    throw ValidationError("audio array must be [T, 35]");
  AudioSequence s;
  s.n_frames = static_cast<std::size_t>(a.shape(0));
  s.data.assign(a.data(), a.data() + a.size());
  s.validate();
  return s;
}

py::array motion_to_array(const MotionSequence& m) {
  py::array_t<double> out({m.n_frames, kMotionDim});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

py::array audio_to_array(const AudioSequence& a) {
  py::array_t<double> out({a.n_frames, kAudioDim});
  std::copy(a.data.begin(), a.data.end(), out.mutable_data());
  return out;
}

std::vector<MotionSequence> motions_from_list(const std::vector<Arr>& arrays) {
  std::vector<MotionSequence> out;
  for (const auto& a : arrays) out.push_back(motion_from_array(a, ""));
  return out;
}

}  // namespace

PYBIND11_MODULE(_cycledance, m) {
  m.doc() = "Unpaired dance style transfer: core operations";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "synth_data",
      [](const std::string& out_dir, std::uint64_t seed, std::size_t clips,
         double seconds) {
        auto spec_x = smooth_style_spec(seed);
        auto spec_y = jerky_style_spec(seed + 1);
        auto [dx, dy] = generate_synthetic(spec_x, spec_y, clips, seconds);
        std::filesystem::create_directories(out_dir);
        save_domain(out_dir, dx);
        save_domain(out_dir, dy);
        DatasetManifest manifest{seed, clips, seconds, spec_x, spec_y};
        save_manifest(out_dir, manifest);
      },
      py::arg("out_dir"), py::arg("seed") = 42, py::arg("clips") = 20,
      py::arg("seconds") = 10.0);

  m.def(
      "load_domain_motions",
      [](const std::string& dir) {
        StyleDomain d = load_domain(dir);
        std::vector<py::array> out;
        for (const auto& clip : d.clips) out.push_back(motion_to_array(clip.motion));
        return out;
      },
      py::arg("domain_dir"));

  m.def(
      "expmap_encode",
      [](double w, double x, double y, double z) {
        Vec3 e = expmap_encode(Quat{w, x, y, z});
        return py::make_tuple(e.x, e.y, e.z);
      },
      py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"));

  m.def(
      "expmap_decode",
      [](double x, double y, double z) {
        Quat q = expmap_decode(Vec3{x, y, z});
        return py::make_tuple(q.w, q.x, q.y, q.z);
      },
      py::arg("x"), py::arg("y"), py::arg("z"));

  m.def(
      "extract_audio_features",
      [](const std::vector<double>& samples, double sample_rate) {
        return audio_to_array(extract_audio_features(samples, sample_rate));
      },
      py::arg("samples"), py::arg("sample_rate"));

  m.def(
      "mfd",
      [](const std::vector<Arr>& true_motions, const std::vector<Arr>& generated) {
        return mfd(motions_from_list(true_motions), motions_from_list(generated));
      },
      py::arg("true_motions"), py::arg("generated_motions"));

  m.def(
      "pfd",
      [](const std::vector<Arr>& source, const std::vector<Arr>& generated,
         std::size_t min_gap) {
        return pfd(motions_from_list(source), motions_from_list(generated), min_gap);
      },
      py::arg("source_motions"), py::arg("generated_motions"), py::arg("min_gap") = 0);

  m.def(
      "extract_keyframes",
      [](const Arr& motion, std::size_t min_gap) {
        KeyPoseSet keys = extract_keyframes(motion_from_array(motion, ""), min_gap);
        py::array_t<double> frames({keys.n, kMotionDim});
        std::copy(keys.frames.begin(), keys.frames.end(), frames.mutable_data());
        return py::make_tuple(frames, keys.indices);
      },
      py::arg("motion"), py::arg("min_gap") = 0);

  m.def(
      "frechet_distance",
      [](const Arr& mean1, const Arr& cov1, const Arr& mean2, const Arr& cov2) {
        auto to_fit = [](const Arr& mean, const Arr& cov) {
          GaussianFit f;
          f.n = 1;
          f.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
          f.covariance = Eigen::Map<const Eigen::MatrixXd>(cov.data(), cov.shape(0),
                                                           cov.shape(1));
          f.covariance.transposeInPlace();  // row-major input
          return f;
        };
        return frechet_distance(to_fit(mean1, cov1), to_fit(mean2, cov2));
      },
      py::arg("mean1"), py::arg("cov1"), py::arg("mean2"), py::arg("cov2"));

  py::class_<TransferModel>(m, "TransferModel")
      .def_static(
          "build",
          [](const std::string& ablation, std::uint64_t seed, std::size_t base_channels,
             std::size_t n_res_blocks, std::size_t tx_layers, std::size_t model_dim,
             std::size_t ff_dim) {
            ArchConfig base;
            base.base_channels = base_channels;
            base.n_res_blocks = n_res_blocks;
            base.transformer.layers = tx_layers;
            base.transformer.model_dim = model_dim;
            base.transformer.ff_dim = ff_dim;
            AblationSpec spec = build_ablation(ablation, base);
            return TransferModel::build(spec.arch, seed);
          },
          py::arg("ablation") = "cycledance", py::arg("seed") = 7,
          py::arg("base_channels") = 16, py::arg("n_res_blocks") = 1,
          py::arg("tx_layers") = 1, py::arg("model_dim") = 32, py::arg("ff_dim") = 64)
      .def("parameter_count", &TransferModel::parameter_count)
      .def(
          "transfer",
          [](const TransferModel& model, const Arr& motion, py::object music,
             bool x_to_y) {
            MotionSequence m = motion_from_array(motion, "");
            if (music.is_none()) return motion_to_array(model.transfer(m, nullptr, x_to_y));
            AudioSequence a = audio_from_array(music.cast<Arr>());
            return motion_to_array(model.transfer(m, &a, x_to_y));
          },
          py::arg("motion"), py::arg("music") = py::none(), py::arg("x_to_y") = true);

  m.def(
      "train",
      [](const std::string& data_dir, const std::string& out_dir,
         const std::string& ablation, const std::string& config_path,
         long long epochs_override) {
        Dataset dataset = load_dataset(data_dir);
        RunConfig cfg;
        if (!config_path.empty()) cfg = run_config_from_json_file(config_path);
        if (epochs_override >= 0)
          cfg.train.epochs = static_cast<std::size_t>(epochs_override);
        AblationSpec spec = build_ablation(ablation, cfg.arch);
        TransferModel model = TransferModel::build(spec.arch, cfg.train.seed);
        Trainer trainer(std::move(model), cfg.train, spec.curriculum);
        auto records = trainer.train(dataset, out_dir);
        write_loss_csv(std::filesystem::path(out_dir) / "losses.csv", records);
        return records.size();
      },
      py::arg("data_dir"), py::arg("out_dir"), py::arg("ablation") = "cycledance",
      py::arg("config") = "", py::arg("epochs") = -1);

  m.def("load_checkpoint_transfer",
        [](const std::string& ckpt_dir, const Arr& motion, py::object music,
           bool x_to_y) {
          Trainer trainer = Trainer::load_checkpoint(ckpt_dir);
          MotionSequence m = motion_from_array(motion, "");
          if (music.is_none())
            return motion_to_array(trainer.model().transfer(m, nullptr, x_to_y));
          AudioSequence a = audio_from_array(music.cast<Arr>());
          return motion_to_array(trainer.model().transfer(m, &a, x_to_y));
        },
        py::arg("ckpt_dir"), py::arg("motion"), py::arg("music") = py::none(),
        py::arg("x_to_y") = true);
}
