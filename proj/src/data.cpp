#include "cycledance/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cycledance {

using json = nlohmann::json;
namespace fs = std::filesystem;

void StyleDomain::validate() const {
  for (const auto& clip : clips) {
    clip.motion.validate();
    clip.audio.validate();
    if (clip.motion.n_frames != clip.audio.n_frames)
      throw ValidationError("domain " + label + ": motion/audio length mismatch");
    if (clip.motion.style != label)
      throw ValidationError("domain " + label + ": clip carries style '" +
                            clip.motion.style + "'");
  }
}

void SyntheticStyleSpec::validate() const {
  if (tempo_bpm <= 0.0) throw ValidationError("style spec: tempo must be positive");
  if (jerkiness < 0.0 || jerkiness > 1.0)
    throw ValidationError("style spec: jerkiness must be in [0,1]");
  for (double f : group_frequency_hz)
    if (f <= 0.0) throw ValidationError("style spec: frequencies must be positive");
  for (double a : group_amplitude)
    if (a < 0.0) throw ValidationError("style spec: amplitudes must be non-negative");
}

SyntheticStyleSpec smooth_style_spec(std::uint64_t seed) {
  SyntheticStyleSpec s;
  s.group_frequency_hz = {0.3, 0.45, 0.6, 0.4};
  s.group_amplitude = {0.18, 0.1, 0.4, 0.25};
  s.jerkiness = 0.0;
  s.tempo_bpm = 100.0;
  s.seed = seed;
  return s;
}

SyntheticStyleSpec jerky_style_spec(std::uint64_t seed) {
  SyntheticStyleSpec s;
  s.group_frequency_hz = {1.1, 1.5, 2.2, 1.3};
  s.group_amplitude = {0.45, 0.3, 1.0, 0.6};
  s.jerkiness = 0.9;
  s.tempo_bpm = 132.0;
  s.seed = seed;
  return s;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 over seed ^ salted stream position
  std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// 0 spine, 1 head, 2 arms, 3 legs; indexed by canonical joint id.
int joint_group(const std::string& name) {
  if (name == "Head" || name == "Neck") return 1;
  if (name.find("Arm") != std::string::npos || name.find("Hand") != std::string::npos ||
      name.find("Shoulder") != std::string::npos)
    return 2;
  if (name.find("Leg") != std::string::npos || name.find("Foot") != std::string::npos ||
      name.find("Toe") != std::string::npos)
    return 3;
  return 0;
}

MotionSequence synth_motion(const SyntheticStyleSpec& spec, const Skeleton& skel,
                            std::size_t t_count, Rng& rng, const std::string& label) {
  const auto joints = skel.non_root_joints();
  struct JointOsc {
    double axis_phi;  // rotation axis angle in the x-y plane
    double amp, freq, phase;
  };
  std::vector<JointOsc> osc(joints.size());
  for (std::size_t j = 0; j < joints.size(); ++j) {
    int g = joint_group(skel.joint_names[joints[j]]);
    osc[j].axis_phi = rng.uniform(0.0, 2.0 * M_PI);
    osc[j].amp = spec.group_amplitude[g] * rng.uniform(0.9, 1.1);
    osc[j].freq = spec.group_frequency_hz[g] * rng.uniform(0.92, 1.08);
    osc[j].phase = rng.uniform(0.0, 2.0 * M_PI);
  }
  const std::size_t beat_frames = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(60.0 / spec.tempo_bpm * kMotionFps)));
  // Per-beat hold decision shared by all joints (whole-body locking).
  std::vector<bool> hold((t_count + beat_frames - 1) / beat_frames);
  for (std::size_t b = 0; b < hold.size(); ++b)
    hold[b] = rng.uniform() < spec.jerkiness;

  const double speed = 0.01 + 0.02 * rng.uniform();   // m per frame
  const double turn = rng.uniform(-1.0, 1.0) * 2.0 * M_PI / t_count;
  const double bob_amp = 0.02 + 0.02 * rng.uniform();
  const double bob_freq = spec.group_frequency_hz[0];

  RawPoseSequence raw;
  raw.fps = kMotionFps;
  raw.root_position.resize(t_count);
  raw.joint_rotations.assign(t_count, std::vector<Quat>(kJointCount));
  double heading = rng.uniform(0.0, 2.0 * M_PI);
  double px = 0.0, pz = 0.0;
  for (std::size_t t = 0; t < t_count; ++t) {
    // Joint angles follow the oscillators; held beats freeze the sample taken
    // at the beat boundary, producing step transitions.
    std::size_t beat = t / beat_frames;
    double tj = hold[std::min(beat, hold.size() - 1)]
                    ? static_cast<double>(beat * beat_frames)
                    : static_cast<double>(t);
    for (std::size_t j = 0; j < joints.size(); ++j) {
      const JointOsc& o = osc[j];
      double angle =
          o.amp * std::sin(2.0 * M_PI * o.freq * tj / kMotionFps + o.phase);
      Vec3 axis{std::cos(o.axis_phi), std::sin(o.axis_phi), 0.0};
      raw.joint_rotations[t][joints[j]] = Quat::from_axis_angle(axis, angle);
    }
    heading += turn;
    px += speed * std::sin(heading);
    pz += speed * std::cos(heading);
    double py = 0.95 + bob_amp * std::sin(2.0 * M_PI * bob_freq * tj / kMotionFps);
    raw.root_position[t] = {px, py, pz};
    raw.joint_rotations[t][skel.root_index()] = Quat::about_y(heading);
  }
  return encode_motion(raw, skel, label);
}

std::vector<double> synth_click_track(const SyntheticStyleSpec& spec, double seconds,
                                      double sample_rate, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> pcm(n, 0.0);
  // quiet tonal bed so chroma has content
  const double bed_freq = 220.0 * std::pow(2.0, rng.uniform_index(12) / 12.0);
  for (std::size_t i = 0; i < n; ++i)
    pcm[i] = 0.05 * std::sin(2.0 * M_PI * bed_freq * static_cast<double>(i) / sample_rate);
  const double beat_period = 60.0 / spec.tempo_bpm;
  const std::size_t click_len = static_cast<std::size_t>(0.02 * sample_rate);
  for (double t = 0.0; t < seconds; t += beat_period) {
    std::size_t start = static_cast<std::size_t>(t * sample_rate);
    for (std::size_t i = 0; i < click_len && start + i < n; ++i) {
      double env = std::exp(-8.0 * static_cast<double>(i) / static_cast<double>(click_len));
      pcm[start + i] += 0.8 * env *
                        std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / sample_rate);
    }
  }
  return pcm;
}

}  // namespace

std::pair<StyleDomain, StyleDomain> generate_synthetic(const SyntheticStyleSpec& spec_x,
                                                       const SyntheticStyleSpec& spec_y,
                                                       std::size_t n_clips,
                                                       double clip_seconds) {
  spec_x.validate();
  spec_y.validate();
  if (n_clips < 1) throw ValidationError("generate_synthetic: n_clips must be >= 1");
  if (clip_seconds < 2.0)
    throw ValidationError("generate_synthetic: clips must be at least 2 s");
  const Skeleton skel = Skeleton::canonical();
  const double sample_rate = 8000.0;
  const std::size_t t_count =
      static_cast<std::size_t>(std::llround(clip_seconds * kMotionFps));

  auto build = [&](const SyntheticStyleSpec& spec, const std::string& label,
                   const std::string& display) {
    StyleDomain domain;
    domain.label = label;
    domain.display_name = display;
    for (std::size_t k = 0; k < n_clips; ++k) {
      Rng rng(mix_seed(spec.seed, k + 1));
      Clip clip;
      clip.motion = synth_motion(spec, skel, t_count, rng, label);
      auto pcm = synth_click_track(spec, clip_seconds, sample_rate, rng);
      clip.audio = extract_audio_features(pcm, sample_rate);
      if (clip.audio.n_frames != clip.motion.n_frames)
        throw ValidationError("generate_synthetic: frame alignment bug");
      domain.clips.push_back(std::move(clip));
    }
    domain.validate();
    return domain;
  };
  return {build(spec_x, "X", "BJ"), build(spec_y, "Y", "LC")};
}

// ---- CSV ----------------------------------------------------------------------

namespace {

void write_row(std::ofstream& os, const double* row, std::size_t width) {
  char buf[32];
  for (std::size_t j = 0; j < width; ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
    os << (j ? "," : "") << buf;
  }
  os << "\n";
}

std::vector<double> parse_row(const std::string& line, const fs::path& path,
                              std::size_t want, std::size_t line_no) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t pos = 0;
      double v = std::stod(cell, &pos);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": cannot parse '" + cell + "'");
    }
  }
  if (out.size() != want)
    throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(want) + " columns, got " +
                          std::to_string(out.size()));
  for (double v : out)
    if (!std::isfinite(v))
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": non-finite value");
  return out;
}

}  // namespace

void save_motion_csv(const fs::path& path, const MotionSequence& m) {
  m.validate();
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << "fps,joints,layout_version\n";
  os << m.fps << "," << kJointCount << "," << kMotionLayoutVersion << "\n";
  for (std::size_t t = 0; t < m.n_frames; ++t) write_row(os, m.frame(t), kMotionDim);
}

MotionSequence load_motion_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "fps,joints,layout_version")
    throw ValidationError(path.string() + ": missing motion CSV header");
  if (!std::getline(is, line))
    throw ValidationError(path.string() + ": missing header values");
  auto header = parse_row(line, path, 3, 2);
  if (header[1] != static_cast<double>(kJointCount) ||
      header[2] != static_cast<double>(kMotionLayoutVersion))
    throw ValidationError(path.string() + ": unsupported joints/layout_version");
  MotionSequence m;
  m.fps = header[0];
  std::size_t line_no = 3;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = parse_row(line, path, kMotionDim, line_no++);
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  m.n_frames = m.data.size() / kMotionDim;
  if (m.n_frames == 0) throw ValidationError(path.string() + ": no frames");
  m.validate();
  return m;
}

void save_audio_csv(const fs::path& path, const AudioSequence& a) {
  a.validate();
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  for (std::size_t t = 0; t < a.n_frames; ++t) write_row(os, a.frame(t), kAudioDim);
}

AudioSequence load_audio_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read " + path.string());
  AudioSequence a;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = parse_row(line, path, kAudioDim, line_no++);
    a.data.insert(a.data.end(), row.begin(), row.end());
  }
  a.n_frames = a.data.size() / kAudioDim;
  if (a.n_frames == 0) throw ValidationError(path.string() + ": no frames");
  a.validate();
  return a;
}

void save_domain(const fs::path& dataset_dir, const StyleDomain& domain) {
  domain.validate();
  fs::path dir = dataset_dir / ("domain_" + domain.label);
  fs::create_directories(dir);
  char name[64];
  for (std::size_t k = 0; k < domain.clips.size(); ++k) {
    std::snprintf(name, sizeof(name), "clip_%03zu", k);
    save_motion_csv(dir / (std::string(name) + ".motion.csv"), domain.clips[k].motion);
    save_audio_csv(dir / (std::string(name) + ".audio.csv"), domain.clips[k].audio);
  }
}

StyleDomain load_domain(const fs::path& domain_dir) {
  if (!fs::is_directory(domain_dir))
    throw ValidationError("load_domain: no such directory " + domain_dir.string());
  std::string dirname = domain_dir.filename().string();
  StyleDomain domain;
  domain.label = dirname.rfind("domain_", 0) == 0 ? dirname.substr(7) : dirname;
  domain.display_name = domain.label;

  std::map<std::string, fs::path> motions;
  for (const auto& entry : fs::directory_iterator(domain_dir)) {
    std::string fn = entry.path().filename().string();
    if (fn.size() > 11 && fn.substr(fn.size() - 11) == ".motion.csv")
      motions[fn.substr(0, fn.size() - 11)] = entry.path();
  }
  if (motions.empty())
    throw ValidationError("load_domain: no *.motion.csv files in " + domain_dir.string());
  for (const auto& [stem, mpath] : motions) {
    fs::path apath = domain_dir / (stem + ".audio.csv");
    if (!fs::exists(apath))
      throw ValidationError("load_domain: " + mpath.string() + " has no paired " +
                            apath.filename().string());
    Clip clip;
    clip.motion = load_motion_csv(mpath);
    clip.motion.style = domain.label;
    clip.audio = load_audio_csv(apath);
    if (clip.motion.n_frames != clip.audio.n_frames)
      throw ValidationError("load_domain: length mismatch between " + mpath.string() +
                            " and " + apath.string());
    domain.clips.push_back(std::move(clip));
  }
  domain.validate();
  return domain;
}

Dataset load_dataset(const fs::path& dataset_dir) {
  Dataset ds;
  ds.x = load_domain(dataset_dir / "domain_X");
  ds.y = load_domain(dataset_dir / "domain_Y");
  return ds;
}

namespace {
json spec_to_json(const SyntheticStyleSpec& s) {
  return json{{"group_frequency_hz", s.group_frequency_hz},
              {"group_amplitude", s.group_amplitude},
              {"jerkiness", s.jerkiness},
              {"tempo_bpm", s.tempo_bpm},
              {"seed", s.seed}};
}
}  // namespace

void save_manifest(const fs::path& dataset_dir, const DatasetManifest& m) {
  json j;
  j["seed"] = m.seed;
  j["n_clips"] = m.n_clips;
  j["clip_seconds"] = m.clip_seconds;
  j["spec_x"] = spec_to_json(m.spec_x);
  j["spec_y"] = spec_to_json(m.spec_y);
  std::ofstream os(dataset_dir / "manifest.json");
  if (!os) throw ValidationError("cannot write manifest.json");
  os << j.dump(2) << "\n";
}

Clip cut_window(const Clip& clip, std::size_t start, std::size_t len) {
  if (start + len > clip.motion.n_frames)
    throw ValidationError("cut_window: window out of range");
  Clip out;
  out.motion.fps = clip.motion.fps;
  out.motion.style = clip.motion.style;
  out.motion.n_frames = len;
  out.motion.data.assign(clip.motion.frame(start), clip.motion.frame(start + len));
  out.audio.fps = clip.audio.fps;
  out.audio.n_frames = len;
  out.audio.data.assign(clip.audio.frame(start), clip.audio.frame(start + len));
  return out;
}

BatchPair sample_unpaired_batch(const StyleDomain& domain_x, const StyleDomain& domain_y,
                                std::size_t batch, std::size_t clip_len, Rng& rng) {
  if (batch == 0) throw ValidationError("sample_unpaired_batch: batch must be >= 1");
  if (clip_len % 4 != 0)
    throw ValidationError("sample_unpaired_batch: clip_len must be divisible by 4");
  auto check = [clip_len](const StyleDomain& d) {
    if (d.clips.empty())
      throw ValidationError("sample_unpaired_batch: empty domain " + d.label);
    for (const auto& c : d.clips)
      if (c.motion.n_frames < clip_len)
        throw ValidationError("sample_unpaired_batch: clip_len " +
                              std::to_string(clip_len) + " exceeds clip length " +
                              std::to_string(c.motion.n_frames));
  };
  check(domain_x);
  check(domain_y);
  BatchPair out;
  for (std::size_t b = 0; b < batch; ++b) {
    const Clip& cx = domain_x.clips[rng.uniform_index(domain_x.clips.size())];
    std::size_t sx = rng.uniform_index(cx.motion.n_frames - clip_len + 1);
    out.x.push_back(cut_window(cx, sx, clip_len));
    const Clip& cy = domain_y.clips[rng.uniform_index(domain_y.clips.size())];
    std::size_t sy = rng.uniform_index(cy.motion.n_frames - clip_len + 1);
    out.y.push_back(cut_window(cy, sy, clip_len));
  }
  return out;
}

MotionSequence pad_to_multiple(const MotionSequence& m, std::size_t k) {
  if (m.n_frames == 0) throw ValidationError("pad_to_multiple: empty sequence");
  MotionSequence out = m;
  while (out.n_frames % k != 0) {
    out.data.insert(out.data.end(), m.frame(m.n_frames - 1),
                    m.frame(m.n_frames - 1) + kMotionDim);
    ++out.n_frames;
  }
  return out;
}

AudioSequence pad_to_multiple(const AudioSequence& a, std::size_t k) {
  if (a.n_frames == 0) throw ValidationError("pad_to_multiple: empty sequence");
  AudioSequence out = a;
  while (out.n_frames % k != 0) {
    out.data.insert(out.data.end(), a.frame(a.n_frames - 1),
                    a.frame(a.n_frames - 1) + kAudioDim);
    ++out.n_frames;
  }
  return out;
}

}  // namespace cycledance
