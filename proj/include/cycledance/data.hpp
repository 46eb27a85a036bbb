#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cycledance/features.hpp"
#include "cycledance/rng.hpp"

namespace cycledance {

struct Clip {
  MotionSequence motion;
  AudioSequence audio;
};

struct StyleDomain {
  std::string label;         // "X" or "Y"
  std::string display_name;  // e.g. "BJ", "LC"
  std::vector<Clip> clips;

  void validate() const;
};

/// Joint groups driving the synthetic styles: 0 spine, 1 head, 2 arms, 3 legs.
struct SyntheticStyleSpec {
  std::array<double, 4> group_frequency_hz{0.4, 0.6, 0.8, 0.5};
  std::array<double, 4> group_amplitude{0.25, 0.15, 0.55, 0.35};
  double jerkiness = 0.0;   // probability of a step-hold beat
  double tempo_bpm = 120.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Smooth, flowing default (ballet-jazz stand-in).
SyntheticStyleSpec smooth_style_spec(std::uint64_t seed);
/// Jerky step-hold default (locking stand-in).
SyntheticStyleSpec jerky_style_spec(std::uint64_t seed);

/// Generates n_clips paired motion+audio clips per style. Motion is a sum of
/// per-joint sinusoids shaped by the spec (optionally sampled-and-held per
/// beat), encoded to the 63-dim layout; audio is a click track at the spec
/// tempo run through the feature extractor. Deterministic per seed.
std::pair<StyleDomain, StyleDomain> generate_synthetic(const SyntheticStyleSpec& spec_x,
                                                       const SyntheticStyleSpec& spec_y,
                                                       std::size_t n_clips,
                                                       double clip_seconds);

void save_motion_csv(const std::filesystem::path& path, const MotionSequence& m);
MotionSequence load_motion_csv(const std::filesystem::path& path);
void save_audio_csv(const std::filesystem::path& path, const AudioSequence& a);
AudioSequence load_audio_csv(const std::filesystem::path& path);

/// Writes dataset_dir/domain_<label>/clip_<k>.{motion,audio}.csv.
void save_domain(const std::filesystem::path& dataset_dir, const StyleDomain& domain);
/// Loads one domain directory; rejects malformed clips naming the file.
StyleDomain load_domain(const std::filesystem::path& domain_dir);

struct Dataset {
  StyleDomain x;
  StyleDomain y;
};

/// dataset_dir must hold domain_X/ and domain_Y/.
Dataset load_dataset(const std::filesystem::path& dataset_dir);

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::size_t n_clips = 0;
  double clip_seconds = 0.0;
  SyntheticStyleSpec spec_x;
  SyntheticStyleSpec spec_y;
};

void save_manifest(const std::filesystem::path& dataset_dir, const DatasetManifest& m);

struct BatchPair {
  std::vector<Clip> x;  // batch windows from domain X
  std::vector<Clip> y;  // independent windows from domain Y
};

/// Independent uniform clip and window-start draws per domain; the audio
/// window is cut time-aligned to its own motion window.
BatchPair sample_unpaired_batch(const StyleDomain& domain_x, const StyleDomain& domain_y,
                                std::size_t batch, std::size_t clip_len, Rng& rng);

/// Window [start, start+len) of a paired clip.
Clip cut_window(const Clip& clip, std::size_t start, std::size_t len);

/// Repeats the last frame until n_frames is a multiple of k (generator
/// padding policy; callers trim the output back to the source length).
MotionSequence pad_to_multiple(const MotionSequence& m, std::size_t k);
AudioSequence pad_to_multiple(const AudioSequence& a, std::size_t k);

}  // namespace cycledance
