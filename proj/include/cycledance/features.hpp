#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cycledance/errors.hpp"

namespace cycledance {

inline constexpr std::size_t kMotionDim = 63;
inline constexpr std::size_t kAudioDim = 35;
inline constexpr double kMotionFps = 30.0;
inline constexpr std::size_t kJointCount = 21;
inline constexpr int kMotionLayoutVersion = 1;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

Vec3 operator+(const Vec3& a, const Vec3& b);
Vec3 operator-(const Vec3& a, const Vec3& b);
Vec3 operator*(const Vec3& a, double s);
double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

/// Unit quaternion (w, x, y, z).
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat from_axis_angle(const Vec3& axis, double angle);
  static Quat about_y(double angle);

  Quat operator*(const Quat& rhs) const;
  Vec3 rotate(const Vec3& v) const;
  double norm() const;
  Quat normalized() const;
};

/// Axis-times-angle encoding with angle in [0, pi]; canonicalizes to the
/// w >= 0 hemisphere first. Throws on a non-unit input.
Vec3 expmap_encode(const Quat& q);
Quat expmap_decode(const Vec3& e);

/// Shortest-path spherical interpolation, t in [0, 1].
Quat slerp(const Quat& a, const Quat& b, double t);

struct Skeleton {
  std::vector<std::string> joint_names;  // exactly 21
  std::vector<int> parent;               // -1 for the root
  std::vector<Vec3> offsets;             // meters

  /// The 21-joint rig used by the synthetic data. The last non-root joint
  /// (RightHand) is the designated end effector whose third exp-map
  /// component is dropped from the 63-dim layout.
  static Skeleton canonical();

  void validate() const;
  std::size_t root_index() const;
  /// Non-root joint indices in skeleton order (the feature layout order).
  std::vector<std::size_t> non_root_joints() const;
};

struct RawPoseSequence {
  double fps = kMotionFps;
  std::vector<Vec3> root_position;               // T entries
  std::vector<std::vector<Quat>> joint_rotations;  // T x 21, skeleton order

  std::size_t frames() const { return root_position.size(); }
  void validate(const Skeleton& skel) const;
};

/// Frame layout (layout_version 1):
///   dims 0..58   exp-maps of the 20 non-root joints in skeleton order,
///                3 per joint except the last one, which drops its third
///                (twist) component;
///   dim 59       vertical root position (m);
///   dims 60..61  ground-plane root displacement since the previous frame,
///                in the previous frame's facing frame (forward, lateral);
///   dim 62       facing-angle change since the previous frame (rad).
/// Deltas are zero at frame 0.
struct MotionSequence {
  double fps = kMotionFps;
  std::size_t n_frames = 0;
  std::vector<double> data;  // n_frames * 63, row-major
  std::string style;

  double* frame(std::size_t t) { return data.data() + t * kMotionDim; }
  const double* frame(std::size_t t) const { return data.data() + t * kMotionDim; }
  void validate() const;
};

/// Frame layout: dims 0..19 MFCC, 20..31 chroma (C = 0), 32 peak flag,
/// 33 beat flag, 34 onset strength.
struct AudioSequence {
  double fps = kMotionFps;
  std::size_t n_frames = 0;
  std::vector<double> data;  // n_frames * 35

  double* frame(std::size_t t) { return data.data() + t * kAudioDim; }
  const double* frame(std::size_t t) const { return data.data() + t * kAudioDim; }
  void validate() const;
};

MotionSequence encode_motion(const RawPoseSequence& raw, const Skeleton& skel,
                             std::string style = "");

struct RootSeed {
  double x = 0.0, z = 0.0, heading = 0.0;
};

RawPoseSequence decode_motion(const MotionSequence& m, const Skeleton& skel,
                              const RootSeed& seed = {});

RawPoseSequence resample(const RawPoseSequence& raw, double target_fps = kMotionFps);

/// Mono PCM to the 35-dim frame-aligned representation. One frame per motion
/// frame: hop = sample_rate / 30, window 1024, Hann.
AudioSequence extract_audio_features(const std::vector<double>& samples,
                                     double sample_rate);

void save_raw_pose_json(const std::filesystem::path& path, const Skeleton& skel,
                        const RawPoseSequence& raw);
std::pair<Skeleton, RawPoseSequence> load_raw_pose_json(const std::filesystem::path& path);

namespace detail {
/// In-place iterative radix-2 FFT over interleaved complex doubles.
/// n must be a power of two.
void fft(std::vector<double>& re, std::vector<double>& im);
}  // namespace detail

}  // namespace cycledance
