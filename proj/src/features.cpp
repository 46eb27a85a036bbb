#include "cycledance/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace cycledance {

using json = nlohmann::json;

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Quat Quat::from_axis_angle(const Vec3& axis, double angle) {
  double n = cycledance::norm(axis);
  if (n < 1e-15) return {1.0, 0.0, 0.0, 0.0};
  double s = std::sin(angle / 2.0) / n;
  return {std::cos(angle / 2.0), axis.x * s, axis.y * s, axis.z * s};
}

Quat Quat::about_y(double angle) {
  return {std::cos(angle / 2.0), 0.0, std::sin(angle / 2.0), 0.0};
}

Quat Quat::operator*(const Quat& r) const {
  return {w * r.w - x * r.x - y * r.y - z * r.z,
          w * r.x + x * r.w + y * r.z - z * r.y,
          w * r.y - x * r.z + y * r.w + z * r.x,
          w * r.z + x * r.y - y * r.x + z * r.w};
}

Vec3 Quat::rotate(const Vec3& v) const {
  // q v q*, expanded.
  Vec3 u{x, y, z};
  Vec3 cross1{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
  Vec3 cross2{u.y * cross1.z - u.z * cross1.y, u.z * cross1.x - u.x * cross1.z,
              u.x * cross1.y - u.y * cross1.x};
  return v + cross1 * (2.0 * w) + cross2 * 2.0;
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
  double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Vec3 expmap_encode(const Quat& q_in) {
  if (std::abs(q_in.norm() - 1.0) > 1e-9)
    throw ValidationError("expmap_encode: quaternion norm " +
                          std::to_string(q_in.norm()) + " is not 1");
  Quat q = q_in;
  if (q.w < 0.0) {
    q.w = -q.w;
    q.x = -q.x;
    q.y = -q.y;
    q.z = -q.z;
  }
  double s = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  // angle = 2 atan2(s, w) in [0, pi]; e = axis * angle = v * (angle / s).
  double angle = 2.0 * std::atan2(s, q.w);
  double scale;
  if (s < 1e-8) {
    scale = 2.0 / q.w;  // limit of angle/s as s -> 0
  } else {
    scale = angle / s;
  }
  return {q.x * scale, q.y * scale, q.z * scale};
}

Quat expmap_decode(const Vec3& e) {
  double angle = norm(e);
  double half = angle / 2.0;
  double scale;
  if (angle < 1e-8) {
    scale = 0.5 - angle * angle / 48.0;  // sin(a/2)/a series
  } else {
    scale = std::sin(half) / angle;
  }
  return Quat{std::cos(half), e.x * scale, e.y * scale, e.z * scale}.normalized();
}

Quat slerp(const Quat& a, const Quat& b_in, double t) {
  Quat b = b_in;
  double cos_omega = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  if (cos_omega < 0.0) {
    cos_omega = -cos_omega;
    b = {-b.w, -b.x, -b.y, -b.z};
  }
  double wa, wb;
  if (cos_omega > 1.0 - 1e-12) {
    wa = 1.0 - t;
    wb = t;
  } else {
    double omega = std::acos(std::min(1.0, cos_omega));
    double so = std::sin(omega);
    wa = std::sin((1.0 - t) * omega) / so;
    wb = std::sin(t * omega) / so;
  }
  return Quat{wa * a.w + wb * b.w, wa * a.x + wb * b.x, wa * a.y + wb * b.y,
              wa * a.z + wb * b.z}
      .normalized();
}

// ---- skeleton ----------------------------------------------------------------

Skeleton Skeleton::canonical() {
  Skeleton s;
  auto add = [&s](const char* name, int parent, Vec3 off) {
    s.joint_names.emplace_back(name);
    s.parent.push_back(parent);
    s.offsets.push_back(off);
  };
  add("Hips", -1, {0.0, 0.95, 0.0});
  add("Spine", 0, {0.0, 0.12, 0.0});
  add("Chest", 1, {0.0, 0.15, 0.0});
  add("Neck", 2, {0.0, 0.15, 0.0});
  add("Head", 3, {0.0, 0.12, 0.0});
  add("LeftUpLeg", 0, {0.10, -0.05, 0.0});
  add("LeftLeg", 5, {0.0, -0.42, 0.0});
  add("LeftFoot", 6, {0.0, -0.40, 0.0});
  add("LeftToe", 7, {0.0, -0.06, 0.12});
  add("RightUpLeg", 0, {-0.10, -0.05, 0.0});
  add("RightLeg", 9, {0.0, -0.42, 0.0});
  add("RightFoot", 10, {0.0, -0.40, 0.0});
  add("RightToe", 11, {0.0, -0.06, 0.12});
  add("LeftShoulder", 2, {0.16, 0.10, 0.0});
  add("LeftArm", 13, {0.12, 0.0, 0.0});
  add("LeftForeArm", 14, {0.26, 0.0, 0.0});
  add("LeftHand", 15, {0.25, 0.0, 0.0});
  add("RightShoulder", 2, {-0.16, 0.10, 0.0});
  add("RightArm", 17, {-0.12, 0.0, 0.0});
  add("RightForeArm", 18, {-0.26, 0.0, 0.0});
  add("RightHand", 19, {-0.25, 0.0, 0.0});
  return s;
}

void Skeleton::validate() const {
  if (joint_names.size() != kJointCount || parent.size() != kJointCount ||
      offsets.size() != kJointCount)
    throw ValidationError("skeleton: expected exactly 21 joints, got " +
                          std::to_string(joint_names.size()));
  int roots = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (parent[i] < 0) {
      ++roots;
      continue;
    }
    // Walk to the root; a cycle would loop longer than the joint count.
    int p = parent[i];
    std::size_t hops = 0;
    while (p >= 0) {
      if (p >= static_cast<int>(kJointCount) || ++hops > kJointCount)
        throw ValidationError("skeleton: parent links do not form a tree");
      p = parent[p];
    }
  }
  if (roots != 1)
    throw ValidationError("skeleton: expected one root, found " + std::to_string(roots));
}

std::size_t Skeleton::root_index() const {
  for (std::size_t i = 0; i < parent.size(); ++i)
    if (parent[i] < 0) return i;
  throw ValidationError("skeleton: no root joint");
}

std::vector<std::size_t> Skeleton::non_root_joints() const {
  std::vector<std::size_t> out;
  std::size_t r = root_index();
  for (std::size_t i = 0; i < joint_names.size(); ++i)
    if (i != r) out.push_back(i);
  return out;
}

void RawPoseSequence::validate(const Skeleton& skel) const {
  skel.validate();
  if (frames() < 2) throw ValidationError("raw pose: need at least 2 frames");
  if (joint_rotations.size() != frames())
    throw ValidationError("raw pose: rotation/position frame counts differ");
  for (const auto& fr : joint_rotations) {
    if (fr.size() != kJointCount)
      throw ValidationError("raw pose: frame has " + std::to_string(fr.size()) +
                            " joints, expected 21");
    for (const auto& q : fr)
      if (std::abs(q.norm() - 1.0) > 1e-9)
        throw ValidationError("raw pose: non-unit quaternion");
  }
}

void MotionSequence::validate() const {
  if (data.size() != n_frames * kMotionDim)
    throw ValidationError("motion: frame buffer is not frames x 63");
  for (double v : data)
    if (!std::isfinite(v)) throw NumericError("motion: non-finite value");
}

void AudioSequence::validate() const {
  if (data.size() != n_frames * kAudioDim)
    throw ValidationError("audio: frame buffer is not frames x 35");
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* f = frame(t);
    for (std::size_t j = 0; j < kAudioDim; ++j)
      if (!std::isfinite(f[j])) throw NumericError("audio: non-finite value");
    if ((f[32] != 0.0 && f[32] != 1.0) || (f[33] != 0.0 && f[33] != 1.0))
      throw ValidationError("audio: peak/beat flags must be 0 or 1");
  }
}

// ---- motion encoding -------------------------------------------------------

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

// Heading of the body's +z axis projected to the ground plane.
// Falls back to the previous heading when the axis is near vertical.
double facing_angle(const Quat& root, double fallback) {
  Vec3 f = root.rotate({0.0, 0.0, 1.0});
  double planar = std::hypot(f.x, f.z);
  if (planar < 1e-8) return fallback;
  return std::atan2(f.x, f.z);
}

}  // namespace

MotionSequence encode_motion(const RawPoseSequence& raw, const Skeleton& skel,
                             std::string style) {
  raw.validate(skel);
  if (std::abs(raw.fps - kMotionFps) > 1e-9)
    throw ValidationError("encode_motion: fps " + std::to_string(raw.fps) +
                          " != 30 (resample first)");
  const auto joints = skel.non_root_joints();
  const std::size_t t_count = raw.frames();
  MotionSequence m;
  m.n_frames = t_count;
  m.style = std::move(style);
  m.data.assign(t_count * kMotionDim, 0.0);

  double prev_heading = 0.0;
  for (std::size_t t = 0; t < t_count; ++t) {
    double* out = m.frame(t);
    std::size_t d = 0;
    for (std::size_t j = 0; j < joints.size(); ++j) {
      Vec3 e = expmap_encode(raw.joint_rotations[t][joints[j]]);
      out[d++] = e.x;
      out[d++] = e.y;
      if (j + 1 < joints.size()) out[d++] = e.z;  // last joint drops its twist dim
    }
    double heading = facing_angle(raw.joint_rotations[t][skel.root_index()],
                                  t == 0 ? 0.0 : prev_heading);
    out[59] = raw.root_position[t].y;
    if (t > 0) {
      double dx = raw.root_position[t].x - raw.root_position[t - 1].x;
      double dz = raw.root_position[t].z - raw.root_position[t - 1].z;
      double sh = std::sin(prev_heading), ch = std::cos(prev_heading);
      out[60] = dx * sh + dz * ch;   // forward
      out[61] = dx * ch - dz * sh;   // lateral
      out[62] = wrap_angle(heading - prev_heading);
    }
    prev_heading = heading;
  }
  return m;
}

RawPoseSequence decode_motion(const MotionSequence& m, const Skeleton& skel,
                              const RootSeed& seed) {
  m.validate();
  skel.validate();
  if (m.n_frames == 0) throw ValidationError("decode_motion: empty sequence");
  const auto joints = skel.non_root_joints();
  RawPoseSequence raw;
  raw.fps = m.fps;
  raw.root_position.resize(m.n_frames);
  raw.joint_rotations.assign(m.n_frames, std::vector<Quat>(kJointCount));

  double heading = seed.heading;
  double px = seed.x, pz = seed.z;
  for (std::size_t t = 0; t < m.n_frames; ++t) {
    const double* f = m.frame(t);
    if (t > 0) {
      double fwd = f[60], lat = f[61];
      double sh = std::sin(heading), ch = std::cos(heading);
      px += fwd * sh + lat * ch;
      pz += fwd * ch - lat * sh;
      heading += f[62];
    }
    raw.root_position[t] = {px, f[59], pz};
    raw.joint_rotations[t][skel.root_index()] = Quat::about_y(heading);
    std::size_t d = 0;
    for (std::size_t j = 0; j < joints.size(); ++j) {
      Vec3 e;
      e.x = f[d++];
      e.y = f[d++];
      e.z = (j + 1 < joints.size()) ? f[d++] : 0.0;
      raw.joint_rotations[t][joints[j]] = expmap_decode(e);
    }
  }
  return raw;
}

RawPoseSequence resample(const RawPoseSequence& raw, double target_fps) {
  if (raw.frames() < 2) throw ValidationError("resample: need at least 2 frames");
  if (target_fps <= 0.0) throw ValidationError("resample: bad target fps");
  if (raw.fps < target_fps - 1e-9)
    throw ValidationError("resample: upsampling from " + std::to_string(raw.fps) +
                          " to " + std::to_string(target_fps) + " fps is unsupported");
  const double duration = static_cast<double>(raw.frames()) / raw.fps;
  const std::size_t n_out =
      static_cast<std::size_t>(std::floor(duration * target_fps + 1e-9));
  RawPoseSequence out;
  out.fps = target_fps;
  out.root_position.resize(n_out);
  out.joint_rotations.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    double s = static_cast<double>(k) * raw.fps / target_fps;
    std::size_t i0 = std::min(static_cast<std::size_t>(s), raw.frames() - 1);
    std::size_t i1 = std::min(i0 + 1, raw.frames() - 1);
    double a = s - static_cast<double>(i0);
    out.root_position[k] =
        raw.root_position[i0] * (1.0 - a) + raw.root_position[i1] * a;
    auto& dst = out.joint_rotations[k];
    dst.resize(kJointCount);
    for (std::size_t j = 0; j < kJointCount; ++j)
      dst[j] = (a == 0.0) ? raw.joint_rotations[i0][j]
                          : slerp(raw.joint_rotations[i0][j], raw.joint_rotations[i1][j], a);
  }
  return out;
}

// ---- audio -------------------------------------------------------------------

namespace detail {

void fft(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw ValidationError("fft: size must be a power of two");
  // bit reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / static_cast<double>(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::size_t a = i + k, b = i + k + len / 2;
        double tr = re[b] * cr - im[b] * ci;
        double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

}  // namespace detail

namespace {

constexpr std::size_t kWindow = 1024;
constexpr std::size_t kMelBands = 40;
constexpr std::size_t kMfcc = 20;
constexpr std::size_t kChroma = 12;
constexpr std::size_t kMedianHalf = 10;  // running-median window = 21 frames

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

struct MelBank {
  // weights[band][bin]
  std::vector<std::vector<double>> weights;
};

MelBank make_mel_bank(double sr) {
  MelBank bank;
  const std::size_t bins = kWindow / 2 + 1;
  std::vector<double> edges(kMelBands + 2);
  double lo = hz_to_mel(0.0), hi = hz_to_mel(sr / 2.0);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(kMelBands + 1));
  bank.weights.assign(kMelBands, std::vector<double>(bins, 0.0));
  for (std::size_t b = 0; b < kMelBands; ++b) {
    double fl = edges[b], fc = edges[b + 1], fr = edges[b + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sr / static_cast<double>(kWindow);
      if (f <= fl || f >= fr) continue;
      bank.weights[b][k] = f <= fc ? (f - fl) / (fc - fl) : (fr - f) / (fr - fc);
    }
  }
  return bank;
}

std::vector<double> dct2_ortho(const std::vector<double>& x, std::size_t keep) {
  const std::size_t n = x.size();
  std::vector<double> out(keep, 0.0);
  for (std::size_t k = 0; k < keep; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += x[i] * std::cos(M_PI * static_cast<double>(k) *
                           (2.0 * static_cast<double>(i) + 1.0) /
                           (2.0 * static_cast<double>(n)));
    double alpha = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                          : std::sqrt(2.0 / static_cast<double>(n));
    out[k] = alpha * s;
  }
  return out;
}

int pitch_class(double freq) {
  // MIDI note mod 12 with C = 0 (A440 -> 9).
  double note = 69.0 + 12.0 * std::log2(freq / 440.0);
  int cls = static_cast<int>(std::llround(note)) % 12;
  return cls < 0 ? cls + 12 : cls;
}

}  // namespace

AudioSequence extract_audio_features(const std::vector<double>& samples,
                                     double sample_rate) {
  if (sample_rate < 8000.0)
    throw ValidationError("audio: sample rate must be >= 8000 Hz");
  for (double s : samples)
    if (!std::isfinite(s)) throw NumericError("audio: non-finite sample");
  const std::size_t n_frames = static_cast<std::size_t>(
      std::floor(static_cast<double>(samples.size()) * kMotionFps / sample_rate));
  if (samples.size() < kWindow || n_frames == 0)
    throw ValidationError("audio: signal shorter than one analysis window");

  const MelBank mel = make_mel_bank(sample_rate);
  const std::size_t bins = kWindow / 2 + 1;
  std::vector<double> hann(kWindow);
  for (std::size_t i = 0; i < kWindow; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                   static_cast<double>(kWindow));

  AudioSequence out;
  out.n_frames = n_frames;
  out.data.assign(n_frames * kAudioDim, 0.0);

  std::vector<double> prev_mag(bins, 0.0), mag(bins), power(bins);
  std::vector<double> onset(n_frames, 0.0);
  std::vector<double> re(kWindow), im(kWindow);

  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(
        std::floor(static_cast<double>(t) * sample_rate / kMotionFps));
    for (std::size_t i = 0; i < kWindow; ++i) {
      double s = (start + i < samples.size()) ? samples[start + i] : 0.0;
      re[i] = s * hann[i];
      im[i] = 0.0;
    }
    detail::fft(re, im);
    for (std::size_t k = 0; k < bins; ++k) {
      power[k] = re[k] * re[k] + im[k] * im[k];
      mag[k] = std::sqrt(power[k]);
    }

    double* f = out.frame(t);

    // MFCC: mel energies -> log -> DCT-II (orthonormal), keep 20.
    std::vector<double> mel_log(kMelBands);
    for (std::size_t b = 0; b < kMelBands; ++b) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += mel.weights[b][k] * power[k];
      mel_log[b] = std::log(std::max(e, 1e-10));
    }
    auto mfcc = dct2_ortho(mel_log, kMfcc);
    std::copy(mfcc.begin(), mfcc.end(), f);

    // Chroma: fold power into 12 pitch classes, L2 normalize unless silent.
    double cnorm = 0.0;
    for (std::size_t k = 1; k < bins; ++k) {
      double freq = static_cast<double>(k) * sample_rate / static_cast<double>(kWindow);
      if (freq < 27.5 || freq > 4500.0) continue;
      f[20 + pitch_class(freq)] += power[k];
    }
    for (std::size_t c = 0; c < kChroma; ++c) cnorm += f[20 + c] * f[20 + c];
    cnorm = std::sqrt(cnorm);
    if (cnorm > 1e-12)
      for (std::size_t c = 0; c < kChroma; ++c) f[20 + c] /= cnorm;
    else
      for (std::size_t c = 0; c < kChroma; ++c) f[20 + c] = 0.0;

    // Onset strength: positive spectral flux on magnitudes.
    if (t > 0) {
      double flux = 0.0;
      for (std::size_t k = 0; k < bins; ++k) flux += std::max(0.0, mag[k] - prev_mag[k]);
      onset[t] = flux;
    }
    f[34] = onset[t];
    prev_mag = mag;
  }

  // Peak flags: strict local maxima of onset strength above the running median.
  std::vector<std::size_t> peaks;
  for (std::size_t t = 1; t + 1 < n_frames; ++t) {
    if (!(onset[t] > onset[t - 1] && onset[t] > onset[t + 1])) continue;
    std::size_t lo = t > kMedianHalf ? t - kMedianHalf : 0;
    std::size_t hi = std::min(n_frames - 1, t + kMedianHalf);
    std::vector<double> win(onset.begin() + lo, onset.begin() + hi + 1);
    std::nth_element(win.begin(), win.begin() + win.size() / 2, win.end());
    if (onset[t] > win[win.size() / 2]) {
      out.frame(t)[32] = 1.0;
      peaks.push_back(t);
    }
  }

  // Beat flags: peaks snapped to the dominant inter-onset period.
  if (peaks.size() >= 2) {
    const std::size_t lag_min = 6;
    const std::size_t lag_max = std::min<std::size_t>(n_frames / 2, 90);
    std::size_t best_lag = 0;
    double best = 0.0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
      double acc = 0.0;
      for (std::size_t t = lag; t < n_frames; ++t) acc += onset[t] * onset[t - lag];
      if (acc > best) {
        best = acc;
        best_lag = lag;
      }
    }
    if (best_lag > 0) {
      std::size_t best_phase = 0;
      double best_sum = -1.0;
      for (std::size_t phase = 0; phase < best_lag; ++phase) {
        double s = 0.0;
        for (std::size_t t = phase; t < n_frames; t += best_lag) s += onset[t];
        if (s > best_sum) {
          best_sum = s;
          best_phase = phase;
        }
      }
      const std::size_t tol = std::max<std::size_t>(2, best_lag / 8);
      for (std::size_t g = best_phase; g < n_frames; g += best_lag) {
        std::size_t nearest = n_frames;
        std::size_t dist = tol + 1;
        for (std::size_t p : peaks) {
          std::size_t d = p > g ? p - g : g - p;
          if (d < dist) {
            dist = d;
            nearest = p;
          }
        }
        if (nearest < n_frames) out.frame(nearest)[33] = 1.0;
      }
    }
  }

  return out;
}

// ---- raw pose JSON ------------------------------------------------------------

void save_raw_pose_json(const std::filesystem::path& path, const Skeleton& skel,
                        const RawPoseSequence& raw) {
  json j;
  j["skeleton"]["joint_names"] = skel.joint_names;
  j["skeleton"]["parent"] = skel.parent;
  json offs = json::array();
  for (const auto& o : skel.offsets) offs.push_back({o.x, o.y, o.z});
  j["skeleton"]["offsets"] = offs;
  j["fps"] = raw.fps;
  json pos = json::array();
  for (const auto& p : raw.root_position) pos.push_back({p.x, p.y, p.z});
  j["root_position"] = pos;
  json rots = json::array();
  for (const auto& fr : raw.joint_rotations) {
    json frame = json::array();
    for (const auto& q : fr) frame.push_back({q.w, q.x, q.y, q.z});
    rots.push_back(std::move(frame));
  }
  j["joint_rotations"] = rots;
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

std::pair<Skeleton, RawPoseSequence> load_raw_pose_json(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read " + path.string());
  json j = json::parse(is);
  Skeleton skel;
  skel.joint_names = j.at("skeleton").at("joint_names").get<std::vector<std::string>>();
  skel.parent = j.at("skeleton").at("parent").get<std::vector<int>>();
  for (const auto& o : j.at("skeleton").at("offsets"))
    skel.offsets.push_back({o.at(0), o.at(1), o.at(2)});
  RawPoseSequence raw;
  raw.fps = j.at("fps").get<double>();
  for (const auto& p : j.at("root_position"))
    raw.root_position.push_back({p.at(0), p.at(1), p.at(2)});
  for (const auto& fr : j.at("joint_rotations")) {
    std::vector<Quat> frame;
    for (const auto& q : fr) frame.push_back({q.at(0), q.at(1), q.at(2), q.at(3)});
    raw.joint_rotations.push_back(std::move(frame));
  }
  raw.validate(skel);
  return {std::move(skel), std::move(raw)};
}

}  // namespace cycledance
