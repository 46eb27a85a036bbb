#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cycledance/features.hpp"

namespace cycledance {

/// First and second finite differences of a motion sequence, in frame units
/// (30 fps, unnormalized). v has T-1 rows, a has T-2.
struct KinematicFeatures {
  std::size_t n_v = 0;
  std::size_t n_a = 0;
  std::vector<double> velocities;     // n_v * 63
  std::vector<double> accelerations;  // n_a * 63
};

KinematicFeatures kinematic_features(const MotionSequence& m);

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // symmetric, PSD after the eps*I regularizer
  std::size_t n = 0;
};

inline constexpr double kCovarianceEps = 1e-6;

/// Sample mean/covariance of row vectors (ddof = 1 when n > 1), plus eps*I.
GaussianFit fit_gaussian(const std::vector<double>& rows, std::size_t dim,
                         double eps = kCovarianceEps);

/// Frechet (Wasserstein-2) distance between Gaussians:
/// sqrt(|mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})), with the matrix square
/// root taken via the symmetric product S1^{1/2} S2 S1^{1/2}.
double frechet_distance(const GaussianFit& f1, const GaussianFit& f2);

struct KeyPoseSet {
  std::size_t n = 0;
  std::vector<double> frames;          // n * 63, hip-centered
  std::vector<std::size_t> indices;    // source frame index per key pose
};

/// Key poses at strict local maxima of mean |acceleration|. min_gap > 0
/// additionally suppresses maxima closer than min_gap frames to a larger one.
/// Throws when no keyframe exists (constant input, T < 3).
KeyPoseSet extract_keyframes(const MotionSequence& m, std::size_t min_gap = 0);

/// Motion Frechet distance: Gaussians over pooled 126-dim (v, a) rows.
double mfd(const std::vector<MotionSequence>& true_motions,
           const std::vector<MotionSequence>& generated_motions);

/// Pose Frechet distance: Gaussians over pooled hip-centered key poses.
double pfd(const std::vector<MotionSequence>& source_motions,
           const std::vector<MotionSequence>& generated_motions,
           std::size_t min_gap = 0);

struct MetricsReport {
  struct Row {
    std::string direction;
    double mfd_value = 0.0;
    double pfd_value = 0.0;
    std::size_t n_clips = 0;
  };
  std::vector<Row> rows;
  std::string config_hash;

  void write_csv(const std::filesystem::path& path) const;
};

/// Style transfer callable: motion plus its paired audio to transferred motion.
using TransferFn =
    std::function<MotionSequence(const MotionSequence&, const AudioSequence&)>;

struct EvalDomain {
  std::vector<MotionSequence> motions;
  std::vector<AudioSequence> audios;
};

/// Runs each requested direction ("x2y", "y2x") over held-out clips and
/// reports MFD against the target-style real set and PFD against the sources.
/// Transfers run on a bounded parallel map (n_threads >= 1); results are
/// assembled by clip index, so the report does not depend on thread count.
MetricsReport evaluate(const TransferFn& transfer_x2y, const TransferFn& transfer_y2x,
                       const EvalDomain& domain_x, const EvalDomain& domain_y,
                       const std::vector<std::string>& directions,
                       std::size_t n_threads = 1);

/// FNV-1a over a canonical string; used to stamp output files.
std::string config_hash_hex(const std::string& canonical);

}  // namespace cycledance
