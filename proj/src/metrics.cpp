#include "cycledance/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <thread>

namespace cycledance {

KinematicFeatures kinematic_features(const MotionSequence& m) {
  m.validate();
  if (m.n_frames < 3)
    throw ValidationError("kinematic_features: need T >= 3, got " +
                          std::to_string(m.n_frames));
  KinematicFeatures out;
  out.n_v = m.n_frames - 1;
  out.n_a = m.n_frames - 2;
  out.velocities.resize(out.n_v * kMotionDim);
  out.accelerations.resize(out.n_a * kMotionDim);
  for (std::size_t i = 1; i < m.n_frames; ++i) {
    const double* xi = m.frame(i);
    const double* xp = m.frame(i - 1);
    double* v = out.velocities.data() + (i - 1) * kMotionDim;
    for (std::size_t j = 0; j < kMotionDim; ++j) v[j] = xi[j] - xp[j];
  }
  for (std::size_t i = 1; i + 1 < m.n_frames; ++i) {
    const double* xp = m.frame(i - 1);
    const double* xi = m.frame(i);
    const double* xn = m.frame(i + 1);
    double* a = out.accelerations.data() + (i - 1) * kMotionDim;
    for (std::size_t j = 0; j < kMotionDim; ++j) a[j] = xn[j] - 2.0 * xi[j] + xp[j];
  }
  return out;
}

GaussianFit fit_gaussian(const std::vector<double>& rows, std::size_t dim, double eps) {
  if (dim == 0 || rows.size() % dim != 0)
    throw ValidationError("fit_gaussian: row buffer is not n x dim");
  const std::size_t n = rows.size() / dim;
  if (n == 0) throw ValidationError("fit_gaussian: no samples");
  GaussianFit fit;
  fit.n = n;
  fit.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      fit.mean[static_cast<Eigen::Index>(j)] += rows[i * dim + j];
  fit.mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  Eigen::VectorXd centered(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j)
      centered[static_cast<Eigen::Index>(j)] =
          rows[i * dim + j] - fit.mean[static_cast<Eigen::Index>(j)];
    cov.noalias() += centered * centered.transpose();
  }
  cov /= static_cast<double>(n > 1 ? n - 1 : 1);
  cov = ((cov + cov.transpose()) / 2.0).eval();
  cov.diagonal().array() += eps;
  fit.covariance = std::move(cov);
  return fit;
}

double frechet_distance(const GaussianFit& f1, const GaussianFit& f2) {
  if (f1.mean.size() != f2.mean.size())
    throw ValidationError("frechet_distance: dimension mismatch " +
                          std::to_string(f1.mean.size()) + " vs " +
                          std::to_string(f2.mean.size()));
  // Bitwise-identical fits are exactly at distance zero; the eigen route
  // would otherwise report cancellation noise (~1e-4 on wide features).
  if (f1.mean.cwiseEqual(f2.mean).all() &&
      f1.covariance.cwiseEqual(f2.covariance).all())
    return 0.0;
  const auto check_psd = [](const Eigen::VectorXd& evals, const char* which) {
    double scale = std::max(1.0, evals.cwiseAbs().maxCoeff());
    if (evals.minCoeff() < -1e-8 * scale)
      throw ValidationError(std::string("frechet_distance: ") + which +
                            " covariance is not PSD after regularization");
  };

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(f1.covariance);
  check_psd(es1.eigenvalues(), "first");
  Eigen::VectorXd sqrt_evals = es1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd s1_sqrt =
      es1.eigenvectors() * sqrt_evals.asDiagonal() * es1.eigenvectors().transpose();

  Eigen::MatrixXd inner = s1_sqrt * f2.covariance * s1_sqrt;
  inner = ((inner + inner.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(inner);
  check_psd(es2.eigenvalues(), "second");
  double tr_sqrt = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double mean_term = (f1.mean - f2.mean).squaredNorm();
  double fd2 = mean_term + f1.covariance.trace() + f2.covariance.trace() - 2.0 * tr_sqrt;
  return std::sqrt(std::max(0.0, fd2));
}

KeyPoseSet extract_keyframes(const MotionSequence& m, std::size_t min_gap) {
  if (m.n_frames < 3)
    throw ValidationError("extract_keyframes: need T >= 3, got " +
                          std::to_string(m.n_frames));
  KinematicFeatures kin = kinematic_features(m);
  // s[k] = mean |a| of pose index k+1.
  std::vector<double> s(kin.n_a);
  for (std::size_t k = 0; k < kin.n_a; ++k) {
    double acc = 0.0;
    const double* a = kin.accelerations.data() + k * kMotionDim;
    for (std::size_t j = 0; j < kMotionDim; ++j) acc += std::abs(a[j]);
    s[k] = acc / static_cast<double>(kMotionDim);
  }
  std::vector<std::size_t> maxima;  // indices into s
  for (std::size_t k = 1; k + 1 < s.size(); ++k)
    if (s[k] > s[k - 1] && s[k] > s[k + 1]) maxima.push_back(k);

  if (min_gap > 0 && !maxima.empty()) {
    // Non-maximum suppression: keep larger peaks, drop neighbors within the gap.
    std::vector<std::size_t> by_height(maxima);
    std::stable_sort(by_height.begin(), by_height.end(),
                     [&s](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::vector<bool> keep(s.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t k : by_height) {
      bool blocked = false;
      for (std::size_t other : kept)
        if ((k > other ? k - other : other - k) < min_gap) {
          blocked = true;
          break;
        }
      if (!blocked) {
        keep[k] = true;
        kept.push_back(k);
      }
    }
    maxima.erase(std::remove_if(maxima.begin(), maxima.end(),
                                [&keep](std::size_t k) { return !keep[k]; }),
                 maxima.end());
  }

  if (maxima.empty())
    throw ValidationError("extract_keyframes: no acceleration maxima found");

  KeyPoseSet set;
  set.n = maxima.size();
  set.frames.reserve(set.n * kMotionDim);
  for (std::size_t k : maxima) {
    std::size_t pose = k + 1;  // a_i indexes pose i
    set.indices.push_back(pose);
    const double* f = m.frame(pose);
    std::vector<double> row(f, f + kMotionDim);
    // Hip-centering: the planar root position enters the layout only through
    // the frame-to-frame displacement dims; zero them, keep the vertical.
    row[60] = 0.0;
    row[61] = 0.0;
    set.frames.insert(set.frames.end(), row.begin(), row.end());
  }
  return set;
}

namespace {

std::vector<double> pooled_va(const std::vector<MotionSequence>& set) {
  std::vector<double> rows;
  for (const auto& m : set) {
    KinematicFeatures kin = kinematic_features(m);
    // Rows where both v_i and a_i exist: pose indices 1 .. T-2.
    for (std::size_t i = 0; i < kin.n_a; ++i) {
      const double* v = kin.velocities.data() + i * kMotionDim;
      const double* a = kin.accelerations.data() + i * kMotionDim;
      rows.insert(rows.end(), v, v + kMotionDim);
      rows.insert(rows.end(), a, a + kMotionDim);
    }
  }
  return rows;
}

}  // namespace

double mfd(const std::vector<MotionSequence>& true_motions,
           const std::vector<MotionSequence>& generated_motions) {
  if (true_motions.empty() || generated_motions.empty())
    throw ValidationError("mfd: empty motion set");
  auto rows_true = pooled_va(true_motions);
  auto rows_gen = pooled_va(generated_motions);
  GaussianFit f1 = fit_gaussian(rows_true, 2 * kMotionDim);
  GaussianFit f2 = fit_gaussian(rows_gen, 2 * kMotionDim);
  return frechet_distance(f1, f2);
}

double pfd(const std::vector<MotionSequence>& source_motions,
           const std::vector<MotionSequence>& generated_motions, std::size_t min_gap) {
  if (source_motions.empty() || generated_motions.empty())
    throw ValidationError("pfd: empty motion set");
  auto pool = [min_gap](const std::vector<MotionSequence>& set, const char* which) {
    std::vector<double> rows;
    std::size_t found = 0;
    for (const auto& m : set) {
      try {
        KeyPoseSet keys = extract_keyframes(m, min_gap);
        rows.insert(rows.end(), keys.frames.begin(), keys.frames.end());
        found += keys.n;
      } catch (const ValidationError&) {
        // A single flat clip contributes nothing; the set-level check below
        // rejects the case where no clip yields keyframes.
      }
    }
    if (found == 0)
      throw ValidationError(std::string("pfd: too few keyframes in ") + which + " set");
    return rows;
  };
  auto rows_src = pool(source_motions, "source");
  auto rows_gen = pool(generated_motions, "generated");
  GaussianFit f1 = fit_gaussian(rows_src, kMotionDim);
  GaussianFit f2 = fit_gaussian(rows_gen, kMotionDim);
  return frechet_distance(f1, f2);
}

// ---- evaluation --------------------------------------------------------------

namespace {

/// Deterministic bounded parallel map: each index is processed by exactly one
/// worker and written to its own slot.
std::vector<MotionSequence> parallel_transfer(const TransferFn& fn,
                                              const EvalDomain& domain,
                                              std::size_t n_threads) {
  const std::size_t n = domain.motions.size();
  std::vector<MotionSequence> out(n);
  n_threads = std::max<std::size_t>(1, std::min(n_threads, n == 0 ? 1 : n));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(domain.motions[i], domain.audios[i]);
    return out;
  }
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < n_threads; ++w) {
    workers.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += n_threads)
          out[i] = fn(domain.motions[i], domain.audios[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace

MetricsReport evaluate(const TransferFn& transfer_x2y, const TransferFn& transfer_y2x,
                       const EvalDomain& domain_x, const EvalDomain& domain_y,
                       const std::vector<std::string>& directions,
                       std::size_t n_threads) {
  MetricsReport report;
  for (const auto& dir : directions) {
    const bool x2y = dir == "x2y";
    if (!x2y && dir != "y2x")
      throw ValidationError("evaluate: unknown direction '" + dir + "'");
    const EvalDomain& src = x2y ? domain_x : domain_y;
    const EvalDomain& dst = x2y ? domain_y : domain_x;
    if (src.motions.empty() || dst.motions.empty())
      throw ValidationError("evaluate: missing data for direction " + dir);
    auto generated =
        parallel_transfer(x2y ? transfer_x2y : transfer_y2x, src, n_threads);
    MetricsReport::Row row;
    row.direction = dir;
    row.mfd_value = mfd(dst.motions, generated);
    row.pfd_value = pfd(src.motions, generated);
    row.n_clips = src.motions.size();
    report.rows.push_back(std::move(row));
  }
  return report;
}

void MetricsReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << "# config_hash=" << config_hash << "\n";
  os << "direction,metric,value,n_clips\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.mfd_value);
    os << row.direction << ",MFD," << buf << "," << row.n_clips << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", row.pfd_value);
    os << row.direction << ",PFD," << buf << "," << row.n_clips << "\n";
  }
}

std::string config_hash_hex(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cycledance
