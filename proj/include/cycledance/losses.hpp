#pragma once

#include "cycledance/tensor.hpp"

namespace cycledance {

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  /// Step after which lambda_id becomes 0. Negative means "resolve to 20% of
  /// total training steps" (done by the trainer).
  long long id_anneal_step = -1;

  void validate() const;
  double effective_lambda_id(std::size_t step) const;
};

inline constexpr double kPatchEps = 1e-7;

struct AdvPair {
  Tensor d_term;  // what the discriminator minimizes
  Tensor g_term;  // non-saturating generator term
};

/// GAN loss on patch grids. Patch values are clamped to [eps, 1-eps]:
/// d_term = -mean(log d_real) - mean(log(1 - d_fake)), g_term = -mean(log d_fake).
AdvPair adv_loss(const Tensor& d_out_real, const Tensor& d_out_fake);

/// Second adversarial loss on cycled reconstructions; same functional form.
AdvPair adv2_loss(const Tensor& d2_out_real, const Tensor& d2_out_cycled);

/// mean-L1(x, x_cycled) + mean-L1(y, y_cycled).
Tensor cycle_loss(const Tensor& x, const Tensor& x_cycled, const Tensor& y,
                  const Tensor& y_cycled);

/// mean-L1(x, G_yx(x)) + mean-L1(y, G_xy(y)).
Tensor identity_loss(const Tensor& x, const Tensor& g_yx_of_x, const Tensor& y,
                     const Tensor& g_xy_of_y);

struct ObjectiveParts {
  Tensor g_adv_xy, g_adv_yx;        // generator adversarial terms
  Tensor cyc;
  Tensor id;                         // undefined tensor when annealed away
  Tensor g_adv2_xyx, g_adv2_yxy;     // generator two-step terms
  Tensor d_adv_x, d_adv_y;           // discriminator terms
  Tensor d_adv2_x, d_adv2_y;
};

struct Objective {
  Tensor generator;
  Tensor discriminator;
};

/// Eq-5-style weighted sum. The two-step adversarial terms enter with
/// weight 1; lambda_id is forced to 0 from id_anneal_step on.
Objective full_objective(const ObjectiveParts& parts, const LossWeights& weights,
                         std::size_t step);

}  // namespace cycledance
