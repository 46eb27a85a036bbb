#include "cycledance/losses.hpp"

namespace cycledance {

void LossWeights::validate() const {
  if (lambda_cyc < 0.0 || lambda_id < 0.0)
    throw ValidationError("loss weights must be non-negative");
}

double LossWeights::effective_lambda_id(std::size_t step) const {
  if (id_anneal_step >= 0 && step >= static_cast<std::size_t>(id_anneal_step))
    return 0.0;
  return lambda_id;
}

namespace {

Tensor clamped(const Tensor& patches) { return clamp(patches, kPatchEps, 1.0 - kPatchEps); }

Tensor one_minus(const Tensor& t) { return add_scalar(neg(t), 1.0); }

}  // namespace

AdvPair adv_loss(const Tensor& d_out_real, const Tensor& d_out_fake) {
  Tensor real = clamped(d_out_real);
  Tensor fake = clamped(d_out_fake);
  AdvPair out;
  out.d_term = neg(add(mean(log(real)), mean(log(one_minus(fake)))));
  out.g_term = neg(mean(log(fake)));
  return out;
}

AdvPair adv2_loss(const Tensor& d2_out_real, const Tensor& d2_out_cycled) {
  return adv_loss(d2_out_real, d2_out_cycled);
}

Tensor cycle_loss(const Tensor& x, const Tensor& x_cycled, const Tensor& y,
                  const Tensor& y_cycled) {
  return add(l1_distance(x, x_cycled), l1_distance(y, y_cycled));
}

Tensor identity_loss(const Tensor& x, const Tensor& g_yx_of_x, const Tensor& y,
                     const Tensor& g_xy_of_y) {
  return add(l1_distance(x, g_yx_of_x), l1_distance(y, g_xy_of_y));
}

Objective full_objective(const ObjectiveParts& parts, const LossWeights& weights,
                         std::size_t step) {
  weights.validate();
  Objective out;
  Tensor g = add(parts.g_adv_xy, parts.g_adv_yx);
  g = add(g, mul_scalar(parts.cyc, weights.lambda_cyc));
  double lid = weights.effective_lambda_id(step);
  if (lid > 0.0 && parts.id.defined()) g = add(g, mul_scalar(parts.id, lid));
  g = add(g, add(parts.g_adv2_xyx, parts.g_adv2_yxy));
  out.generator = g;
  out.discriminator =
      add(add(parts.d_adv_x, parts.d_adv_y), add(parts.d_adv2_x, parts.d_adv2_y));
  return out;
}

}  // namespace cycledance
