#include <doctest.h>

#include <cmath>

#include "cycledance/losses.hpp"
#include "test_util.hpp"

using namespace cycledance;
using cdtest::random_tensor;

TEST_CASE("adv_loss: d = 0.5 everywhere gives d_term = 2 ln 2 within 1e-12") {
  Tensor real = full({3, 4}, 0.5);
  Tensor fake = full({3, 4}, 0.5);
  AdvPair pair = adv_loss(real, fake);
  CHECK(std::abs(pair.d_term.item() - 2.0 * std::log(2.0)) < 1e-12);
  CHECK(std::abs(pair.g_term.item() - std::log(2.0)) < 1e-12);
}

TEST_CASE("adv_loss: perfect discriminator drives d_term to ~0") {
  Tensor real = full({2, 2}, 1.0);      // clamped to 1 - eps
  Tensor fake = full({2, 2}, kPatchEps);
  AdvPair pair = adv_loss(real, fake);
  CHECK(pair.d_term.item() < 1e-6);
  CHECK(pair.d_term.item() >= 0.0);
}

TEST_CASE("adv_loss: g_term decreases as d_fake increases elementwise") {
  Tensor real = full({2, 2}, 0.5);
  double prev = 1e300;
  for (double v : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    AdvPair pair = adv_loss(real, full({2, 2}, v));
    CHECK(pair.g_term.item() < prev);
    prev = pair.g_term.item();
  }
}

TEST_CASE("adv2_loss matches adv_loss on identical inputs") {
  Rng rng(1);
  Tensor real = random_tensor({3, 3}, rng, 0.1, 0.9, false);
  Tensor cycled = random_tensor({3, 3}, rng, 0.1, 0.9, false);
  AdvPair a = adv_loss(real, cycled);
  AdvPair b = adv2_loss(real, cycled);
  CHECK(a.d_term.item() == b.d_term.item());
  CHECK(a.g_term.item() == b.g_term.item());
}

TEST_CASE("cycle_loss: identity, constant offset, brute-force oracle") {
  Rng rng(2);
  Tensor x = random_tensor({4, 5}, rng, -1, 1, false);
  Tensor y = random_tensor({4, 5}, rng, -1, 1, false);
  CHECK(cycle_loss(x, x, y, y).item() == 0.0);

  Tensor x_off = add_scalar(x, 1.0);
  CHECK(cycle_loss(x, x_off, y, y).item() == doctest::Approx(1.0).epsilon(1e-12));

  Tensor xc = random_tensor({4, 5}, rng, -1, 1, false);
  Tensor yc = random_tensor({4, 5}, rng, -1, 1, false);
  double oracle = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) oracle += std::abs(x.data()[i] - xc.data()[i]);
  oracle /= x.size();
  double oracle2 = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) oracle2 += std::abs(y.data()[i] - yc.data()[i]);
  oracle2 /= y.size();
  CHECK(cycle_loss(x, xc, y, yc).item() == doctest::Approx(oracle + oracle2).epsilon(1e-12));

  CHECK_THROWS_AS(cycle_loss(x, random_tensor({5, 4}, rng, -1, 1, false), y, y),
                  ValidationError);
}

TEST_CASE("cycle and identity losses are symmetric under swapping X and Y terms") {
  Rng rng(3);
  Tensor x = random_tensor({3, 4}, rng, -1, 1, false);
  Tensor xc = random_tensor({3, 4}, rng, -1, 1, false);
  Tensor y = random_tensor({3, 4}, rng, -1, 1, false);
  Tensor yc = random_tensor({3, 4}, rng, -1, 1, false);
  CHECK(cycle_loss(x, xc, y, yc).item() == doctest::Approx(cycle_loss(y, yc, x, xc).item()));
  CHECK(identity_loss(x, xc, y, yc).item() ==
        doctest::Approx(identity_loss(y, yc, x, xc).item()));
}

TEST_CASE("identity_loss: identity generators and offsets") {
  Rng rng(4);
  Tensor x = random_tensor({2, 6}, rng, -1, 1, false);
  Tensor y = random_tensor({2, 6}, rng, -1, 1, false);
  CHECK(identity_loss(x, x, y, y).item() == 0.0);
  CHECK(identity_loss(x, add_scalar(x, -0.25), y, y).item() ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("full_objective: weighting, annealing, linearity") {
  LossWeights w;
  w.lambda_cyc = 10.0;
  w.lambda_id = 5.0;
  w.id_anneal_step = 100;

  ObjectiveParts parts;
  parts.g_adv_xy = scalar(0.0);
  parts.g_adv_yx = scalar(0.0);
  parts.cyc = scalar(0.0);
  parts.id = scalar(0.0);
  parts.g_adv2_xyx = scalar(0.0);
  parts.g_adv2_yxy = scalar(0.0);
  parts.d_adv_x = scalar(0.0);
  parts.d_adv_y = scalar(0.0);
  parts.d_adv2_x = scalar(0.0);
  parts.d_adv2_y = scalar(0.0);

  SUBCASE("all zero parts give zero objectives") {
    Objective obj = full_objective(parts, w, 0);
    CHECK(obj.generator.item() == 0.0);
    CHECK(obj.discriminator.item() == 0.0);
  }

  SUBCASE("lambda_cyc weighting: 10 * 0.5 = 5") {
    parts.cyc = scalar(0.5);
    Objective obj = full_objective(parts, w, 0);
    CHECK(obj.generator.item() == doctest::Approx(5.0).epsilon(1e-12));

    LossWeights w2 = w;
    w2.lambda_cyc = 20.0;
    Objective obj2 = full_objective(parts, w2, 0);
    CHECK(obj2.generator.item() == doctest::Approx(10.0).epsilon(1e-12));
  }

  SUBCASE("identity weight is forced to zero from the anneal step") {
    parts.id = scalar(1.0);
    CHECK(full_objective(parts, w, 99).generator.item() ==
          doctest::Approx(5.0).epsilon(1e-12));
    CHECK(full_objective(parts, w, 100).generator.item() == 0.0);
    CHECK(full_objective(parts, w, 500).generator.item() == 0.0);
  }

  SUBCASE("discriminator objective sums the four d terms") {
    parts.d_adv_x = scalar(0.5);
    parts.d_adv_y = scalar(0.25);
    parts.d_adv2_x = scalar(1.0);
    parts.d_adv2_y = scalar(0.125);
    Objective obj = full_objective(parts, w, 0);
    CHECK(obj.discriminator.item() == doctest::Approx(1.875).epsilon(1e-12));
  }

  SUBCASE("negative weights rejected") {
    LossWeights bad;
    bad.lambda_cyc = -1.0;
    CHECK_THROWS_AS(full_objective(parts, bad, 0), ValidationError);
  }
}

TEST_CASE("patch values at 0 or 1 are clamped, keeping losses finite") {
  Tensor real = tensor({2}, {0.0, 1.0});
  Tensor fake = tensor({2}, {1.0, 0.0});
  AdvPair pair = adv_loss(real, fake);
  CHECK(std::isfinite(pair.d_term.item()));
  CHECK(std::isfinite(pair.g_term.item()));
  // d_term bounded by the clamp floor
  CHECK(pair.d_term.item() <= -2.0 * std::log(kPatchEps) + 1e-9);
}

TEST_CASE("loss gradients through a 2-frame toy model match finite differences") {
  // Toy 'generator': y = W x + b applied per frame; toy 'discriminator':
  // patches = sigmoid(x V). Exercises every loss through model parameters.
  Rng rng(5);
  const std::size_t dim = 3;
  Tensor x = random_tensor({2, dim}, rng, -1, 1, false);
  Tensor y = random_tensor({2, dim}, rng, -1, 1, false);

  Tensor w_xy = random_tensor({dim, dim}, rng);
  Tensor b_xy = random_tensor({dim}, rng);
  Tensor w_yx = random_tensor({dim, dim}, rng);
  Tensor b_yx = random_tensor({dim}, rng);
  Tensor v_disc = random_tensor({dim, 2}, rng);

  auto gen_xy = [&](const Tensor& in) { return add_rowvec(matmul(in, w_xy), b_xy); };
  auto gen_yx = [&](const Tensor& in) { return add_rowvec(matmul(in, w_yx), b_yx); };
  auto disc = [&](const Tensor& in) { return sigmoid(matmul(in, v_disc)); };

  LossWeights weights;
  weights.lambda_cyc = 10.0;
  weights.lambda_id = 5.0;
  weights.id_anneal_step = 1000;

  auto objective = [&]() {
    Tensor fake_y = gen_xy(x);
    Tensor fake_x = gen_yx(y);
    Tensor cycled_x = gen_yx(fake_y);
    Tensor cycled_y = gen_xy(fake_x);
    ObjectiveParts parts;
    parts.g_adv_xy = adv_loss(disc(y), disc(fake_y)).g_term;
    parts.g_adv_yx = adv_loss(disc(x), disc(fake_x)).g_term;
    parts.cyc = cycle_loss(x, cycled_x, y, cycled_y);
    parts.id = identity_loss(x, gen_yx(x), y, gen_xy(y));
    parts.g_adv2_xyx = adv2_loss(disc(x), disc(cycled_x)).g_term;
    parts.g_adv2_yxy = adv2_loss(disc(y), disc(cycled_y)).g_term;
    parts.d_adv_x = scalar(0.0);
    parts.d_adv_y = scalar(0.0);
    parts.d_adv2_x = scalar(0.0);
    parts.d_adv2_y = scalar(0.0);
    return full_objective(parts, weights, 0).generator;
  };

  Tensor loss = objective();
  for (Tensor p : {w_xy, b_xy, w_yx, b_yx}) p.zero_grad();
  backward(loss);

  const double eps = 1e-6;
  for (Tensor p : {w_xy, b_xy, w_yx, b_yx}) {
    std::vector<double> base = p.data();
    const auto analytic = p.grad();
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<double> mod = base;
      mod[i] = base[i] + eps;
      p.set_data(mod);
      double up;
      {
        NoGradGuard ng;
        up = objective().item();
      }
      mod[i] = base[i] - eps;
      p.set_data(mod);
      double down;
      {
        NoGradGuard ng;
        down = objective().item();
      }
      p.set_data(base);
      double numeric = (up - down) / (2.0 * eps);
      double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      REQUIRE(rel < 1e-5);
    }
  }
}
