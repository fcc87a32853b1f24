#include <cmath>

#include "doctest.h"
#include "grad_cases.hpp"
#include "nlos/error.hpp"
#include "nlos/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nlos;
using testing::randn;
using testing::randu;

namespace {

double& px(Tensor& t, std::size_t y, std::size_t x) { return t[y * t.dim(1) + x]; }
double px(const Tensor& t, std::size_t y, std::size_t x) { return t[y * t.dim(1) + x]; }

double tv_oracle(const Tensor& u) {
  const auto& s = u.shape();
  double t = 0.0;
  for (std::size_t z = 0; z < s[0]; ++z)
    for (std::size_t y = 0; y < s[1]; ++y)
      for (std::size_t x = 0; x < s[2]; ++x) {
        if (z + 1 < s[0]) t += std::abs(u.at(z + 1, y, x) - u.at(z, y, x));
        if (y + 1 < s[1]) t += std::abs(u.at(z, y + 1, x) - u.at(z, y, x));
        if (x + 1 < s[2]) t += std::abs(u.at(z, y, x + 1) - u.at(z, y, x));
      }
  return t;
}

}  // namespace

TEST_CASE("projection of a single voxel") {
  Tensor u({8, 4, 9});
  u.at(5, 2, 7) = 3.0;
  Projection p = project(u);
  CHECK(px(p.albedo, 2, 7) == 3.0);
  CHECK(px(p.depth, 2, 7) == 5.0);
  CHECK(p.albedo.sum() == 3.0);
}

TEST_CASE("projection ties resolve to the nearest slice") {
  Tensor u({6, 3, 3}, 0.7);
  Projection p = project(u);
  for (double v : p.albedo.vec()) CHECK(v == 0.7);
  CHECK(p.depth.max_abs() == 0.0);
}

TEST_CASE("projection matches a brute-force scan and scales with u") {
  Tensor u = randn({7, 5, 6}, 3);
  Projection p = project(u);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 6; ++x) {
      std::size_t best = 0;
      for (std::size_t z = 1; z < 7; ++z)
        if (u.at(z, y, x) > u.at(best, y, x)) best = z;
      CHECK(px(p.depth, y, x) == double(best));
      CHECK(px(p.albedo, y, x) == u.at(best, y, x));
    }
  Tensor scaled = u;
  scaled *= 2.5;
  Projection q = project(scaled);
  CHECK(q.depth.vec() == p.depth.vec());
  CHECK(testing::max_abs_diff(q.albedo, 2.5 * p.albedo) < 1e-14);
}

TEST_CASE("enhancement head is the identity with zero weights") {
  ModelParams p;
  std::mt19937_64 rng(1);
  init_enhance(p, rng);
  Tensor a = randu({16, 16}, 4);
  Tensor out = enhance2d(a, p);
  CHECK(out.shape() == a.shape());
  for (const auto& n : p.names()) p.get(n).fill(0.0);
  CHECK(enhance2d(a, p).vec() == a.vec());
}

TEST_CASE("enhancement head gradients reach every parameter") {
  ModelParams p;
  std::mt19937_64 rng(2);
  init_enhance(p, rng);
  Tensor a = randu({8, 8}, 5), gt = randu({8, 8}, 6);
  ad::Tape tape;
  Bound b(tape, p);
  ad::Var loss = ad::sum(ad::square(ad::sub(enhance2d(b, tape.constant(a)), tape.constant(gt))));
  tape.backward(loss);
  for (const auto& [name, g] : tape.gradients()) CHECK_MESSAGE(g.max_abs() > 0.0, name);
  const double err = testing::gradcheck_params(
      [&](const Bound& bb) {
        ad::Var d = ad::sub(enhance2d(bb, bb.tape().constant(a)), bb.tape().constant(gt));
        return ad::sum(ad::square(d));
      },
      p, p.names());
  CHECK(err <= 1e-4);
}

TEST_CASE("total variation") {
  CHECK(tv3(Tensor({4, 4, 4}, 2.0)) == 0.0);
  Tensor two({2, 1, 1});
  two[1] = 3.0;
  CHECK(tv3(two) == 3.0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    Tensor u = randn({4, 4, 4}, 10 + s);
    CHECK(tv3(u) == doctest::Approx(tv_oracle(u)).epsilon(1e-14));
    CHECK(tv3(u) > 0.0);
  }
  ad::Tape tape;
  Tensor u = randn({3, 4, 5}, 7);
  CHECK(tv3(tape.constant(u)).value()[0] == doctest::Approx(tv_oracle(u)).epsilon(1e-14));
}

TEST_CASE("training loss") {
  Tensor I = randu({6, 6}, 1), gt = randu({6, 6}, 2), u = randn({4, 6, 6}, 3);
  CHECK(loss_total(I, I, Tensor({4, 6, 6}, 1.5), 0.3) == 0.0);
  double l1 = 0.0;
  for (std::size_t i = 0; i < I.size(); ++i) l1 += std::abs(I[i] - gt[i]);
  CHECK(loss_total(I, gt, u, 0.0) == doctest::Approx(l1).epsilon(1e-14));
  CHECK(loss_total(I, gt, u, 0.25) == doctest::Approx(l1 + 0.25 * tv_oracle(u)).epsilon(1e-14));
  CHECK_THROWS_AS(loss_total(I, Tensor({5, 5}), u, 0.1), ShapeError);

  ad::Tape tape;
  ad::Var v = loss_total(tape.constant(I), gt, tape.constant(u), 0.25);
  CHECK(v.value()[0] == doctest::Approx(l1 + 0.25 * tv_oracle(u)).epsilon(1e-14));

  const double err = testing::gradcheck(
      [&](ad::Tape&, const std::vector<ad::Var>& x) { return loss_total(x[0], gt, x[1], 0.25); },
      {I, u});
  CHECK(err <= 1e-4);
}

TEST_CASE("PSNR values") {
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr_from_mse(0.0) == kPsnrCap);
  Tensor a = randu({16, 16}, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  Tensor b = a;
  b *= 3.0;
  CHECK(psnr(a, b) == kPsnrCap);  // per-image max normalization
}

TEST_CASE("SSIM against a direct window oracle") {
  Tensor a = randu({16, 16}, 1);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint64_t s = 0; s < 4; ++s) {
    Tensor x = randu({16, 16}, 20 + s), y = randu({16, 16}, 40 + s);
    y = 0.5 * x + 0.5 * y;
    CHECK(ssim(x, y) == doctest::Approx(testing::ssim_oracle(x, y)).epsilon(1e-10));
    CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-14));
    CHECK(ssim(x, y) < 1.0);
  }
  CHECK_THROWS_AS(ssim(Tensor({8, 8}), Tensor({8, 8})), ShapeError);
}

TEST_CASE("metric set with masked depth errors") {
  Tensor gt({16, 16});
  Tensor dgt({16, 16}), d({16, 16});
  for (std::size_t y = 4; y < 8; ++y)
    for (std::size_t x = 4; x < 8; ++x) {
      px(gt, y, x) = 1.0;
      px(dgt, y, x) = 6.0;
      px(d, y, x) = (x == 4) ? 9.0 : 6.0;
    }
  px(d, 0, 0) = 15.0;  // background, masked out
  MetricSet m = metrics(gt, gt, d, dgt, 16);
  CHECK(m.psnr == kPsnrCap);
  CHECK(m.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.depth_mad == doctest::Approx(4 * (3.0 / 15.0) / 16.0).epsilon(1e-12));
  CHECK(m.depth_rmse == doctest::Approx(std::sqrt(4 * std::pow(3.0 / 15.0, 2) / 16.0)).epsilon(1e-12));
  MetricSet same = metrics(gt, gt, dgt, dgt, 16);
  CHECK(same.depth_mad == 0.0);
  CHECK(same.depth_rmse == 0.0);
}
