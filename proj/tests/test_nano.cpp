#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "grad_cases.hpp"
#include "nlos/classic.hpp"
#include "nlos/error.hpp"
#include "nlos/fft.hpp"
#include "nlos/metrics.hpp"
#include "nlos/nano.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nlos;
using testing::crandn;
using testing::randn;

namespace {

SceneGrid small_grid() {
  SceneGrid g;
  g.T = 32;
  g.Th = g.Tw = 8;
  g.D = g.H = g.W = 8;
  g.ds = 0.01;
  g.dz = 0.01;
  g.dt = 66e-12;
  return g;
}

NanoConfig small_config(std::size_t J, std::vector<std::size_t> n) {
  NanoConfig cfg = testing::tiny_nano_config();
  cfg.J = J;
  cfg.K = 0;
  for (auto v : n) cfg.K += v;
  cfg.n = std::move(n);
  cfg.stfe.C = 1;
  cfg.clamp = true;
  return cfg;
}

ModelParams nano_params(const NanoConfig& cfg) {
  ModelParams p;
  std::mt19937_64 rng(cfg.seed);
  init_nano(p, rng, cfg);
  return p;
}

void zero_prefix(ModelParams& p, const std::string& prefix, const std::string& suffix = "") {
  for (const auto& n : p.names())
    if (n.rfind(prefix, 0) == 0 && n.size() >= suffix.size() &&
        n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0)
      p.get(n).fill(0.0);
}

ComplexVolume channel(const nn::CVar& u, std::size_t c) {
  const Shape& s = u.re.shape();
  const std::size_t m = s[1] * s[2] * s[3];
  ComplexVolume out({s[1], s[2], s[3]});
  for (std::size_t i = 0; i < m; ++i) {
    out.re[i] = u.re.value()[c * m + i];
    out.im[i] = u.im.value()[c * m + i];
  }
  return out;
}

// iterate grid (8, 4, 4) with features (4C, 8, 2, 2)
struct Fixture {
  ad::Tape tape;
  NanoConfig cfg;
  ModelParams p;
  ScaleState s;
  Fixture(NanoConfig c, std::uint64_t seed = 1, double eta = 1.5) : cfg(std::move(c)) {
    cfg.seed = seed;
    p = nano_params(cfg);
    Bound b(tape, p);
    s = lift(b, tape.constant(randn({4 * cfg.stfe.C, 8, 2, 2}, seed + 10)), eta,
             crandn({8, 4, 4}, seed + 20), cfg);
  }
};

}  // namespace

TEST_CASE("iteration counts must add up to K") {
  NanoConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.J == 5);
  CHECK(cfg.K == 10);
  cfg.n = {2, 2, 2, 2, 3};
  try {
    cfg.validate();
    FAIL("expected rejection");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("n_1 + ... + n_J = K") != std::string::npos);
    CHECK(std::string(e.what()).find("sum 11") != std::string::npos);
  }
  NanoConfig z;
  z.B_bw = 0;
  CHECK_THROWS_AS(z.validate(), ParameterError);
  NanoConfig zero_n;
  zero_n.n = {2, 2, 2, 4, 0};
  CHECK_THROWS_AS(zero_n.validate(), ParameterError);
}

TEST_CASE("lift starts from the Wiener solution on every channel") {
  NanoConfig cfg = small_config(1, {1});
  ModelParams p = nano_params(cfg);
  ad::Tape tape;
  Bound b(tape, p);
  ComplexVolume tau = crandn({8, 4, 4}, 3), h({8, 4, 4});
  h.re.fill(1.0);
  ScaleState s = lift(b, tape.constant(randn({4, 8, 2, 2}, 4)), 2.0, tau, h, 0.0, cfg);
  CHECK(s.u.re.shape() == Shape{cfg.Cu, 8, 4, 4});
  CHECK(s.feat.re.shape() == Shape{cfg.Cf, 8, 4, 4});
  for (std::size_t c = 0; c < cfg.Cu; ++c) CHECK((channel(s.u, c) - tau).norm() == 0.0);
  CHECK_THROWS_AS(lift(b, tape.constant(randn({4, 8, 3, 2}, 4)), 2.0, tau, cfg), ShapeError);
}

TEST_CASE("the noise channel is the constant estimate") {
  NanoConfig cfg = small_config(1, {1});
  const std::string pre = layer_prefix(1, 0);
  for (double eta : {0.0, 0.7, 3.0}) {
    Fixture f(cfg, 2, eta);
    zero_prefix(f.p, pre + ".cco");
    // hidden 0 reads the noise channel (input Cf) at the kernel centre
    f.p.get(pre + ".cco1.re.w")[cfg.Cf * 27 + 13] = 1.0;
    f.p.get(pre + ".cco2.re.w")[13] = 1.0;
    Bound b(f.tape, f.p);
    Tensor G = cco_gram(b, f.s, 0, cfg).value();
    const double q = eta * eta, want = q * cfg.h_max2 / (cfg.h_max2 + q);
    const Shape& s = G.shape();
    // interior voxels see the full stencil; zero padding touches only the border
    for (std::size_t t = 1; t + 1 < s[1]; ++t)
      for (std::size_t y = 1; y + 1 < s[2]; ++y)
        for (std::size_t x = 1; x + 1 < s[3]; ++x)
          CHECK(G.at(0, t, y, x) == doctest::Approx(want).epsilon(1e-12).scale(1e-12));
    for (std::size_t i = G.size() / 2; i < G.size(); ++i) CHECK(G[i] == 0.0);
  }
}

TEST_CASE("zero CCO weights give the zero operator and it is linear in u") {
  NanoConfig cfg = small_config(1, {1});
  Fixture f(cfg, 3);
  Bound b(f.tape, f.p);
  nn::CVar u2 = nn::cscale(f.s.u, -2.5);
  nn::CVar a = cco_apply(b, f.s, f.s.u, 0, cfg), c = cco_apply(b, f.s, u2, 0, cfg);
  CHECK(testing::max_abs_diff(c.re.value(), -2.5 * a.re.value()) <= 1e-10 * a.re.value().max_abs());
  CHECK(testing::max_abs_diff(c.im.value(), -2.5 * a.im.value()) <= 1e-10 * a.im.value().max_abs());
  CHECK(a.re.value().max_abs() > 0.0);

  zero_prefix(f.p, layer_prefix(1, 0) + ".cco");
  Bound z(f.tape, f.p);
  nn::CVar o = cco_apply(z, f.s, f.s.u, 0, cfg);
  CHECK(o.re.value().max_abs() == 0.0);
  CHECK(o.im.value().max_abs() == 0.0);
}

TEST_CASE("CCO block gradients match finite differences") {
  CHECK(testing::cco_block_gradcheck(5) <= 1e-4);
}

TEST_CASE("a zero step leaves the iterate unchanged") {
  NanoConfig cfg = small_config(1, {3});
  cfg.clamp = false;
  Fixture f(cfg, 4);
  zero_prefix(f.p, "nano.j1", ".step");
  Bound b(f.tape, f.p);
  const Tensor re = f.s.u.re.value(), im = f.s.u.im.value();
  iterate_scale(b, f.s, cfg);
  CHECK(f.s.u.re.value().vec() == re.vec());
  CHECK(f.s.u.im.value().vec() == im.vec());
  CHECK(f.s.next_layer == 3);
}

TEST_CASE("with the classical operator the layers reproduce the fixed-point solver") {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    testing::ClassicalLimit r = testing::classical_limit(seed);
    CHECK(r.iterate_err <= 1e-10);
    CHECK(r.residual_err <= 1e-10);
  }
}

TEST_CASE("clamped layers are contractions with shrinking residuals") {
  NanoConfig cfg = small_config(1, {6});
  cfg.step_init = 1.0;  // large enough to trigger clamping
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Fixture f(cfg, 100 + trial, 0.5 * double(trial % 10));
    // tie all layers to layer 0 so they share one fixed point
    const std::string first = layer_prefix(1, 0);
    for (const auto& n : f.p.names())
      if (n.rfind(first + ".", 0) == 0)
        for (std::size_t k = 1; k < 6; ++k)
          f.p.assign(layer_prefix(1, k) + n.substr(first.size()), f.p.get(n));
    Bound b(f.tape, f.p);
    NanoDiagnostics d;
    iterate_scale(b, f.s, cfg, &d);
    REQUIRE(d.layers.size() == 6);
    for (std::size_t k = 0; k < 6; ++k) {
      CHECK(d.layers[k].norm <= cfg.B_target);
      if (k > 0) CHECK(d.layers[k].residual < d.layers[k - 1].residual);
    }
  }
}

TEST_CASE("restriction and prolongation shapes") {
  NanoConfig cfg = small_config(2, {1, 1});
  cfg.seed = 6;
  ModelParams p = nano_params(cfg);
  ad::Tape tape;
  Bound b(tape, p);
  ScaleState s = lift(b, tape.constant(randn({4, 7, 3, 3}, 1)), 1.0, crandn({7, 6, 6}, 2), cfg);
  iterate_scale(b, s, cfg);
  restrict_scale(b, s, cfg);
  CHECK(s.j == 2);
  CHECK(s.u.re.shape() == Shape{cfg.Cu, 4, 3, 3});
  CHECK(s.feat.re.shape() == Shape{cfg.Cf, 4, 3, 3});
  CHECK(s.ug.re.shape() == Shape{1, 4, 3, 3});
  CHECK_THROWS_AS(restrict_scale(b, s, cfg), ParameterError);
  nn::CVar up = prolong(b, 1, s.u, s.skips[0], s.pre_shapes[0]);
  CHECK(up.re.shape() == Shape{cfg.Cu, 7, 6, 6});

  zero_prefix(p, "nano.p1");
  Bound z(tape, p);
  nn::CVar skip_only = prolong(z, 1, s.u, s.skips[0], s.pre_shapes[0]);
  CHECK(skip_only.re.value().vec() == s.skips[0].re.value().vec());
  CHECK(skip_only.im.value().vec() == s.skips[0].im.value().vec());
}

TEST_CASE("frequency encoding") {
  NanoConfig cfg = small_config(1, {1});
  cfg.B_bw = 1;
  ModelParams p = nano_params(cfg);
  ad::Tape tape;
  nn::CVar u{tape.constant(randn({2, 4, 3, 3}, 1)), tape.constant(randn({2, 4, 3, 3}, 2))};
  Tensor eye({1, 2, 2});
  eye.at(0, 0, 0) = eye.at(0, 1, 1) = 1.0;
  p.assign("nano.sfe.M.re", eye);
  p.assign("nano.sfe.M.im", Tensor({1, 2, 2}));
  Bound b(tape, p);
  nn::CVar out = sfe_encode(b, u, cfg);
  nn::CVar mlp = nn::cconv(b, "nano.sfe.mlp2", nn::cprelu(nn::cconv(b, "nano.sfe.mlp1", u), cfg.slope));
  CHECK(out.re.shape() == u.re.shape());
  CHECK(out.re.value().vec() == mlp.re.value().vec());
  CHECK(out.im.value().vec() == mlp.im.value().vec());
}

TEST_CASE("encoding variance grows with the bandwidth") {
  ad::Tape tape;
  nn::CVar u{tape.constant(randn({2, 4, 3, 3}, 3)), tape.constant(randn({2, 4, 3, 3}, 4))};
  std::vector<double> var;
  for (std::size_t B : {1u, 2u, 4u, 8u}) {
    double v = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      NanoConfig cfg = small_config(1, {1});
      cfg.B_bw = B;
      cfg.seed = 1000 + seed;
      ModelParams p = nano_params(cfg);
      Bound b(tape, p);
      nn::CVar o = sfe_encode(b, u, cfg);
      const double n = o.re.value().norm(), m = o.im.value().norm();
      v += (n * n + m * m) / double(o.re.value().size());
    }
    var.push_back(v / 100.0);
  }
  for (std::size_t i = 1; i < var.size(); ++i) CHECK(var[i] > var[i - 1]);
}

TEST_CASE("end to end on a small grid") {
  const SceneGrid g = small_grid();
  LightTransport lt(g);
  NanoConfig cfg = small_config(2, {1, 2});
  ModelParams p;
  init_model(p, cfg);
  p.set_trainable("nle.", false);
  Tensor scene = randn(g.volume_shape(), 7);
  for (auto& v : scene.vec()) v = std::abs(v);
  Tensor tau = add_gaussian(lt.apply_A(scene), 0.5, 8);

  SUBCASE("trace follows the unrolled algorithm") {
    Reconstruction r = reconstruct(tau, p, lt, cfg);
    const std::vector<std::string> want{"nle",       "stfe",      "lift",         "layer 1.0",
                                        "restrict 1->2", "layer 2.1", "layer 2.2", "sfe",
                                        "prolong 2->1",  "project",   "enhance"};
    CHECK(r.diag.trace == want);
    CHECK(r.u.shape() == g.volume_shape());
    CHECK(r.albedo.shape() == Shape{g.H, g.W});
    CHECK(r.diag.layers.size() == 3);
    CHECK(r.diag.eta >= 0.0);
  }
  SUBCASE("single scale skips restriction") {
    NanoConfig one = small_config(1, {2});
    ModelParams q;
    init_model(q, one);
    Reconstruction r = reconstruct(tau, q, lt, one);
    for (const auto& s : r.diag.trace) {
      CHECK(s.find("restrict") == std::string::npos);
      CHECK(s.find("prolong") == std::string::npos);
    }
  }
  SUBCASE("bitwise deterministic") {
    Reconstruction a = reconstruct(tau, p, lt, cfg), b = reconstruct(tau, p, lt, cfg);
    CHECK(a.u.vec() == b.u.vec());
    CHECK(a.albedo.vec() == b.albedo.vec());
  }
  SUBCASE("zero measurement with zero biases reconstructs zero") {
    for (const auto& n : p.names())
      if (n.size() > 2 && n.compare(n.size() - 2, 2, ".b") == 0) p.get(n).fill(0.0);
    Reconstruction r = reconstruct(Tensor(g.transient_shape()), p, lt, cfg);
    CHECK(r.u.max_abs() == 0.0);
    CHECK(r.albedo.max_abs() == 0.0);
  }
  SUBCASE("every trainable parameter receives gradient") {
    ad::Tape tape;
    Bound b(tape, p);
    NanoOutput o = nano_forward(b, tau, lt, cfg);
    Tensor gt = project(scene).albedo;
    tape.backward(loss_total(o.albedo, gt, o.u, 1e-4));
    auto grads = tape.gradients();
    std::size_t trainable = 0;
    for (const auto& n : p.names()) trainable += p.meta(n).trainable;
    CHECK(grads.size() == trainable);
    CHECK(grads.count("nle.enc1.w") == 0);
    CHECK(grads.count("nano.sfe.M.re") == 0);
    for (const auto& [name, gr] : grads) CHECK_MESSAGE(gr.max_abs() > 0.0, name);
  }
  SUBCASE("grid mismatch is reported") {
    CHECK_THROWS_AS(reconstruct(Tensor({16, 8, 8}), p, lt, cfg), ShapeError);
    Tensor bad = tau;
    bad[3] = INFINITY;
    CHECK_THROWS_AS(reconstruct(bad, p, lt, cfg), NumericalError);
  }
}
