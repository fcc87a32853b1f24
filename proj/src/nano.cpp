#include "nlos/nano.hpp"

#include <cmath>
#include <numeric>

#include "nlos/classic.hpp"
#include "nlos/error.hpp"
#include "nlos/fft.hpp"
#include "nlos/metrics.hpp"
#include "nlos/spectral.hpp"

namespace nlos {
namespace {

Shape spatial(const nn::CVar& v) {
  const Shape& s = v.re.shape();
  return {s[1], s[2], s[3]};
}

nn::CVar constant_complex(ad::Tape& t, const ComplexVolume& c) {
  const Shape& s = c.shape();
  Shape s4 = s.size() == 3 ? Shape{1, s[0], s[1], s[2]} : s;
  return {t.constant(c.re.reshaped(s4)), t.constant(c.im.reshaped(s4))};
}

nn::CVar repeat(nn::CVar v, std::size_t n) {
  if (n == 1) return v;
  return {ad::repeat_channels(v.re, n), ad::repeat_channels(v.im, n)};
}

nn::CVar eta_channel(ad::Tape& t, const Shape& sp, double eta) {
  Shape s{1, sp[0], sp[1], sp[2]};
  return {t.constant(Tensor(s, eta)), t.constant(Tensor(s))};
}

nn::CVar mul_scalar(nn::CVar v, ad::Var s) {
  return {ad::mul_scalar(v.re, s), ad::mul_scalar(v.im, s)};
}

void check_finite(const nn::CVar& v, const std::string& where) {
  if (!v.re.value().all_finite() || !v.im.value().all_finite())
    throw NumericalError("non-finite values in " + where);
}

double diff_norm(const nn::CVar& a, const nn::CVar& b) {
  const double r = (a.re.value() - b.re.value()).norm();
  const double i = (a.im.value() - b.im.value()).norm();
  return std::sqrt(r * r + i * i);
}

void note(NanoDiagnostics* d, std::string s) {
  if (d) d->trace.push_back(std::move(s));
}

}  // namespace

void NanoConfig::validate() const {
  if (J < 1) throw ParameterError("at least one scale is required");
  if (n.size() != J)
    throw ParameterError("per-scale iteration list has " + std::to_string(n.size()) +
                         " entries for J = " + std::to_string(J));
  for (auto v : n)
    if (v < 1) throw ParameterError("every scale needs at least one iteration");
  const std::size_t total = std::accumulate(n.begin(), n.end(), std::size_t{0});
  if (total != K)
    throw ParameterError("per-scale iterations must satisfy n_1 + ... + n_J = K; got sum " +
                         std::to_string(total) + " with K = " + std::to_string(K));
  if (B_bw < 1) throw ParameterError("frequency-encoding bandwidth must be at least 1");
  if (Cu < 1 || Cf < 1 || Ch < 1) throw ParameterError("channel counts must be positive");
  if (!(alpha_min > 0.0) || !(h_max2 > 0.0)) throw ParameterError("alpha_min and h_max2 must be positive");
  if (!(B_target > 0.0 && B_target < 1.0)) throw ParameterError("contraction target must lie in (0, 1)");
  if (!(slope > 0.0 && slope <= 1.0)) throw ParameterError("activation slope must lie in (0, 1]");
}

std::string layer_prefix(std::size_t j, std::size_t k) {
  return "nano.j" + std::to_string(j) + ".k" + std::to_string(k);
}

void init_nano(ModelParams& p, std::mt19937_64& rng, const NanoConfig& cfg) {
  cfg.validate();
  const std::size_t fch = 4 * cfg.stfe.C;
  nn::add_cconv(p, rng, "nano.lift", {cfg.Cf, fch}, {"nano"});
  std::size_t k = 0;
  // softplus(a) = 1/2 so that S starts near alpha_min + 1/2 + G
  const double a0 = std::log(std::exp(0.5) - 1.0);
  for (std::size_t j = 1; j <= cfg.J; ++j) {
    for (std::size_t i = 0; i < cfg.n[j - 1]; ++i, ++k) {
      const std::string pre = layer_prefix(j, k);
      ParamMeta m{"nano", static_cast<int>(j), static_cast<int>(k)};
      nn::add_cconv(p, rng, pre + ".cco1", {cfg.Ch, cfg.Cf + 1}, m);
      nn::add_cconv(p, rng, pre + ".cco2", {cfg.Cu, cfg.Ch}, m);
      p.add(pre + ".alpha", Tensor({1}, a0), m);
      p.add(pre + ".step", Tensor({1}, cfg.step_init), m);
    }
    if (j < cfg.J) {
      ParamMeta m{"nano", static_cast<int>(j)};
      const std::string r = "nano.r" + std::to_string(j);
      nn::add_cconv(p, rng, r + ".u", {cfg.Cu, cfg.Cu, {3, 3, 3}, false}, m);
      nn::add_cconv(p, rng, r + ".f", {cfg.Cf, cfg.Cf, {3, 3, 3}, false}, m);
      nn::add_cconv(p, rng, r + ".g", {1, 1, {3, 3, 3}, false}, m);
      nn::add_cconv(p, rng, "nano.p" + std::to_string(j),
                    {cfg.Cu, cfg.Cu, {3, 3, 3}, false, true}, m);
    }
  }
  ParamMeta fixed{"nano", static_cast<int>(cfg.J)};
  fixed.trainable = cfg.sfe_trainable;
  std::normal_distribution<double> nd;
  Tensor mr({cfg.B_bw, cfg.Cu, cfg.Cu}), mi({cfg.B_bw, cfg.Cu, cfg.Cu});
  for (std::size_t i = 0; i < mr.size(); ++i) {
    mr[i] = nd(rng) * std::sqrt(0.5);
    mi[i] = nd(rng) * std::sqrt(0.5);
  }
  fixed.role = "re";
  p.add("nano.sfe.M.re", mr, fixed);
  fixed.role = "im";
  p.add("nano.sfe.M.im", mi, fixed);
  ParamMeta ms{"nano", static_cast<int>(cfg.J)};
  nn::add_cconv(p, rng, "nano.sfe.mlp1", {cfg.Cu, cfg.Cu, {1, 1, 1}}, ms);
  nn::add_cconv(p, rng, "nano.sfe.mlp2", {cfg.Cu, cfg.Cu, {1, 1, 1}}, ms);
  nn::add_cconv(p, rng, "nano.proj", {1, cfg.Cu, {1, 1, 1}}, {"nano"});
  if (cfg.proj_average_init) {
    p.get("nano.proj.re.w").fill(1.0 / static_cast<double>(cfg.Cu));
    p.get("nano.proj.im.w").fill(0.0);
    p.get("nano.proj.re.b").fill(0.0);
    p.get("nano.proj.im.b").fill(0.0);
  }
}

void init_model(ModelParams& p, const NanoConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  init_nle(p, rng, cfg.nle);
  init_stfe(p, rng, cfg.stfe);
  init_nano(p, rng, cfg);
  init_enhance(p, rng);
}

ScaleState lift(const Bound& b, ad::Var f_st, double eta, const ComplexVolume& ug,
                const NanoConfig& cfg, NanoDiagnostics* diag) {
  ad::Tape& t = b.tape();
  const Shape& fs = f_st.shape();
  const Shape& gs = ug.shape();
  if (fs.size() != 4 || gs.size() != 3 || fs[1] != gs[0] || 2 * fs[2] != gs[1] ||
      2 * fs[3] != gs[2])
    throw ShapeError("lift: features " + shape_str(fs) + " do not match iterate grid " +
                     shape_str(gs));
  ad::Var up = ad::upsample_xy2(f_st);
  nn::CVar spec = nn::cfft({up, t.constant(Tensor(up.shape()))});
  spec = nn::cscale(spec, 1.0 / std::sqrt(static_cast<double>(ug.size())));
  ScaleState s;
  s.j = 1;
  s.eta = eta;
  s.feat = nn::cconv(b, "nano.lift", spec);
  s.ug = constant_complex(t, ug);
  s.u = repeat(s.ug, cfg.Cu);
  note(diag, "lift");
  return s;
}

ScaleState lift(const Bound& b, ad::Var f_st, double eta, const ComplexVolume& tau_f,
                const ComplexVolume& h, double alpha, const NanoConfig& cfg) {
  return lift(b, f_st, eta, wiener(tau_f, h, alpha), cfg);
}

ad::Var cco_gram(const Bound& b, const ScaleState& s, std::size_t k, const NanoConfig& cfg) {
  const std::string pre = layer_prefix(s.j, k);
  nn::CVar in = nn::cconcat({s.feat, eta_channel(b.tape(), spatial(s.feat), s.eta)});
  nn::CVar h = nn::cprelu(nn::cconv(b, pre + ".cco1", in), cfg.slope);
  nn::CVar g = nn::cconv(b, pre + ".cco2", h);
  return ad::saturate(nn::cabs2(g), cfg.h_max2);
}

nn::CVar cco_apply(const Bound& b, const ScaleState& s, nn::CVar u, std::size_t k,
                   const NanoConfig& cfg) {
  return nn::cmul_real(u, cco_gram(b, s, k, cfg));
}

void iterate_scale(const Bound& b, ScaleState& s, const NanoConfig& cfg, NanoDiagnostics* diag,
                   const LayerOverride* ov) {
  ad::Tape& t = b.tape();
  if (s.j < 1 || s.j > cfg.n.size()) throw ParameterError("scale index out of range");
  for (std::size_t i = 0; i < cfg.n[s.j - 1]; ++i) {
    const std::size_t k = s.next_layer++;
    const std::string pre = layer_prefix(s.j, k);
    LayerReport rep{s.j, k};

    nn::CVar su;
    Tensor s_field;
    if (ov && ov->S) {
      if (ov->S->shape() != s.u.re.shape()) throw ShapeError("S override must match the iterate");
      s_field = *ov->S;
      su = nn::cmul_real(s.u, t.constant(s_field));
    } else {
      ad::Var gram = cco_gram(b, s, k, cfg);
      ad::Var alpha = ad::add_scalar(ad::softplus(b(pre + ".alpha")), cfg.alpha_min);
      su = nn::cadd(nn::cmul_real(s.u, gram), mul_scalar(s.u, alpha));
      s_field = gram.value();
      for (auto& v : s_field.vec()) v += alpha.value()[0];
    }
    nn::CVar src;
    if (ov && ov->source) {
      src = constant_complex(t, *ov->source);
      if (src.re.shape() != s.u.re.shape()) throw ShapeError("source override must match the iterate");
    } else {
      src = repeat(s.ug, cfg.Cu);
    }
    ad::Var dt = ov && ov->dt ? t.constant(Tensor({1}, *ov->dt)) : b(pre + ".step");
    rep.dt = dt.value()[0];
    if (cfg.clamp && !(ov && ov->dt)) {
      LinearOp op;
      op.shape = s_field.shape();
      op.apply = [&s_field](const ComplexVolume& x) {
        ComplexVolume y = x;
        for (std::size_t n = 0; n < y.size(); ++n) {
          y.re[n] *= s_field[n];
          y.im[n] *= s_field[n];
        }
        return y;
      };
      op.adjoint = op.apply;
      const ClampResult c = clamp_to_contraction(op, rep.dt, cfg.B_target, cfg.power_iters);
      if (c.clamped) {
        dt = rep.dt != 0.0 ? ad::scale(dt, c.factor) : t.constant(Tensor({1}, c.dt));
        rep.clamp_factor = c.factor;
        rep.dt = c.dt;
      }
      rep.norm = c.norm_after;
    }
    nn::CVar next = nn::cadd(s.u, mul_scalar(nn::csub(src, su), dt));
    check_finite(next, "scale " + std::to_string(s.j) + " layer " + std::to_string(k));
    rep.residual = diff_norm(next, s.u);
    s.u = next;
    if (diag) diag->layers.push_back(rep);
    note(diag, "layer " + std::to_string(s.j) + "." + std::to_string(k));
  }
}

void restrict_scale(const Bound& b, ScaleState& s, const NanoConfig& cfg, NanoDiagnostics* diag) {
  if (s.j >= cfg.J) throw ParameterError("no coarser scale below scale " + std::to_string(s.j));
  const Shape sp = spatial(s.u);
  for (auto d : sp)
    if (d < 2) throw ShapeError("cannot restrict a grid with an extent below 2: " + shape_str(sp));
  const std::string r = "nano.r" + std::to_string(s.j);
  s.pre_shapes.push_back(sp);
  s.skips.push_back(s.u);
  s.u = nn::cconv(b, r + ".u", s.u, {2, 2, 2});
  s.feat = nn::cconv(b, r + ".f", s.feat, {2, 2, 2});
  s.ug = nn::cconv(b, r + ".g", s.ug, {2, 2, 2});
  note(diag, "restrict " + std::to_string(s.j) + "->" + std::to_string(s.j + 1));
  s.j += 1;
}

nn::CVar prolong(const Bound& b, std::size_t j, nn::CVar coarse, nn::CVar skip, const Shape& extent) {
  nn::CVar up = nn::cconv_t(b, "nano.p" + std::to_string(j), coarse, {2, 2, 2},
                            {extent[0], extent[1], extent[2]});
  return nn::cadd(up, skip);
}

nn::CVar sfe_encode(const Bound& b, nn::CVar u, const NanoConfig& cfg) {
  const std::size_t B = cfg.B_bw, C = cfg.Cu;
  Tensor ones({1, B}, cfg.sfe_normalize ? 1.0 / static_cast<double>(B) : 1.0);
  auto mix = [&](const char* name) {
    ad::Var m = ad::reshape(b(name), {B, C * C});
    return ad::reshape(ad::apply_axis0(m, ones), {C, C, 1, 1, 1});
  };
  ad::Var mr = mix("nano.sfe.M.re"), mi = mix("nano.sfe.M.im");
  ad::Var none;
  nn::CVar z{ad::sub(ad::conv3d(u.re, mr, none, {1, 1, 1}), ad::conv3d(u.im, mi, none, {1, 1, 1})),
             ad::add(ad::conv3d(u.im, mr, none, {1, 1, 1}), ad::conv3d(u.re, mi, none, {1, 1, 1}))};
  nn::CVar h = nn::cprelu(nn::cconv(b, "nano.sfe.mlp1", z), cfg.slope);
  return nn::cconv(b, "nano.sfe.mlp2", h);
}

ad::Var project_volume(const Bound& b, nn::CVar u, const LightTransport& lt) {
  nn::CVar p = nn::cifft(nn::cconv(b, "nano.proj", u));
  const Shape sp = spatial(p);
  if (Shape{sp[0], sp[1], sp[2]} != lt.v_shape())
    throw ShapeError("projection grid " + shape_str(sp) + " does not match " +
                     shape_str(lt.v_shape()));
  ad::Var v = ad::reshape(p.re, lt.v_shape());
  return ad::apply_axis0(v, lt.R_z_inv_matrix());
}

NanoOutput nano_forward(const Bound& b, const Tensor& tau, const LightTransport& lt,
                        const NanoConfig& cfg, NanoDiagnostics* diag) {
  cfg.validate();
  ad::Tape& t = b.tape();
  const SceneGrid& g = lt.grid();
  if (tau.shape() != g.transient_shape())
    throw ShapeError("transient " + shape_str(tau.shape()) + " does not match grid " +
                     shape_str(g.transient_shape()));
  if (lt.n_v() != g.T) throw ParameterError("the neural operator requires N_v == T");
  if (!tau.all_finite()) throw NumericalError("non-finite values in the measurement");

  ad::Var tau_c = t.constant(tau);
  const double eta = std::max(0.0, nle_forward(b, tau_c, cfg.nle).eta_raw.value()[0]);
  if (!std::isfinite(eta)) throw NumericalError("non-finite values in noise estimation");
  if (diag) diag->eta = eta;
  note(diag, "nle");

  ad::Var f_st = stfe_forward(b, ad::scale(tau_c, cfg.feature_scale), cfg.stfe);
  if (!f_st.value().all_finite()) throw NumericalError("non-finite values in feature extraction");
  note(diag, "stfe");

  Tensor v_wiener;
  wiener_reconstruct(tau, lt, cfg.wiener_alpha_rel, &v_wiener);
  ScaleState s = lift(b, f_st, eta, fft3(v_wiener), cfg, diag);

  for (std::size_t j = 1; j <= cfg.J; ++j) {
    iterate_scale(b, s, cfg, diag);
    if (j < cfg.J) restrict_scale(b, s, cfg, diag);
  }
  nn::CVar top = sfe_encode(b, s.u, cfg);
  check_finite(top, "frequency encoding");
  note(diag, "sfe");
  for (std::size_t j = cfg.J - 1; j >= 1; --j) {
    top = prolong(b, j, top, s.skips[j - 1], s.pre_shapes[j - 1]);
    note(diag, "prolong " + std::to_string(j + 1) + "->" + std::to_string(j));
  }
  ad::Var u = project_volume(b, top, lt);
  if (!u.value().all_finite()) throw NumericalError("non-finite values in projection");
  note(diag, "project");
  ad::Var albedo = enhance2d(b, ad::max_axis0(u), cfg.slope);
  note(diag, "enhance");
  return {u, albedo};
}

Reconstruction reconstruct(const Tensor& tau, const ModelParams& p, const LightTransport& lt,
                           const NanoConfig& cfg) {
  ad::Tape t;
  Bound b(t, p, true);
  Reconstruction r;
  NanoOutput o = nano_forward(b, tau, lt, cfg, &r.diag);
  r.u = o.u.value();
  r.albedo = o.albedo.value();
  return r;
}

}  // namespace nlos
