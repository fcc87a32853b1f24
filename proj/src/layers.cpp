#include "nlos/layers.hpp"

namespace nlos::nn {
namespace {

Shape weight_shape(const LayerSpec& s) {
  return s.transpose ? Shape{s.in, s.out, s.k[0], s.k[1], s.k[2]}
                     : Shape{s.out, s.in, s.k[0], s.k[1], s.k[2]};
}

std::size_t fan_in(const LayerSpec& s) { return s.in * s.k[0] * s.k[1] * s.k[2]; }

ParamMeta with_role(ParamMeta m, const char* role) {
  m.role = role;
  return m;
}

}  // namespace

void add_conv(ModelParams& p, std::mt19937_64& rng, const std::string& name, const LayerSpec& s,
              ParamMeta meta) {
  p.add(name + ".w", uniform_fan_in(rng, weight_shape(s), fan_in(s)), meta);
  if (s.bias) p.add(name + ".b", uniform_fan_in(rng, {s.out}, fan_in(s)), meta);
}

ad::Var conv(const Bound& b, const std::string& name, ad::Var x, Index3 stride) {
  return ad::conv3d(x, b(name + ".w"), b.optional(name + ".b"), stride);
}

ad::Var conv_t(const Bound& b, const std::string& name, ad::Var x, Index3 stride,
               Index3 out_extent) {
  return ad::conv3d_transpose(x, b(name + ".w"), b.optional(name + ".b"), stride, out_extent);
}

void add_cconv(ModelParams& p, std::mt19937_64& rng, const std::string& name, const LayerSpec& s,
               ParamMeta meta) {
  // the two planes share the fan-in bound of a real layer of twice the width
  LayerSpec wide = s;
  wide.in = 2 * s.in;
  p.add(name + ".re.w", uniform_fan_in(rng, weight_shape(s), fan_in(wide)), with_role(meta, "re"));
  p.add(name + ".im.w", uniform_fan_in(rng, weight_shape(s), fan_in(wide)), with_role(meta, "im"));
  if (s.bias) {
    p.add(name + ".re.b", uniform_fan_in(rng, {s.out}, fan_in(wide)), with_role(meta, "re"));
    p.add(name + ".im.b", uniform_fan_in(rng, {s.out}, fan_in(wide)), with_role(meta, "im"));
  }
}

CVar cconv(const Bound& b, const std::string& name, CVar h, Index3 stride) {
  ad::Var m = b(name + ".re.w"), n = b(name + ".im.w");
  ad::Var none;
  ad::Var re = ad::sub(ad::conv3d(h.re, m, b.optional(name + ".re.b"), stride),
                       ad::conv3d(h.im, n, none, stride));
  ad::Var im = ad::add(ad::conv3d(h.im, m, b.optional(name + ".im.b"), stride),
                       ad::conv3d(h.re, n, none, stride));
  return {re, im};
}

CVar cconv_t(const Bound& b, const std::string& name, CVar h, Index3 stride, Index3 out_extent) {
  ad::Var m = b(name + ".re.w"), n = b(name + ".im.w");
  ad::Var none;
  ad::Var re =
      ad::sub(ad::conv3d_transpose(h.re, m, b.optional(name + ".re.b"), stride, out_extent),
              ad::conv3d_transpose(h.im, n, none, stride, out_extent));
  ad::Var im =
      ad::add(ad::conv3d_transpose(h.im, m, b.optional(name + ".im.b"), stride, out_extent),
              ad::conv3d_transpose(h.re, n, none, stride, out_extent));
  return {re, im};
}

CVar cadd(CVar a, CVar b) { return {ad::add(a.re, b.re), ad::add(a.im, b.im)}; }
CVar csub(CVar a, CVar b) { return {ad::sub(a.re, b.re), ad::sub(a.im, b.im)}; }
CVar cscale(CVar a, double s) { return {ad::scale(a.re, s), ad::scale(a.im, s)}; }
CVar cprelu(CVar h, double slope) { return {ad::prelu(h.re, slope), ad::prelu(h.im, slope)}; }

CVar cconcat(const std::vector<CVar>& parts) {
  std::vector<ad::Var> re, im;
  for (const auto& p : parts) {
    re.push_back(p.re);
    im.push_back(p.im);
  }
  return {ad::concat_channels(re), ad::concat_channels(im)};
}

CVar cfft(CVar h) {
  ad::Var s = ad::fft3(ad::stack2(h.re, h.im));
  return {ad::take(s, 0), ad::take(s, 1)};
}

CVar cifft(CVar h) {
  ad::Var s = ad::ifft3(ad::stack2(h.re, h.im));
  return {ad::take(s, 0), ad::take(s, 1)};
}

CVar cmul_real(CVar h, ad::Var r) { return {ad::mul(h.re, r), ad::mul(h.im, r)}; }

ad::Var cabs2(CVar h) { return ad::add(ad::square(h.re), ad::square(h.im)); }

}  // namespace nlos::nn
