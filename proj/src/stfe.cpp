#include "nlos/stfe.hpp"

#include "nlos/error.hpp"
#include "nlos/layers.hpp"

namespace nlos {
namespace {

constexpr Index3 kTime{3, 1, 1};
constexpr Index3 kPoint{1, 1, 1};

std::vector<std::ptrdiff_t> patch_index(const Shape& s) {
  if (s.size() != 4) throw ShapeError("patch extraction expects (C, T, gh, gw)");
  const std::size_t C = s[0], T = s[1], gh = s[2], gw = s[3];
  if (gh < 3 || gw < 3) throw ShapeError("patch extraction needs a spatial grid of at least 3x3");
  const std::size_t np = (gh - 1) * (gw - 1);
  std::vector<std::ptrdiff_t> idx(9 * C * T * np, -1);
  for (std::size_t n = 0; n < 9; ++n) {
    const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(n / 3) - 1;
    const std::ptrdiff_t l = static_cast<std::ptrdiff_t>(n % 3) - 1;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i + 1 < gh; ++i)
          for (std::size_t j = 0; j + 1 < gw; ++j) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i) + k;
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j) + l;
            const std::size_t p = i * (gw - 1) + j;
            const std::size_t out = ((n * C + c) * T + t) * np + p;
            if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(gh) ||
                x >= static_cast<std::ptrdiff_t>(gw))
              continue;
            idx[out] = static_cast<std::ptrdiff_t>(((c * T + t) * gh + static_cast<std::size_t>(y)) * gw +
                                                   static_cast<std::size_t>(x));
          }
  }
  return idx;
}

}  // namespace

void init_stfe(ModelParams& p, std::mt19937_64& rng, const StfeConfig& cfg) {
  const std::size_t C = cfg.C;
  ParamMeta m{"stfe"};
  // global 3D U-Net
  nn::add_conv(p, rng, "stfe.g.enc1", {2 * C, 1}, m);
  nn::add_conv(p, rng, "stfe.g.enc2", {4 * C, 2 * C}, m);
  nn::add_conv(p, rng, "stfe.g.dec1", {2 * C, 4 * C, {3, 3, 3}, true, true}, m);
  nn::add_conv(p, rng, "stfe.g.out", {4 * C, 2 * C}, m);
  // temporal downsampling to tau_down
  nn::add_conv(p, rng, "stfe.l.down1", {2 * C, 1}, m);
  nn::add_conv(p, rng, "stfe.l.down2", {4 * C, 2 * C}, m);
  // per-patch 1D U-Net, weights shared across patches
  nn::add_conv(p, rng, "stfe.l.enc1", {8 * C, 36 * C, kTime}, m);
  nn::add_conv(p, rng, "stfe.l.enc2", {8 * C, 8 * C, kTime}, m);
  nn::add_conv(p, rng, "stfe.l.dec1", {8 * C, 8 * C, kTime, true, true}, m);
  nn::add_conv(p, rng, "stfe.l.out", {4 * C, 8 * C, kTime}, m);
  nn::add_conv(p, rng, "stfe.l.up1", {4 * C, 4 * C, kTime, true, true}, m);
  nn::add_conv(p, rng, "stfe.l.up2", {4 * C, 4 * C, kTime, true, true}, m);
  // residual MLP
  nn::add_conv(p, rng, "stfe.l.mlp1", {8 * C, 4 * C, kPoint}, m);
  nn::add_conv(p, rng, "stfe.l.mlp2", {4 * C, 8 * C, kPoint}, m);
  // fusion
  nn::add_conv(p, rng, "stfe.f.c1", {4 * C, 8 * C}, m);
  nn::add_conv(p, rng, "stfe.f.c2", {4 * C, 4 * C}, m);
}

PatchSet extract_patches(const Tensor& down) {
  const Shape& s = down.shape();
  const auto idx = patch_index(s);
  const std::size_t np = (s[2] - 1) * (s[3] - 1);
  PatchSet ps{Tensor({9 * s[0], s[1], np, 1}), s[2], s[3]};
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (idx[i] >= 0) ps.data[i] = down[static_cast<std::size_t>(idx[i])];
  return ps;
}

ad::Var extract_patches(ad::Var down) {
  const Shape s = down.shape();
  auto idx = patch_index(s);
  return ad::gather(down, std::move(idx), {9 * s[0], s[1], (s[2] - 1) * (s[3] - 1), 1});
}

ad::Var remap_patches(ad::Var per_patch, std::size_t gh, std::size_t gw) {
  const Shape s = per_patch.shape();
  if (s.size() != 4 || s[2] != (gh - 1) * (gw - 1) || s[3] != 1)
    throw ShapeError("remap expects (C, T, N_p, 1) with N_p = (gh-1)(gw-1)");
  const std::size_t C = s[0], T = s[1], np = s[2];
  std::vector<std::ptrdiff_t> idx(C * T * gh * gw);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t y = 0; y < gh; ++y)
        for (std::size_t x = 0; x < gw; ++x) {
          const std::size_t p = std::min(y, gh - 2) * (gw - 1) + std::min(x, gw - 2);
          idx[((c * T + t) * gh + y) * gw + x] = static_cast<std::ptrdiff_t>((c * T + t) * np + p);
        }
  return ad::gather(per_patch, std::move(idx), {C, T, gh, gw});
}

ad::Var extract_global(const Bound& b, ad::Var tau, const StfeConfig& cfg) {
  const Shape s = tau.shape();
  if (s.size() != 3 || s[1] % 2 || s[2] % 2)
    throw ShapeError("feature extraction expects (T, Th, Tw) with even Th, Tw");
  const double a = cfg.slope;
  ad::Var x = ad::reshape(tau, {1, s[0], s[1], s[2]});
  ad::Var e1 = ad::prelu(nn::conv(b, "stfe.g.enc1", x, {1, 2, 2}), a);
  ad::Var e2 = ad::prelu(nn::conv(b, "stfe.g.enc2", e1, {2, 2, 2}), a);
  const Shape& h = e1.shape();
  ad::Var d1 = ad::prelu(nn::conv_t(b, "stfe.g.dec1", e2, {2, 2, 2}, {h[1], h[2], h[3]}), a);
  return nn::conv(b, "stfe.g.out", ad::add(d1, e1));
}

ad::Var downsample(const Bound& b, ad::Var tau, const StfeConfig& cfg) {
  const Shape s = tau.shape();
  ad::Var x = ad::reshape(tau, {1, s[0], s[1], s[2]});
  ad::Var d1 = ad::prelu(nn::conv(b, "stfe.l.down1", x, {2, 2, 2}), cfg.slope);
  return ad::prelu(nn::conv(b, "stfe.l.down2", d1, {2, 1, 1}), cfg.slope);
}

ad::Var extract_local(const Bound& b, ad::Var patches, std::size_t T, std::size_t gh,
                      std::size_t gw, const StfeConfig& cfg) {
  const double a = cfg.slope;
  const Shape& s = patches.shape();
  const std::size_t np = s[2];
  ad::Var e1 = ad::prelu(nn::conv(b, "stfe.l.enc1", patches), a);
  ad::Var e2 = ad::prelu(nn::conv(b, "stfe.l.enc2", e1, {2, 1, 1}), a);
  ad::Var d1 = ad::prelu(nn::conv_t(b, "stfe.l.dec1", e2, {2, 1, 1}, {s[1], np, 1}), a);
  ad::Var o = nn::conv(b, "stfe.l.out", ad::add(d1, e1));
  const std::size_t half = (T + 1) / 2;
  ad::Var u1 = ad::prelu(nn::conv_t(b, "stfe.l.up1", o, {2, 1, 1}, {half, np, 1}), a);
  ad::Var u2 = nn::conv_t(b, "stfe.l.up2", u1, {2, 1, 1}, {T, np, 1});
  ad::Var r = remap_patches(u2, gh, gw);
  ad::Var m = nn::conv(b, "stfe.l.mlp2", ad::prelu(nn::conv(b, "stfe.l.mlp1", r), a));
  return ad::add(r, m);
}

ad::Var fuse(const Bound& b, ad::Var local, ad::Var global, const StfeConfig& cfg) {
  if (local.shape() != global.shape())
    throw ShapeError("fusion inputs differ: " + shape_str(local.shape()) + " vs " +
                     shape_str(global.shape()));
  ad::Var h = ad::prelu(nn::conv(b, "stfe.f.c1", ad::concat_channels({local, global})), cfg.slope);
  return nn::conv(b, "stfe.f.c2", h);
}

ad::Var stfe_forward(const Bound& b, ad::Var tau, const StfeConfig& cfg) {
  const Shape s = tau.shape();
  ad::Var g = extract_global(b, tau, cfg);
  ad::Var down = downsample(b, tau, cfg);
  const Shape& ds = down.shape();
  ad::Var l = extract_local(b, extract_patches(down), s[0], ds[2], ds[3], cfg);
  return fuse(b, l, g, cfg);
}

}  // namespace nlos
