#include "nlos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlos/error.hpp"
#include "nlos/layers.hpp"

namespace nlos {

Projection project(const Tensor& u) {
  if (u.ndim() != 3) throw ShapeError("project expects a (D, H, W) volume");
  const std::size_t D = u.dim(0), H = u.dim(1), W = u.dim(2);
  Projection p{Tensor({H, W}), Tensor({H, W})};
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double best = u.at(0, y, x);
      std::size_t arg = 0;
      for (std::size_t d = 1; d < D; ++d)
        if (u.at(d, y, x) > best) {
          best = u.at(d, y, x);
          arg = d;
        }
      p.albedo[y * W + x] = best;
      p.depth[y * W + x] = static_cast<double>(arg);
    }
  return p;
}

void init_enhance(ModelParams& p, std::mt19937_64& rng, std::size_t width) {
  ParamMeta m{"enhance"};
  nn::add_conv(p, rng, "enh.c1", {width, 1, {1, 3, 3}}, m);
  nn::add_conv(p, rng, "enh.c2", {1, width, {1, 3, 3}}, m);
}

ad::Var enhance2d(const Bound& b, ad::Var albedo, double slope) {
  const Shape s = albedo.shape();
  if (s.size() != 2) throw ShapeError("enhance2d expects an (H, W) image");
  ad::Var x = ad::reshape(albedo, {1, 1, s[0], s[1]});
  ad::Var r = nn::conv(b, "enh.c2", ad::prelu(nn::conv(b, "enh.c1", x), slope));
  return ad::add(albedo, ad::reshape(r, s));
}

Tensor enhance2d(const Tensor& albedo, const ModelParams& p) {
  ad::Tape t;
  Bound b(t, p, true);
  return enhance2d(b, t.constant(albedo)).value();
}

double tv3(const Tensor& u) {
  if (u.ndim() != 3) throw ShapeError("tv3 expects a rank-3 volume");
  const std::size_t A = u.dim(0), B = u.dim(1), C = u.dim(2);
  double s = 0.0;
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j)
      for (std::size_t k = 0; k < C; ++k) {
        const double v = u.at(i, j, k);
        if (i + 1 < A) s += std::abs(u.at(i + 1, j, k) - v);
        if (j + 1 < B) s += std::abs(u.at(i, j + 1, k) - v);
        if (k + 1 < C) s += std::abs(u.at(i, j, k + 1) - v);
      }
  return s;
}

ad::Var tv3(ad::Var u) {
  std::vector<ad::Var> parts;
  for (std::size_t a = 0; a < 3; ++a) {
    ad::Var d = ad::diff_axis(u, a);
    if (d.value().size() > 0) parts.push_back(ad::sum(ad::abs(d)));
  }
  if (parts.empty()) return ad::scale(ad::sum(u), 0.0);
  ad::Var total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) total = ad::add(total, parts[i]);
  return total;
}

double loss_total(const Tensor& I, const Tensor& I_gt, const Tensor& u, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("TV weight must be nonnegative");
  require_same_shape(I, I_gt, "loss_total");
  double l1 = 0.0;
  for (std::size_t i = 0; i < I.size(); ++i) l1 += std::abs(I[i] - I_gt[i]);
  return lambda == 0.0 ? l1 : l1 + lambda * tv3(u);
}

ad::Var loss_total(ad::Var I, const Tensor& I_gt, ad::Var u, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("TV weight must be nonnegative");
  require_same_shape(I.value(), I_gt, "loss_total");
  ad::Var l1 = ad::sum(ad::abs(ad::sub(I, I.tape->constant(I_gt))));
  if (lambda == 0.0) return l1;
  return ad::add(l1, ad::scale(tv3(u), lambda));
}

double psnr_from_mse(double mse, double peak) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

Tensor normalize_image(const Tensor& img) {
  const double m = *std::max_element(img.vec().begin(), img.vec().end());
  Tensor out = img;
  for (auto& v : out.vec()) v = std::clamp(m > 0.0 ? v / m : 0.0, 0.0, 1.0);
  return out;
}

double psnr(const Tensor& img, const Tensor& ref) {
  require_same_shape(img, ref, "psnr");
  const Tensor a = normalize_image(img), b = normalize_image(ref);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  return psnr_from_mse(mse / static_cast<double>(a.size()));
}

namespace {

constexpr int kWin = 11;

std::vector<double> gaussian_taps() {
  std::vector<double> g(kWin);
  double s = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable 'valid' filtering of an (H, W) image.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t H, std::size_t W,
                                 const std::vector<double>& g) {
  const std::size_t oh = H - kWin + 1, ow = W - kWin + 1;
  std::vector<double> rows(H * ow), out(oh * ow);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[k] * img[y * W + x + k];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, double L) {
  require_same_shape(a, b, "ssim");
  if (a.ndim() != 2 || a.dim(0) < kWin || a.dim(1) < kWin)
    throw ShapeError("ssim needs 2D images of at least 11x11");
  const std::size_t H = a.dim(0), W = a.dim(1);
  const auto g = gaussian_taps();
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a.vec(), H, W, g), mu_b = filter_valid(b.vec(), H, W, g);
  const auto s_aa = filter_valid(aa, H, W, g), s_bb = filter_valid(bb, H, W, g),
             s_ab = filter_valid(ab, H, W, g);
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = s_aa[i] - mu_a[i] * mu_a[i];
    const double vb = s_bb[i] - mu_b[i] * mu_b[i];
    const double cov = s_ab[i] - mu_a[i] * mu_b[i];
    total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

MetricSet metrics(const Tensor& I, const Tensor& I_gt, const Tensor& depth, const Tensor& depth_gt,
                  std::size_t D) {
  require_same_shape(I, I_gt, "metrics");
  require_same_shape(depth, depth_gt, "metrics depth");
  require_same_shape(I, depth, "metrics image/depth");
  if (D < 2) throw ShapeError("depth extent must be at least 2");
  MetricSet m;
  const Tensor a = normalize_image(I), b = normalize_image(I_gt);
  m.psnr = psnr(I, I_gt);
  m.ssim = ssim(a, b);
  const double gmax = *std::max_element(I_gt.vec().begin(), I_gt.vec().end());
  double se = 0.0, ae = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < I.size(); ++i) {
    if (!(I_gt[i] > 0.05 * gmax)) continue;
    const double e = (depth[i] - depth_gt[i]) / static_cast<double>(D - 1);
    se += e * e;
    ae += std::abs(e);
    ++n;
  }
  if (n > 0) {
    m.depth_rmse = std::sqrt(se / static_cast<double>(n));
    m.depth_mad = ae / static_cast<double>(n);
  }
  return m;
}

}  // namespace nlos
