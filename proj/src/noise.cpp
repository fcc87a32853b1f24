#include "nlos/noise.hpp"

#include <cmath>

#include "nlos/error.hpp"
#include "nlos/layers.hpp"

namespace nlos {

Tensor add_gaussian(const Tensor& tau, double eta, std::uint64_t seed) {
  if (!(eta >= 0.0)) throw ParameterError("noise level must be nonnegative");
  Tensor out = tau;
  if (eta == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto& v : out.vec()) v += eta * nd(rng);
  return out;
}

Tensor add_poisson(const Tensor& tau, double exposure_scale, double dark_rate, std::uint64_t seed) {
  if (!(exposure_scale > 0.0)) throw ParameterError("exposure scale must be positive");
  if (!(dark_rate >= 0.0)) throw ParameterError("dark rate must be nonnegative");
  std::mt19937_64 rng(seed);
  Tensor out(tau.shape());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (tau[i] < 0.0 || !std::isfinite(tau[i]))
      throw DomainError("Poisson noise needs finite nonnegative counts, found " +
                        std::to_string(tau[i]));
    const double lambda = exposure_scale * tau[i] + dark_rate;
    if (lambda == 0.0) continue;
    std::poisson_distribution<long long> pd(lambda);
    out[i] = static_cast<double>(pd(rng)) / exposure_scale;
  }
  return out;
}

ComplexVolume degrade_kernel(const ComplexVolume& h, double eta, std::uint64_t seed, double gamma) {
  if (!(eta >= 0.0)) throw ParameterError("noise level must be nonnegative");
  ComplexVolume out = h;
  if (eta == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  const double k = eta * gamma;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double zr = k * nd(rng), zi = k * nd(rng);
    out.re[i] = h.re[i] * (1.0 + zr) - h.im[i] * zi;
    out.im[i] = h.im[i] * (1.0 + zr) + h.re[i] * zi;
  }
  return out;
}

void init_nle(ModelParams& p, std::mt19937_64& rng, const NleConfig& cfg) {
  const std::size_t w = cfg.width;
  ParamMeta m{"nle"};
  nn::add_conv(p, rng, "nle.enc1", {w, 1}, m);
  nn::add_conv(p, rng, "nle.enc2", {2 * w, w}, m);
  nn::add_conv(p, rng, "nle.dec1", {w, 2 * w, {3, 3, 3}, true, true}, m);
  nn::add_conv(p, rng, "nle.map", {1, w}, m);
  p.add("nle.level.w", uniform_fan_in(rng, {1, 4 * w}, 4 * w), m);
  p.add("nle.level.b", Tensor({1}), m);
}

NleOutput nle_forward(const Bound& b, ad::Var tau, const NleConfig& cfg) {
  const Shape s = tau.shape();
  if (s.size() != 3) throw ShapeError("noise estimator expects a (T, Th, Tw) transient");
  ad::Var x = ad::reshape(tau, {1, s[0], s[1], s[2]});
  ad::Var e1 = ad::prelu(nn::conv(b, "nle.enc1", x), cfg.slope);
  ad::Var e2 = ad::prelu(nn::conv(b, "nle.enc2", e1, {2, 2, 2}), cfg.slope);
  ad::Var d1 = ad::prelu(nn::conv_t(b, "nle.dec1", e2, {2, 2, 2}, {s[0], s[1], s[2]}), cfg.slope);
  ad::Var map = ad::reshape(nn::conv(b, "nle.map", ad::add(d1, e1)), s);
  // level head pools signed and rectified responses of the coarse encoder
  ad::Var pooled = ad::concat_channels({ad::channel_mean(e2), ad::channel_mean(ad::abs(e2))});
  ad::Var eta = ad::linear(pooled, b("nle.level.w"), b("nle.level.b"));
  return {eta, map};
}

NoiseEstimate estimate_noise(const Tensor& tau, const ModelParams& p, const NleConfig& cfg) {
  if (!tau.all_finite()) throw DomainError("transient contains non-finite values");
  ad::Tape tape;
  Bound b(tape, p, true);
  NleOutput o = nle_forward(b, tape.constant(tau), cfg);
  return {std::max(0.0, o.eta_raw.value()[0]), o.map.value()};
}

ad::Var nle_loss(const Bound& b, const NleSample& s, double beta, const NleConfig& cfg) {
  ad::Tape& t = b.tape();
  NleOutput o = nle_forward(b, t.constant(s.noisy), cfg);
  ad::Var level = ad::abs(ad::add_scalar(o.eta_raw, -s.eta));
  if (beta == 0.0) return ad::sum(level);
  ad::Var map = ad::mean(ad::abs(ad::sub(o.map, t.constant(s.noise))));
  return ad::add(ad::sum(level), ad::scale(map, beta));
}

std::vector<NleSample> make_nle_samples(const std::vector<Tensor>& clean, std::size_t count,
                                        double eta_max, std::uint64_t seed) {
  if (clean.empty()) throw ParameterError("no clean transients to draw from");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(0.0, eta_max);
  std::vector<NleSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& c = clean[i % clean.size()];
    const double eta = ud(rng);
    Tensor noisy = add_gaussian(c, eta, rng());
    Tensor noise = noisy - c;
    out.push_back({std::move(noisy), eta, std::move(noise)});
  }
  return out;
}

double nle_set_loss(const ModelParams& p, const std::vector<NleSample>& samples, double beta,
                    const NleConfig& net) {
  if (samples.empty()) throw ParameterError("empty noise-estimation dataset");
  double total = 0.0;
  for (const auto& s : samples) {
    ad::Tape tape;
    Bound b(tape, p, true);
    total += nle_loss(b, s, beta, net).value()[0];
  }
  return total / static_cast<double>(samples.size());
}

NleTrainReport train_nle(ModelParams& p, const std::vector<NleSample>& samples,
                         const NleTrainConfig& cfg, const NleConfig& net) {
  if (samples.empty()) throw ParameterError("empty noise-estimation dataset");
  p.set_trainable("nle.", true);
  NleTrainReport rep;
  rep.initial_loss = nle_set_loss(p, samples, cfg.beta, net);
  OptimState st;
  st.config = cfg.adam;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    ad::Tape tape;
    Bound b(tape, p);
    ad::Var loss = nle_loss(b, samples[k % samples.size()], cfg.beta, net);
    if (!std::isfinite(loss.value()[0]))
      throw NumericalError("noise estimator loss is not finite at step " + std::to_string(k));
    rep.step_loss.push_back(loss.value()[0]);
    tape.backward(loss);
    auto grads = tape.gradients();
    std::map<std::string, Tensor> nle_grads;
    for (auto& [name, g] : grads)
      if (name.rfind("nle.", 0) == 0) nle_grads.emplace(name, std::move(g));
    optimizer_step(p, nle_grads, st);
  }
  rep.final_loss = nle_set_loss(p, samples, cfg.beta, net);
  p.set_trainable("nle.", false);
  return rep;
}

}  // namespace nlos
