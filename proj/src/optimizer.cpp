#include "nlos/optimizer.hpp"

#include <cmath>

#include "nlos/error.hpp"

namespace nlos {

double OptimState::current_lr() const {
  return config.lr * std::exp(-config.decay_gamma * static_cast<double>(step));
}

void optimizer_step(ModelParams& params, const std::map<std::string, Tensor>& grads,
                    OptimState& state) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw ParameterError("gradient for unknown parameter " + name);
    if (g.shape() != params.get(name).shape())
      throw ShapeError("gradient shape mismatch for " + name);
    if (!g.all_finite()) throw NumericalError("non-finite gradient in parameter '" + name + "'");
  }
  const AdamWConfig& c = state.config;
  const double lr = state.current_lr();
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& [name, g] : grads) {
    if (!params.meta(name).trainable) continue;
    Tensor& p = params.get(name);
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.shape() != p.shape()) m = Tensor(p.shape());
    if (v.shape() != p.shape()) v = Tensor(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] -= lr * c.weight_decay * p[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      p[i] -= lr * mh / (std::sqrt(vh) + c.eps);
    }
  }
}

}  // namespace nlos
