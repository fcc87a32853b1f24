#include "nlos/params.hpp"

#include <cmath>

#include "nlos/error.hpp"

namespace nlos {

Tensor& ModelParams::add(const std::string& name, Tensor init, ParamMeta meta) {
  if (name.empty()) throw ParameterError("parameter name must not be empty");
  auto [it, inserted] = entries_.emplace(name, Entry{std::move(init), std::move(meta)});
  if (!inserted) throw ParameterError("duplicate parameter name: " + name);
  return it->second.value;
}

Tensor& ModelParams::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ParameterError("unknown parameter: " + name);
  return it->second.value;
}

const Tensor& ModelParams::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ParameterError("unknown parameter: " + name);
  return it->second.value;
}

const ParamMeta& ModelParams::meta(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ParameterError("unknown parameter: " + name);
  return it->second.meta;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

void ModelParams::assign(const std::string& name, const Tensor& value) {
  Tensor& dst = get(name);
  if (dst.shape() != value.shape())
    throw ShapeError("parameter " + name + " has shape " + shape_str(dst.shape()) +
                     ", cannot assign " + shape_str(value.shape()));
  dst = value;
}

void ModelParams::merge(const ModelParams& other) {
  for (const auto& [k, e] : other.entries_) add(k, e.value, e.meta);
}

void ModelParams::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [k, e] : entries_)
    if (k.rfind(prefix, 0) == 0) e.meta.trainable = trainable;
}

Tensor uniform_fan_in(std::mt19937_64& rng, const Shape& shape, std::size_t fan_in) {
  const double b = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-b, b);
  Tensor t(shape);
  for (auto& v : t.vec()) v = dist(rng);
  return t;
}

Bound::Bound(ad::Tape& tape, const ModelParams& params, bool frozen) : tape_(&tape) {
  for (const auto& name : params.names()) {
    const bool train = !frozen && params.meta(name).trainable;
    vars_[name] = train ? tape.leaf(params.get(name), name) : tape.constant(params.get(name));
  }
}

ad::Var Bound::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ParameterError("parameter not bound: " + name);
  return it->second;
}

ad::Var Bound::optional(const std::string& name) const {
  auto it = vars_.find(name);
  return it == vars_.end() ? ad::Var{} : it->second;
}

}  // namespace nlos
