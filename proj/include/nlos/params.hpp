#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "nlos/autodiff.hpp"
#include "nlos/tensor.hpp"

namespace nlos {

struct ParamMeta {
  std::string module;
  int scale = -1;      // multigrid level j, or -1
  int iteration = -1;  // unrolled layer k, or -1
  std::string role = "real";  // "re" / "im" for halves of a complex weight
  bool trainable = true;
};

/// Named collection of real tensors. Names are unique and shapes are fixed
/// once added; iteration order is lexicographic by name.
class ModelParams {
 public:
  Tensor& add(const std::string& name, Tensor init, ParamMeta meta = {});
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  const ParamMeta& meta(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;
  /// Overwrites values of existing entries; shapes must match.
  void assign(const std::string& name, const Tensor& value);
  void merge(const ModelParams& other);
  /// Sets the trainable flag of every parameter whose name starts with `prefix`.
  void set_trainable(const std::string& prefix, bool trainable);

 private:
  struct Entry {
    Tensor value;
    ParamMeta meta;
  };
  std::map<std::string, Entry> entries_;
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_fan_in(std::mt19937_64& rng, const Shape& shape, std::size_t fan_in);

/// Parameters placed on a tape. Trainable entries become named leaves,
/// the rest (and everything when `frozen`) become constants.
class Bound {
 public:
  Bound(ad::Tape& tape, const ModelParams& params, bool frozen = false);
  ad::Var operator()(const std::string& name) const;
  /// Invalid Var when absent.
  ad::Var optional(const std::string& name) const;
  ad::Tape& tape() const { return *tape_; }

 private:
  ad::Tape* tape_;
  std::map<std::string, ad::Var> vars_;
};

}  // namespace nlos
