#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nlos/conv.hpp"
#include "nlos/tensor.hpp"

namespace nlos::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const;
  bool valid() const { return tape != nullptr; }
};

/// Append-only record of primitive operations. Every node's inputs precede
/// it, so one reverse sweep in creation order computes all gradients.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor v);
  /// Trainable leaf; its gradient is reported under `name`.
  Var leaf(Tensor v, std::string name);

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  const char* op(std::size_t id) const { return nodes_[id].op; }
  /// Gradient accumulator of a node (allocated on first use).
  Tensor& grad(std::size_t id);
  const Tensor& grad_of(Var v) const { return nodes_[v.id].grad; }
  void accumulate(std::size_t id, const Tensor& g);

  /// Reverse sweep from a scalar node. Throws if `loss` has more than one element.
  void backward(Var loss);

  /// Gradients of all named leaves; leaves off the loss path get zeros.
  std::map<std::string, Tensor> gradients() const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string name;
    const char* op = "";
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise arithmetic (operands of identical shape).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
/// a * s where s is a one-element node.
Var mul_scalar(Var a, Var s);

// Pointwise nonlinearities.
Var tanh(Var a);
Var prelu(Var a, double slope);
Var softplus(Var a);
Var square(Var a);
Var abs(Var a);
/// q * c / (c + q) for q >= 0: smooth saturation bounded by c.
Var saturate(Var q, double c);

// Reductions.
Var sum(Var a);
Var mean(Var a);
/// Per-channel mean of a (C, ...) tensor, giving shape (C).
Var channel_mean(Var a);

// Shape manipulation.
Var reshape(Var a, Shape s);
Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(Var a, std::size_t begin, std::size_t count);
/// Repeats a one-channel (1, ...) tensor into n channels.
Var repeat_channels(Var a, std::size_t n);
/// Stacks two same-shaped tensors along a new leading axis of extent 2.
Var stack2(Var a, Var b);
/// Index i along the leading axis.
Var take(Var a, std::size_t i);

// Convolution. Shapes follow nlos::conv; bias may be an invalid Var.
Var conv3d(Var x, Var w, Var bias, Index3 stride);
/// Adjoint of a strided conv3d; w laid out (in, out, k...).
Var conv3d_transpose(Var x, Var w, Var bias, Index3 stride, Index3 out_extent);

/// FFT over the last three axes of a stacked complex tensor (2, ...).
Var fft3(Var stacked);
Var ifft3(Var stacked);

/// Dense layer on vectors: W (m, n) * x (n) + b (m).
Var linear(Var x, Var w, Var b);

/// Applies a fixed matrix M (rows, n) along the leading axis of a (n, ...)
/// tensor.
Var apply_axis0(Var x, const Tensor& m);

/// Max over the leading axis of (D, H, W), returning (H, W); ties resolve to
/// the smallest index and gradients route to that index.
Var max_axis0(Var x);

/// Nearest-neighbor upsampling of the last two axes by 2 (rank 4).
Var upsample_xy2(Var x);

/// Forward differences along `axis` (rank 3), shape shrinks by one on that axis.
Var diff_axis(Var x, std::size_t axis);

/// out[i] = x[index[i]], or 0 where index[i] < 0. Gradients scatter-add.
Var gather(Var x, std::vector<std::ptrdiff_t> index, Shape out_shape);

/// Componentwise max(x, 0) for the forward value with the identity as
/// gradient where x > 0 and zero elsewhere.
Var relu(Var a);

}  // namespace nlos::ad
