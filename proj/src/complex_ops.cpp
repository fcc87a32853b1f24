#include "nlos/complex_ops.hpp"

#include <cmath>

#include "nlos/error.hpp"

namespace nlos {

ComplexKernel ComplexKernel::zeros(std::size_t out, std::size_t in, Index3 k, Index3 stride,
                                   bool transpose) {
  ComplexKernel w;
  Shape s = transpose ? Shape{in, out, k[0], k[1], k[2]} : Shape{out, in, k[0], k[1], k[2]};
  w.re = Tensor(s);
  w.im = Tensor(s);
  w.stride = stride;
  w.transpose = transpose;
  return w;
}

ComplexKernel ComplexKernel::delta(std::size_t channels, double w_re, double w_im, Index3 k) {
  ComplexKernel w = zeros(channels, channels, k);
  for (std::size_t c = 0; c < channels; ++c) {
    w.re.vec()[(((c * channels + c) * k[0] + k[0] / 2) * k[1] + k[1] / 2) * k[2] + k[2] / 2] = w_re;
    w.im.vec()[(((c * channels + c) * k[0] + k[0] / 2) * k[1] + k[1] / 2) * k[2] + k[2] / 2] = w_im;
  }
  return w;
}

void ComplexKernel::validate() const {
  require_same_shape(re, im, "complex kernel planes");
  if (re.ndim() != 5) throw ShapeError("complex kernel must be rank 5");
  if (bias && bias->size() != out_channels())
    throw ShapeError("complex kernel bias length does not match output channels");
}

ComplexVolume conv_c(const ComplexKernel& w, const ComplexVolume& h,
                     std::optional<Index3> out_extent) {
  w.validate();
  const bool rank3 = h.shape().size() == 3;
  Tensor x = rank3 ? h.re.reshaped({1, h.shape()[0], h.shape()[1], h.shape()[2]}) : h.re;
  Tensor y = rank3 ? h.im.reshaped({1, h.shape()[0], h.shape()[1], h.shape()[2]}) : h.im;
  if (x.ndim() != 4) throw ShapeError("conv_c expects rank 3 or 4 input");
  if (x.dim(0) != w.in_channels())
    throw ShapeError("conv_c channel mismatch: input " + std::to_string(x.dim(0)) +
                     " channels, kernel expects " + std::to_string(w.in_channels()));

  Tensor out_re, out_im;
  if (!w.transpose) {
    out_re = conv::forward(x, w.re, w.stride) - conv::forward(y, w.im, w.stride);
    out_im = conv::forward(y, w.re, w.stride) + conv::forward(x, w.im, w.stride);
  } else {
    Index3 ext{x.dim(1) * w.stride[0], x.dim(2) * w.stride[1], x.dim(3) * w.stride[2]};
    if (out_extent) ext = *out_extent;
    for (int a = 0; a < 3; ++a)
      if ((ext[a] + w.stride[a] - 1) / w.stride[a] != x.dim(1 + a))
        throw ShapeError("conv_c transpose: target extent incompatible with input");
    Shape target{w.out_channels(), ext[0], ext[1], ext[2]};
    out_re = conv::backward_input(x, w.re, w.stride, target) -
             conv::backward_input(y, w.im, w.stride, target);
    out_im = conv::backward_input(y, w.re, w.stride, target) +
             conv::backward_input(x, w.im, w.stride, target);
  }
  if (w.bias) {
    conv::add_bias(out_re, w.bias->re);
    conv::add_bias(out_im, w.bias->im);
  }
  if (rank3 && out_re.dim(0) == 1) {
    Shape s{out_re.dim(1), out_re.dim(2), out_re.dim(3)};
    out_re.reshape(s);
    out_im.reshape(s);
  }
  return {std::move(out_re), std::move(out_im)};
}

Activation Activation::prelu(double a) {
  if (!(a > 0.0 && a <= 1.0))
    throw ParameterError("prelu slope must lie in (0, 1] to stay 1-Lipschitz; got " +
                         std::to_string(a));
  return {Kind::PRelu, a};
}

double Activation::apply(double x) const {
  if (kind == Kind::Tanh) return std::tanh(x);
  return x >= 0.0 ? x : slope * x;
}

double Activation::derivative(double x) const {
  if (kind == Kind::Tanh) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  return x >= 0.0 ? 1.0 : slope;
}

ComplexVolume act_c(const ComplexVolume& h, const Activation& act) {
  if (act.kind == Activation::Kind::PRelu) Activation::prelu(act.slope);  // validates
  ComplexVolume out(h.shape());
  for (std::size_t i = 0; i < h.size(); ++i) {
    out.re[i] = act.apply(h.re[i]);
    out.im[i] = act.apply(h.im[i]);
  }
  return out;
}

}  // namespace nlos
