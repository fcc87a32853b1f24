#include "nlos/autodiff.hpp"

#include <cmath>

#include "nlos/error.hpp"
#include "nlos/fft.hpp"

namespace nlos::ad {

const Tensor& Var::value() const { return tape->value(id); }
const Shape& Var::shape() const { return tape->value(id).shape(); }

Var Tape::constant(Tensor v) {
  nodes_.push_back(Node{std::move(v), {}, {}, nullptr, {}, "const", false});
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor v, std::string name) {
  nodes_.push_back(Node{std::move(v), {}, {}, nullptr, std::move(name), "leaf", true});
  return {this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op) {
  bool rg = false;
  for (auto i : inputs) rg = rg || nodes_[i].requires_grad;
  nodes_.push_back(
      Node{std::move(value), {}, std::move(inputs), rg ? std::move(fn) : nullptr, {}, op, rg});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Tensor& dst = grad(id);
  if (dst.size() != g.size())
    throw ShapeError(std::string("gradient size mismatch at op ") + nodes_[id].op);
  double* d = dst.data();
  const double* s = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: variable belongs to another tape");
  if (nodes_[loss.id].value.size() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_str(nodes_[loss.id].value.shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

std::map<std::string, Tensor> Tape::gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& n : nodes_) {
    if (n.name.empty()) continue;
    auto it = out.find(n.name);
    if (it == out.end()) it = out.emplace(n.name, Tensor(n.value.shape())).first;
    if (!n.grad.empty()) it->second += n.grad;
  }
  return out;
}

namespace {

Tape& tape_of(Var a) {
  if (!a.tape) throw Error("operation on an unbound variable");
  return *a.tape;
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("variables from different tapes");
}

template <typename F>
Var unary(Var a, const char* op, F&& f, std::function<double(double, double)> dfdx) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id;
  return t.push(std::move(y), {ia},
                [ia, dfdx](Tape& tp, std::size_t self) {
                  const Tensor& x = tp.value(ia);
                  const Tensor& y = tp.value(self);
                  const Tensor& g = tp.grad(self);
                  Tensor gx(x.shape());
                  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] * dfdx(x[i], y[i]);
                  tp.accumulate(ia, gx);
                },
                op);
}

}  // namespace

Var add(Var a, Var b) {
  same_tape(a, b);
  require_same_shape(a.value(), b.value(), "ad::add");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(a.value() + b.value(), {ia, ib},
                      [ia, ib](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        t.accumulate(ia, g);
                        t.accumulate(ib, g);
                      },
                      "add");
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  require_same_shape(a.value(), b.value(), "ad::sub");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(a.value() - b.value(), {ia, ib},
                      [ia, ib](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        t.accumulate(ia, g);
                        t.accumulate(ib, -1.0 * g);
                      },
                      "sub");
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  require_same_shape(a.value(), b.value(), "ad::mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor z(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] * y[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(z), {ia, ib},
                      [ia, ib](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        const Tensor& x = t.value(ia);
                        const Tensor& y = t.value(ib);
                        Tensor gx(x.shape()), gy(y.shape());
                        for (std::size_t i = 0; i < x.size(); ++i) {
                          gx[i] = g[i] * y[i];
                          gy[i] = g[i] * x[i];
                        }
                        t.accumulate(ia, gx);
                        t.accumulate(ib, gy);
                      },
                      "mul");
}

Var scale(Var a, double s) {
  const std::size_t ia = a.id;
  return tape_of(a).push(s * a.value(), {ia},
                         [ia, s](Tape& t, std::size_t self) { t.accumulate(ia, s * t.grad(self)); },
                         "scale");
}

Var add_scalar(Var a, double s) {
  Tensor y = a.value();
  for (auto& v : y.vec()) v += s;
  const std::size_t ia = a.id;
  return tape_of(a).push(std::move(y), {ia},
                         [ia](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self)); },
                         "add_scalar");
}

Var neg(Var a) { return scale(a, -1.0); }

Var mul_scalar(Var a, Var s) {
  same_tape(a, s);
  if (s.value().size() != 1) throw ShapeError("mul_scalar expects a one-element scale");
  const double sv = s.value()[0];
  const std::size_t ia = a.id, is = s.id;
  return a.tape->push(sv * a.value(), {ia, is},
                      [ia, is](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        t.accumulate(ia, t.value(is)[0] * g);
                        Tensor gs({1}, g.dot(t.value(ia)));
                        gs.reshape(t.value(is).shape());
                        t.accumulate(is, gs);
                      },
                      "mul_scalar");
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var prelu(Var a, double slope) {
  return unary(
      a, "prelu", [slope](double x) { return x >= 0.0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

Var softplus(Var a) {
  return unary(
      a, "softplus",
      [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var square(Var a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  // subgradient 0 at the kink
  return unary(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var saturate(Var q, double c) {
  if (!(c > 0.0)) throw ParameterError("saturate bound must be positive");
  return unary(
      q, "saturate", [c](double x) { return x * c / (c + x); },
      [c](double x, double) { return c * c / ((c + x) * (c + x)); });
}

Var sum(Var a) {
  const std::size_t ia = a.id;
  return tape_of(a).push(Tensor({1}, a.value().sum()), {ia},
                         [ia](Tape& t, std::size_t self) {
                           Tensor g(t.value(ia).shape(), t.grad(self)[0]);
                           t.accumulate(ia, g);
                         },
                         "sum");
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var channel_mean(Var a) {
  const Tensor& x = a.value();
  const std::size_t C = x.dim(0);
  const std::size_t n = x.size() / C;
  Tensor y({C});
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[c * n + i];
    y[c] = s / static_cast<double>(n);
  }
  const std::size_t ia = a.id;
  return tape_of(a).push(std::move(y), {ia},
                         [ia, C, n](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ia).shape());
                           for (std::size_t c = 0; c < C; ++c)
                             for (std::size_t i = 0; i < n; ++i)
                               gx[c * n + i] = g[c] / static_cast<double>(n);
                           t.accumulate(ia, gx);
                         },
                         "channel_mean");
}

Var reshape(Var a, Shape s) {
  const std::size_t ia = a.id;
  return tape_of(a).push(a.value().reshaped(std::move(s)), {ia},
                         [ia](Tape& t, std::size_t self) {
                           t.accumulate(ia, t.grad(self));
                         },
                         "reshape");
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Shape s = parts[0].shape();
  std::size_t C = 0;
  std::vector<std::size_t> ids, counts;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    Shape ps = p.shape();
    if (ps.size() != s.size() || !std::equal(ps.begin() + 1, ps.end(), s.begin() + 1))
      throw ShapeError("concat_channels: trailing shapes differ " + shape_str(ps) + " vs " +
                       shape_str(s));
    C += ps[0];
    ids.push_back(p.id);
    counts.push_back(p.value().size());
  }
  s[0] = C;
  Tensor y(s);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), y.data() + off);
    off += p.value().size();
  }
  return parts[0].tape->push(std::move(y), ids,
                             [ids, counts](Tape& t, std::size_t self) {
                               const Tensor& g = t.grad(self);
                               std::size_t off = 0;
                               for (std::size_t k = 0; k < ids.size(); ++k) {
                                 Tensor gk(t.value(ids[k]).shape());
                                 std::copy(g.data() + off, g.data() + off + counts[k], gk.data());
                                 t.accumulate(ids[k], gk);
                                 off += counts[k];
                               }
                             },
                             "concat");
}

Var slice_channels(Var a, std::size_t begin, std::size_t count) {
  const Tensor& x = a.value();
  if (begin + count > x.dim(0)) throw ShapeError("slice_channels out of range");
  const std::size_t n = x.size() / x.dim(0);
  Shape s = x.shape();
  s[0] = count;
  Tensor y(s);
  std::copy(x.data() + begin * n, x.data() + (begin + count) * n, y.data());
  const std::size_t ia = a.id;
  return tape_of(a).push(std::move(y), {ia},
                         [ia, begin, n](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ia).shape());
                           std::copy(g.data(), g.data() + g.size(), gx.data() + begin * n);
                           t.accumulate(ia, gx);
                         },
                         "slice");
}

Var repeat_channels(Var a, std::size_t count) {
  const Tensor& x = a.value();
  if (x.dim(0) != 1) throw ShapeError("repeat_channels expects one channel");
  Shape s = x.shape();
  s[0] = count;
  Tensor y(s);
  const std::size_t n = x.size();
  for (std::size_t c = 0; c < count; ++c) std::copy(x.data(), x.data() + n, y.data() + c * n);
  const std::size_t ia = a.id;
  return tape_of(a).push(std::move(y), {ia},
                         [ia, count, n](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ia).shape());
                           for (std::size_t c = 0; c < count; ++c)
                             for (std::size_t i = 0; i < n; ++i) gx[i] += g[c * n + i];
                           t.accumulate(ia, gx);
                         },
                         "repeat");
}

Var stack2(Var a, Var b) {
  same_tape(a, b);
  require_same_shape(a.value(), b.value(), "ad::stack2");
  Shape s = a.shape();
  s.insert(s.begin(), 2);
  Tensor y(s);
  const std::size_t n = a.value().size();
  std::copy(a.value().data(), a.value().data() + n, y.data());
  std::copy(b.value().data(), b.value().data() + n, y.data() + n);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(y), {ia, ib},
                      [ia, ib, n](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        Tensor ga(t.value(ia).shape()), gb(t.value(ib).shape());
                        std::copy(g.data(), g.data() + n, ga.data());
                        std::copy(g.data() + n, g.data() + 2 * n, gb.data());
                        t.accumulate(ia, ga);
                        t.accumulate(ib, gb);
                      },
                      "stack2");
}

Var take(Var a, std::size_t i) {
  const Tensor& x = a.value();
  if (i >= x.dim(0)) throw ShapeError("take index out of range");
  const std::size_t n = x.size() / x.dim(0);
  Shape s(x.shape().begin() + 1, x.shape().end());
  Tensor y(s);
  std::copy(x.data() + i * n, x.data() + (i + 1) * n, y.data());
  const std::size_t ia = a.id;
  return tape_of(a).push(std::move(y), {ia},
                         [ia, i, n](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ia).shape());
                           std::copy(g.data(), g.data() + n, gx.data() + i * n);
                           t.accumulate(ia, gx);
                         },
                         "take");
}

Var conv3d(Var x, Var w, Var bias, Index3 stride) {
  same_tape(x, w);
  Tensor y = conv::forward(x.value(), w.value(), stride);
  std::vector<std::size_t> ins{x.id, w.id};
  const bool has_bias = bias.valid();
  if (has_bias) {
    conv::add_bias(y, bias.value());
    ins.push_back(bias.id);
  }
  const std::size_t ix = x.id, iw = w.id, ib = bias.id;
  return x.tape->push(std::move(y), ins,
                      [ix, iw, ib, has_bias, stride](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        if (t.requires_grad(ix))
                          t.accumulate(ix, conv::backward_input(g, t.value(iw), stride,
                                                                t.value(ix).shape()));
                        if (t.requires_grad(iw))
                          t.accumulate(iw, conv::backward_weight(t.value(ix), g, stride,
                                                                 t.value(iw).shape()));
                        if (has_bias && t.requires_grad(ib)) t.accumulate(ib, conv::bias_grad(g));
                      },
                      "conv3d");
}

Var conv3d_transpose(Var x, Var w, Var bias, Index3 stride, Index3 out_extent) {
  same_tape(x, w);
  const Tensor& wv = w.value();
  Shape target{wv.dim(1), out_extent[0], out_extent[1], out_extent[2]};
  Tensor y = conv::backward_input(x.value(), wv, stride, target);
  std::vector<std::size_t> ins{x.id, w.id};
  const bool has_bias = bias.valid();
  if (has_bias) {
    conv::add_bias(y, bias.value());
    ins.push_back(bias.id);
  }
  const std::size_t ix = x.id, iw = w.id, ib = bias.id;
  return x.tape->push(std::move(y), ins,
                      [ix, iw, ib, has_bias, stride](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        if (t.requires_grad(ix))
                          t.accumulate(ix, conv::forward(g, t.value(iw), stride));
                        if (t.requires_grad(iw))
                          t.accumulate(iw, conv::backward_weight(g, t.value(ix), stride,
                                                                 t.value(iw).shape()));
                        if (has_bias && t.requires_grad(ib)) t.accumulate(ib, conv::bias_grad(g));
                      },
                      "conv3d_transpose");
}

namespace {

ComplexVolume unstack_complex(const Tensor& x) {
  if (x.ndim() < 4 || x.dim(0) != 2) throw ShapeError("expected stacked complex tensor (2, ...)");
  Shape s(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = x.size() / 2;
  ComplexVolume c(s);
  std::copy(x.data(), x.data() + n, c.re.data());
  std::copy(x.data() + n, x.data() + 2 * n, c.im.data());
  return c;
}

Tensor stack_complex(const ComplexVolume& c) {
  Shape s = c.shape();
  s.insert(s.begin(), 2);
  Tensor y(s);
  std::copy(c.re.data(), c.re.data() + c.size(), y.data());
  std::copy(c.im.data(), c.im.data() + c.size(), y.data() + c.size());
  return y;
}

std::size_t spatial_count(const Tensor& stacked) {
  const Shape& s = stacked.shape();
  return s[s.size() - 1] * s[s.size() - 2] * s[s.size() - 3];
}

}  // namespace

// Under the real inner product the adjoint of the unnormalized DFT is N times
// the normalized inverse, and vice versa.
Var fft3(Var stacked) {
  const std::size_t ia = stacked.id;
  Tensor y = stack_complex(nlos::fft3(unstack_complex(stacked.value())));
  return tape_of(stacked).push(
      std::move(y), {ia},
      [ia](Tape& t, std::size_t self) {
        const double n = static_cast<double>(spatial_count(t.value(ia)));
        Tensor g = stack_complex(nlos::ifft3(unstack_complex(t.grad(self))));
        t.accumulate(ia, n * g);
      },
      "fft3");
}

Var ifft3(Var stacked) {
  const std::size_t ia = stacked.id;
  Tensor y = stack_complex(nlos::ifft3(unstack_complex(stacked.value())));
  return tape_of(stacked).push(
      std::move(y), {ia},
      [ia](Tape& t, std::size_t self) {
        const double n = static_cast<double>(spatial_count(t.value(ia)));
        Tensor g = stack_complex(nlos::fft3(unstack_complex(t.grad(self))));
        t.accumulate(ia, (1.0 / n) * g);
      },
      "ifft3");
}

Var linear(Var x, Var w, Var b) {
  same_tape(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.ndim() != 2 || wv.dim(1) != xv.size())
    throw ShapeError("linear: weight " + shape_str(wv.shape()) + " vs input " +
                     shape_str(xv.shape()));
  const std::size_t m = wv.dim(0), n = wv.dim(1);
  Tensor y({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = b.valid() ? b.value()[i] : 0.0;
    for (std::size_t j = 0; j < n; ++j) s += wv[i * n + j] * xv[j];
    y[i] = s;
  }
  std::vector<std::size_t> ins{x.id, w.id};
  if (b.valid()) ins.push_back(b.id);
  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  const bool hb = b.valid();
  return x.tape->push(std::move(y), ins,
                      [ix, iw, ib, hb, m, n](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        const Tensor& xv = t.value(ix);
                        const Tensor& wv = t.value(iw);
                        Tensor gx(xv.shape()), gw(wv.shape());
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < n; ++j) {
                            gx[j] += wv[i * n + j] * g[i];
                            gw[i * n + j] = g[i] * xv[j];
                          }
                        t.accumulate(ix, gx);
                        t.accumulate(iw, gw);
                        if (hb) t.accumulate(ib, g);
                      },
                      "linear");
}

Var apply_axis0(Var x, const Tensor& m) {
  const Tensor& xv = x.value();
  if (m.ndim() != 2 || m.dim(1) != xv.dim(0))
    throw ShapeError("apply_axis0: matrix " + shape_str(m.shape()) + " vs input " +
                     shape_str(xv.shape()));
  const std::size_t rows = m.dim(0), n = m.dim(1), inner = xv.size() / n;
  Shape s = xv.shape();
  s[0] = rows;
  Tensor y(s);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < n; ++k) {
      const double a = m[r * n + k];
      if (a == 0.0) continue;
      for (std::size_t i = 0; i < inner; ++i) y[r * inner + i] += a * xv[k * inner + i];
    }
  const std::size_t ix = x.id;
  return tape_of(x).push(std::move(y), {ix},
                         [ix, m, rows, n, inner](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ix).shape());
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t k = 0; k < n; ++k) {
                               const double a = m[r * n + k];
                               if (a == 0.0) continue;
                               for (std::size_t i = 0; i < inner; ++i)
                                 gx[k * inner + i] += a * g[r * inner + i];
                             }
                           t.accumulate(ix, gx);
                         },
                         "apply_axis0");
}

Var max_axis0(Var x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 3) throw ShapeError("max_axis0 expects (D,H,W)");
  const std::size_t D = xv.dim(0), plane = xv.dim(1) * xv.dim(2);
  Tensor y({xv.dim(1), xv.dim(2)});
  std::vector<std::size_t> arg(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    double best = xv[p];
    for (std::size_t d = 1; d < D; ++d)
      if (xv[d * plane + p] > best) {
        best = xv[d * plane + p];
        arg[p] = d;
      }
    y[p] = best;
  }
  const std::size_t ix = x.id;
  return tape_of(x).push(std::move(y), {ix},
                         [ix, arg, plane](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ix).shape());
                           for (std::size_t p = 0; p < plane; ++p) gx[arg[p] * plane + p] = g[p];
                           t.accumulate(ix, gx);
                         },
                         "max_axis0");
}

Var upsample_xy2(Var x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 4) throw ShapeError("upsample_xy2 expects rank 4");
  const std::size_t C = xv.dim(0), D = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  Tensor y({C, D, 2 * H, 2 * W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t h = 0; h < 2 * H; ++h)
        for (std::size_t w = 0; w < 2 * W; ++w) y.at(c, d, h, w) = xv.at(c, d, h / 2, w / 2);
  const std::size_t ix = x.id;
  return tape_of(x).push(std::move(y), {ix},
                         [ix, C, D, H, W](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ix).shape());
                           for (std::size_t c = 0; c < C; ++c)
                             for (std::size_t d = 0; d < D; ++d)
                               for (std::size_t h = 0; h < 2 * H; ++h)
                                 for (std::size_t w = 0; w < 2 * W; ++w)
                                   gx.at(c, d, h / 2, w / 2) += g.at(c, d, h, w);
                           t.accumulate(ix, gx);
                         },
                         "upsample_xy2");
}

Var diff_axis(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 3 || axis > 2) throw ShapeError("diff_axis expects rank 3");
  Shape s = xv.shape();
  if (s[axis] < 2) {
    s[axis] = 0;
  } else {
    s[axis] -= 1;
  }
  const Shape in = xv.shape();
  const std::size_t stride = axis == 0 ? in[1] * in[2] : (axis == 1 ? in[2] : 1);
  Tensor y(s);
  std::size_t o = 0;
  for (std::size_t i = 0; i < s[0]; ++i)
    for (std::size_t j = 0; j < s[1]; ++j)
      for (std::size_t k = 0; k < s[2]; ++k, ++o) {
        const std::size_t p = (i * in[1] + j) * in[2] + k;
        y[o] = xv[p + stride] - xv[p];
      }
  const std::size_t ix = x.id;
  return tape_of(x).push(std::move(y), {ix},
                         [ix, s, in, stride](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(in);
                           std::size_t o = 0;
                           for (std::size_t i = 0; i < s[0]; ++i)
                             for (std::size_t j = 0; j < s[1]; ++j)
                               for (std::size_t k = 0; k < s[2]; ++k, ++o) {
                                 const std::size_t p = (i * in[1] + j) * in[2] + k;
                                 gx[p + stride] += g[o];
                                 gx[p] -= g[o];
                               }
                           t.accumulate(ix, gx);
                         },
                         "diff_axis");
}

Var gather(Var x, std::vector<std::ptrdiff_t> index, Shape out_shape) {
  if (shape_numel(out_shape) != index.size()) throw ShapeError("gather: index count != output size");
  const Tensor& xv = x.value();
  Tensor y(out_shape);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0) continue;
    if (static_cast<std::size_t>(index[i]) >= xv.size()) throw ShapeError("gather: index out of range");
    y[i] = xv[static_cast<std::size_t>(index[i])];
  }
  const std::size_t ix = x.id;
  return tape_of(x).push(std::move(y), {ix},
                         [ix, index = std::move(index)](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor gx(t.value(ix).shape());
                           for (std::size_t i = 0; i < index.size(); ++i)
                             if (index[i] >= 0) gx[static_cast<std::size_t>(index[i])] += g[i];
                           t.accumulate(ix, gx);
                         },
                         "gather");
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

}  // namespace nlos::ad
