#include "nlos/tensor.hpp"

#include <cmath>
#include <sstream>

#include "nlos/error.hpp"

namespace nlos {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return s.empty() ? 0 : n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::reshape(Shape shape) {
  if (shape_numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  shape_ = std::move(shape);
}

void Tensor::fill(double v) {
  for (auto& x : data_) x = v;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

Tensor& Tensor::operator+=(const Tensor& o) {
  require_same_shape(*this, o, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  require_same_shape(*this, o, "tensor -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& x : data_) x *= s;
  return *this;
}

void Tensor::axpy(double a, const Tensor& x) {
  require_same_shape(*this, x, "tensor axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
}

double Tensor::sum() const {
  double s = 0.0;
  for (auto x : data_) s += x;
  return s;
}

double Tensor::dot(const Tensor& o) const {
  require_same_shape(*this, o, "tensor dot");
  double s = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) s += data_[i] * o.data_[i];
  return s;
}

double Tensor::norm() const { return std::sqrt(dot(*this)); }

double Tensor::max_abs() const {
  double m = 0.0;
  for (auto x : data_) m = std::max(m, std::abs(x));
  return m;
}

bool Tensor::all_finite() const {
  for (auto x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

ComplexVolume::ComplexVolume(Tensor r, Tensor i) : re(std::move(r)), im(std::move(i)) {
  require_same_shape(re, im, "complex volume planes");
}

ComplexVolume& ComplexVolume::operator+=(const ComplexVolume& o) {
  re += o.re;
  im += o.im;
  return *this;
}

ComplexVolume& ComplexVolume::operator-=(const ComplexVolume& o) {
  re -= o.re;
  im -= o.im;
  return *this;
}

ComplexVolume& ComplexVolume::operator*=(double s) {
  re *= s;
  im *= s;
  return *this;
}

double ComplexVolume::norm2() const { return re.dot(re) + im.dot(im); }
double ComplexVolume::norm() const { return std::sqrt(norm2()); }
double ComplexVolume::dot_re(const ComplexVolume& o) const { return re.dot(o.re) + im.dot(o.im); }
bool ComplexVolume::all_finite() const { return re.all_finite() && im.all_finite(); }

ComplexVolume operator+(ComplexVolume a, const ComplexVolume& b) { return a += b; }
ComplexVolume operator-(ComplexVolume a, const ComplexVolume& b) { return a -= b; }
ComplexVolume operator*(double s, ComplexVolume a) { return a *= s; }

}  // namespace nlos
