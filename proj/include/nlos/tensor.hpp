#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nlos {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major tensor of doubles. Volumes are rank 3 (d0, d1, d2);
/// network activations are rank 4 (channels, d0, d1, d2).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at(std::size_t c, std::size_t i, std::size_t j, std::size_t k) {
    return data_[((c * shape_[1] + i) * shape_[2] + j) * shape_[3] + k];
  }
  double at(std::size_t c, std::size_t i, std::size_t j, std::size_t k) const {
    return data_[((c * shape_[1] + i) * shape_[2] + j) * shape_[3] + k];
  }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  void reshape(Shape shape);

  void fill(double v);
  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);
  Tensor& operator*=(double s);
  /// this += a * x
  void axpy(double a, const Tensor& x);

  double sum() const;
  double dot(const Tensor& o) const;
  double norm() const;
  double max_abs() const;
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Complex tensor stored as separate real and imaginary planes.
struct ComplexVolume {
  Tensor re;
  Tensor im;

  ComplexVolume() = default;
  explicit ComplexVolume(const Shape& shape) : re(shape), im(shape) {}
  ComplexVolume(Tensor r, Tensor i);

  const Shape& shape() const { return re.shape(); }
  std::size_t size() const { return re.size(); }

  ComplexVolume& operator+=(const ComplexVolume& o);
  ComplexVolume& operator-=(const ComplexVolume& o);
  ComplexVolume& operator*=(double s);

  /// Squared Euclidean norm sum |z|^2.
  double norm2() const;
  double norm() const;
  /// Real inner product Re <a, b> = sum(a.re*b.re + a.im*b.im).
  double dot_re(const ComplexVolume& o) const;
  bool all_finite() const;
};

ComplexVolume operator+(ComplexVolume a, const ComplexVolume& b);
ComplexVolume operator-(ComplexVolume a, const ComplexVolume& b);
ComplexVolume operator*(double s, ComplexVolume a);

}  // namespace nlos
