#include "nlos/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "nlos/error.hpp"

namespace nlos {
namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : ptr(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

// Planner calls are not thread-safe; executes on a cached plan are.
// Plans are made for in-place transforms on fftw_malloc'd (aligned) buffers
// and executed through fftw_execute_dft on buffers of the same kind.
class PlanCache {
 public:
  fftw_plan get(int n0, int n1, int n2, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(n0, n1, n2, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    FftwBuffer scratch(static_cast<std::size_t>(n0) * n1 * n2);
    fftw_plan p = fftw_plan_dft_3d(n0, n1, n2, scratch.ptr, scratch.ptr, sign, FFTW_ESTIMATE);
    if (!p) throw NumericalError("fftw planner failed");
    plans_.emplace(key, p);
    return p;
  }
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

ComplexVolume transform(const ComplexVolume& v, int sign) {
  const Shape& s = v.shape();
  if (s.size() != 3 && s.size() != 4)
    throw ShapeError("fft3 expects rank 3 or 4, got " + shape_str(s));
  for (auto d : s)
    if (d == 0) throw ShapeError("fft3: zero-sized dimension in " + shape_str(s));
  const std::size_t off = s.size() - 3;
  const std::size_t channels = off ? s[0] : 1;
  const int n0 = static_cast<int>(s[off]), n1 = static_cast<int>(s[off + 1]),
            n2 = static_cast<int>(s[off + 2]);
  const std::size_t n = static_cast<std::size_t>(n0) * n1 * n2;
  fftw_plan plan = cache().get(n0, n1, n2, sign);

  ComplexVolume out(s);
  FftwBuffer buf(n);
  const double scale = sign == FFTW_BACKWARD ? 1.0 / static_cast<double>(n) : 1.0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* re = v.re.data() + c * n;
    const double* im = v.im.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      buf.ptr[i][0] = re[i];
      buf.ptr[i][1] = im[i];
    }
    fftw_execute_dft(plan, buf.ptr, buf.ptr);
    double* ore = out.re.data() + c * n;
    double* oim = out.im.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      ore[i] = buf.ptr[i][0] * scale;
      oim[i] = buf.ptr[i][1] * scale;
    }
  }
  return out;
}

}  // namespace

ComplexVolume fft3(const ComplexVolume& v) { return transform(v, FFTW_FORWARD); }
ComplexVolume ifft3(const ComplexVolume& v) { return transform(v, FFTW_BACKWARD); }

ComplexVolume fft3(const Tensor& real) {
  return fft3(ComplexVolume(real, Tensor(real.shape())));
}

}  // namespace nlos
