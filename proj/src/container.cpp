#include "nlos/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nlos/error.hpp"

namespace nlos {
namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes little-endian");

template <typename T>
void put_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  const char* raw(std::size_t n) {
    need(n);
    const char* p = s_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw IoError("tensor container truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

void TensorContainer::put(const std::string& name, const Tensor& t, DType dtype) {
  if (name.empty() || name.size() > 0xffff) throw IoError("invalid entry name length");
  if (t.ndim() > 0xff) throw IoError("too many dimensions for the container");
  entries[name] = {t, dtype};
}

const Tensor& TensorContainer::get(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) throw IoError("container has no entry named " + name);
  return it->second.value;
}

std::string TensorContainer::serialize() const {
  std::string out = "NTC1";
  put_raw<std::uint16_t>(out, kContainerVersion);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, e] : entries) {
    put_raw<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(e.value.ndim()));
    for (auto d : e.value.shape()) {
      if (d > 0xffffffffu) throw IoError("dimension too large for the container");
      put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    if (e.dtype == DType::F64) {
      out.append(reinterpret_cast<const char*>(e.value.data()), e.value.size() * sizeof(double));
    } else {
      for (double v : e.value.vec()) put_raw<float>(out, static_cast<float>(v));
    }
  }
  return out;
}

TensorContainer TensorContainer::deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "NTC1") throw IoError("not a tensor container (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kContainerVersion)
    throw IoError("unsupported container version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  TensorContainer c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    std::string name = r.bytes(len);
    const auto code = r.get<std::uint8_t>();
    if (code > 1) throw IoError("unknown dtype code " + std::to_string(code) + " in entry " + name);
    const auto ndim = r.get<std::uint8_t>();
    Shape shape(ndim);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    Tensor t(shape);
    if (code == 1) {
      std::memcpy(t.data(), r.raw(t.size() * sizeof(double)), t.size() * sizeof(double));
    } else {
      for (auto& v : t.vec()) v = static_cast<double>(r.get<float>());
    }
    if (c.entries.count(name)) throw IoError("duplicate entry name " + name);
    c.entries[name] = {std::move(t), static_cast<DType>(code)};
  }
  if (!r.done()) throw IoError("trailing bytes after the last container entry");
  return c;
}

void TensorContainer::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const std::string s = serialize();
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

TensorContainer TensorContainer::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace nlos
