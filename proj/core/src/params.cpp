#include "cueplan/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cueplan/errors.hpp"

namespace cueplan {

Tensor& ParamSet::add(const std::string& name, std::vector<int> shape) {
  if (entries.count(name)) throw ValidationError("duplicate parameter " + name);
  Entry e;
  e.value = Tensor(shape);
  e.grad = Tensor(shape);
  e.velocity = Tensor(std::move(shape));
  return entries.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = entries.find(name);
  if (it == entries.end()) throw ValidationError("unknown parameter " + name);
  return it->second.value;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) throw ValidationError("unknown parameter " + name);
  return it->second.value;
}

Tensor& ParamSet::grad(const std::string& name) {
  auto it = entries.find(name);
  if (it == entries.end()) throw ValidationError("unknown parameter " + name);
  return it->second.grad;
}

void ParamSet::zero_grads() {
  for (auto& [name, e] : entries) {
    std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
  }
}

long long ParamSet::total_params() const {
  long long n = 0;
  for (const auto& [name, e] : entries) n += e.value.numel();
  return n;
}

void glorot_init(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-a, a);
}

void sgd_step(ParamSet& params, double lr, double momentum) {
  for (auto& [name, e] : params.entries) {
    for (size_t i = 0; i < e.value.data.size(); ++i) {
      e.velocity.data[i] = momentum * e.velocity.data[i] + e.grad.data[i];
      e.value.data[i] -= lr * e.velocity.data[i];
      e.grad.data[i] = 0.0;
    }
  }
}

namespace {

constexpr char kMagic[5] = {'B', 'L', 'N', 'N', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

void put_f64s(std::ostream& os, const std::vector<double>& vals) {
  std::string buf(vals.size() * 8, '\0');
  for (size_t i = 0; i < vals.size(); ++i) {
    uint64_t u;
    std::memcpy(&u, &vals[i], 8);
    for (int k = 0; k < 8; ++k) buf[i * 8 + size_t(k)] = char(u >> (8 * k));
  }
  os.write(buf.data(), std::streamsize(buf.size()));
}

void get_f64s(std::istream& is, std::vector<double>& vals) {
  std::string buf(vals.size() * 8, '\0');
  is.read(buf.data(), std::streamsize(buf.size()));
  for (size_t i = 0; i < vals.size(); ++i) {
    uint64_t u = 0;
    for (int k = 0; k < 8; ++k) {
      u |= uint64_t(uint8_t(buf[i * 8 + size_t(k)])) << (8 * k);
    }
    std::memcpy(&vals[i], &u, 8);
  }
}

}  // namespace

void save_params(const ParamSet& params, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoFailure("cannot open for writing: " + file.string());
  os.write(kMagic, 5);
  put_u32(os, uint32_t(params.meta.size()));
  os.write(params.meta.data(), std::streamsize(params.meta.size()));
  for (const auto& [name, e] : params.entries) {
    put_u32(os, uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put_u32(os, uint32_t(e.value.shape.size()));
    for (int d : e.value.shape) put_u32(os, uint32_t(d));
    put_f64s(os, e.value.data);
  }
  if (!os) throw IoFailure("write failed: " + file.string());
}

ParamSet load_params(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoFailure("cannot open for reading: " + file.string());
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0) {
    throw IoFailure("bad magic in " + file.string());
  }
  ParamSet params;
  uint32_t meta_len = get_u32(is);
  if (!is || meta_len > (1u << 24)) throw IoFailure("corrupt header in " + file.string());
  params.meta.resize(meta_len);
  is.read(params.meta.data(), std::streamsize(meta_len));
  while (is.peek() != std::char_traits<char>::eof()) {
    uint32_t name_len = get_u32(is);
    if (!is || name_len > (1u << 16)) throw IoFailure("corrupt entry in " + file.string());
    std::string name(name_len, '\0');
    is.read(name.data(), std::streamsize(name_len));
    uint32_t ndim = get_u32(is);
    if (!is || ndim > 8) throw IoFailure("corrupt shape in " + file.string());
    std::vector<int> shape(ndim);
    for (uint32_t i = 0; i < ndim; ++i) shape[i] = int(get_u32(is));
    Tensor& t = params.add(name, shape);
    get_f64s(is, t.data);
    if (!is) throw IoFailure("truncated tensor data in " + file.string());
  }
  return params;
}

}  // namespace cueplan
