#include "fasd/checkpoint.hpp"

#include "fasd/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

namespace fasd {

std::uint64_t NamedArray::numel() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void Checkpoint::add(std::string name, std::vector<std::uint64_t> dims, std::vector<double> values) {
  NamedArray a{std::move(name), std::move(dims), std::move(values)};
  if (a.numel() != a.values.size()) throw std::invalid_argument("checkpoint: dims do not match value count");
  if (contains(a.name)) throw std::invalid_argument("checkpoint: duplicate array " + a.name);
  arrays_.push_back(std::move(a));
}

void Checkpoint::add(std::string name, const Tensor& t) {
  add(std::move(name), {std::uint64_t(t.rows()), std::uint64_t(t.cols())},
      std::vector<double>(t.data(), t.data() + t.size()));
}

void Checkpoint::add_vector(std::string name, const std::vector<double>& v) {
  add(std::move(name), {std::uint64_t(v.size())}, v);
}

void Checkpoint::add_string(std::string name, std::string_view s) {
  std::vector<double> v;
  v.reserve(s.size());
  for (unsigned char ch : s) v.push_back(double(ch));
  add_vector(std::move(name), v);
}

void Checkpoint::add_scalar(std::string name, double v) { add(std::move(name), {}, {v}); }

bool Checkpoint::contains(std::string_view name) const {
  return std::any_of(arrays_.begin(), arrays_.end(), [&](const NamedArray& a) { return a.name == name; });
}

const NamedArray& Checkpoint::at(std::string_view name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  throw DataError("checkpoint has no array named " + std::string(name));
}

Tensor Checkpoint::tensor(std::string_view name) const {
  const NamedArray& a = at(name);
  Index r = 1, c = 1;
  if (a.dims.size() == 1) c = Index(a.dims[0]);
  else if (a.dims.size() == 2) r = Index(a.dims[0]), c = Index(a.dims[1]);
  else if (a.dims.size() > 2) throw DataError("checkpoint array " + a.name + " has rank > 2");
  Tensor t(r, c);
  std::copy(a.values.begin(), a.values.end(), t.data());
  return t;
}

std::vector<double> Checkpoint::vector(std::string_view name) const { return at(name).values; }

std::string Checkpoint::string(std::string_view name) const {
  std::string s;
  for (double v : at(name).values) s.push_back(char(static_cast<unsigned char>(v)));
  return s;
}

double Checkpoint::scalar(std::string_view name) const {
  const NamedArray& a = at(name);
  if (a.values.size() != 1) throw DataError("checkpoint array " + a.name + " is not a scalar");
  return a.values[0];
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto u = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(u.begin(), u.end());
    v = std::bit_cast<T>(u);
  }
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) {
      auto u = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
      std::reverse(u.begin(), u.end());
      v = std::bit_cast<T>(u);
    }
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw DataError("checkpoint truncated");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  std::string out = "FASD";
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, std::uint32_t(c.arrays().size()));
  for (const auto& a : c.arrays()) {
    put<std::uint32_t>(out, std::uint32_t(a.name.size()));
    out += a.name;
    put<std::uint32_t>(out, std::uint32_t(a.dims.size()));
    for (auto d : a.dims) put<std::uint64_t>(out, d);
    for (double v : a.values) put<double>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "FASD") throw DataError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  Checkpoint c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    std::string name(r.bytes(len));
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::uint64_t> dims(rank);
    std::uint64_t n = 1;
    for (auto& d : dims) {
      d = r.get<std::uint64_t>();
      n *= d;
    }
    if (n > r.remaining() / sizeof(double)) throw DataError("checkpoint truncated in array " + name);
    std::vector<double> values(n);
    for (auto& v : values) v = r.get<double>();
    c.add(std::move(name), std::move(dims), std::move(values));
  }
  if (r.remaining() != 0) throw DataError("trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace fasd
