#pragma once

// Named-array checkpoint:
//   "FASD" | u32 version | u32 count | count x array
//   array: u32 name_len | name | u32 rank | u64 dims[rank] | f64 values (row-major)
// All integers and values little-endian.

#include "fasd/ndiff/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fasd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;

  std::uint64_t numel() const;
  bool operator==(const NamedArray&) const = default;
};

class Checkpoint {
 public:
  void add(std::string name, std::vector<std::uint64_t> dims, std::vector<double> values);
  void add(std::string name, const Tensor& t);
  void add_vector(std::string name, const std::vector<double>& v);
  void add_string(std::string name, std::string_view s);
  void add_scalar(std::string name, double v);

  bool contains(std::string_view name) const;
  const NamedArray& at(std::string_view name) const;
  Tensor tensor(std::string_view name) const;  // rank 2 (rank 1 becomes a row, rank 0 a 1x1)
  std::vector<double> vector(std::string_view name) const;
  std::string string(std::string_view name) const;
  double scalar(std::string_view name) const;

  const std::vector<NamedArray>& arrays() const { return arrays_; }
  bool operator==(const Checkpoint&) const = default;

 private:
  std::vector<NamedArray> arrays_;
};

std::string encode_checkpoint(const Checkpoint& c);
/// Throws DataError on bad magic, unknown version or truncation.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores every parameter of a model under its visit name.
template <typename Model>
void store_params(Checkpoint& c, Model& m, const std::string& prefix = {}) {
  m.visit([&](const std::string& name, Tensor& t) { c.add(prefix + name, t); });
}

/// Overwrites parameters of an already-shaped model; shapes must agree.
template <typename Model>
void load_params(const Checkpoint& c, Model& m, const std::string& prefix = {});

}  // namespace fasd

#include "fasd/errors.hpp"

namespace fasd {

template <typename Model>
void load_params(const Checkpoint& c, Model& m, const std::string& prefix) {
  m.visit([&](const std::string& name, Tensor& t) {
    if (!c.contains(prefix + name)) throw DataError("checkpoint lacks parameter " + prefix + name);
    Tensor v = c.tensor(prefix + name);
    if (v.rows() != t.rows() || v.cols() != t.cols())
      throw DataError("checkpoint parameter " + prefix + name + " has shape " + shape_str(v) + ", expected " +
                      shape_str(t));
    t = std::move(v);
  });
}

}  // namespace fasd
