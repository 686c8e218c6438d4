#pragma once

#include "fasd/ndiff/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace fasd {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent generator keyed by (seed, tag, index). Stages and per-root
/// work draw from their own substream so results do not depend on the order
/// in which other work consumed randomness.
inline Rng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
  std::uint64_t k = splitmix64(seed ^ splitmix64(fnv1a(tag)));
  k = splitmix64(k ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  return Rng(k);
}

template <typename Scalar = double>
Mat<Scalar> gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(nd(rng));
  return m;
}

/// (E + E^T)/sqrt(2) with a zeroed diagonal: unit-variance symmetric noise.
template <typename Scalar = double>
Mat<Scalar> symmetric_gaussian(Index n, Rng& rng) {
  Mat<Scalar> e = gaussian<Scalar>(n, n, rng);
  Mat<Scalar> s = (e + e.transpose()) / Scalar(std::sqrt(2.0));
  s.diagonal().setZero();
  return s;
}

}  // namespace fasd
