#pragma once
// Shared basics: complex alias, error type, bit helpers, content hashing.

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <bit>

namespace avq {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline int popcount64(std::uint64_t v) { return std::popcount(v); }

inline int parity64(std::uint64_t v) { return std::popcount(v) & 1; }

inline bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

inline int log2_exact(std::size_t v) {
  if (!is_pow2(v)) throw Error("dimension is not a power of two");
  return std::countr_zero(v);
}

// FNV-1a, used for manifest content hashes and decomposition cache keys.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a_str(const std::string& s,
                               std::uint64_t seed = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), seed);
}

}  // namespace avq
