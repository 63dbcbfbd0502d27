// Error types and small shared utilities.
#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace sc3d {

// Malformed on-disk data; the message names the offending file.
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A referenced entity (object id, lookup key, ...) does not exist.
struct not_found_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values produced where finite ones are required.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An optimization loop diverged; the message carries the epoch.
struct training_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Channel gain too small / rank deficient to invert.
struct singular_channel_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// FNV-1a, used for config hashes and parameter checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
  auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace sc3d
