#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

// The tensor stack is compiled either in 32-bit (default) or 64-bit mode. The
// whole library lives in an inline namespace named after the mode so both
// builds can be linked into the same executable.
#if defined(MTSEG_REAL_DOUBLE)
#define MTSEG_ABI f64
#else
#define MTSEG_ABI f32
#endif

namespace mtseg {
inline namespace MTSEG_ABI {

#if defined(MTSEG_REAL_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

/// Voxel counts along x, y, z.
struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  constexpr std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  constexpr int operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

/// Integer voxel index (x, y, z).
using Index3 = std::array<int, 3>;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
};

/// Flat index in x-fastest order.
constexpr std::size_t flat_index(const Dims& d, int x, int y, int z) {
  return static_cast<std::size_t>(x) +
         static_cast<std::size_t>(d.nx) *
             (static_cast<std::size_t>(y) + static_cast<std::size_t>(d.ny) * static_cast<std::size_t>(z));
}

/// Malformed, missing or inconsistent data on disk.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; carries the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace MTSEG_ABI
}  // namespace mtseg
