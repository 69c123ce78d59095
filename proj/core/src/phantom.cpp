#include "mtseg/phantom.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace mtseg {
inline namespace MTSEG_ABI {

namespace {

// Ellipsoid in normalized coordinates ([-1, 1] across each axis), rotated about z.
struct Ellipsoid {
  Vec3 center;
  Vec3 semi;
  double angle = 0.0;

  bool contains(Vec3 p) const {
    const Vec3 d = p - center;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (c * d.x + s * d.y) / semi.x;
    const double v = (-s * d.x + c * d.y) / semi.y;
    const double w = d.z / semi.z;
    return u * u + v * v + w * w <= 1.0;
  }

  // Maps a point of the unit ball into the ellipsoid.
  Vec3 from_unit(Vec3 q) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = q.x * semi.x;
    const double v = q.y * semi.y;
    return {center.x + c * u - s * v, center.y + s * u + c * v, center.z + q.z * semi.z};
  }
};

}  // namespace

Phantom make_phantom(Dims dims, std::uint64_t seed, double spacing_mm) {
  if (dims.nx < kMinPhantomDim || dims.ny < kMinPhantomDim || dims.nz < kMinPhantomDim) {
    throw std::invalid_argument("phantom dims must be at least " + std::to_string(kMinPhantomDim) + " per axis");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const Ellipsoid body{{uniform(-0.03, 0.03), uniform(-0.03, 0.03), 0.0},
                       {uniform(0.8, 0.9), uniform(0.65, 0.75), uniform(0.8, 0.9)},
                       0.0};
  // Liver placement keeps its rotated extent inside the smallest possible body.
  const Ellipsoid liver{{uniform(-0.35, -0.15), uniform(-0.1, 0.1), uniform(-0.1, 0.1)},
                        {uniform(0.32, 0.44), uniform(0.28, 0.38), uniform(0.36, 0.48)},
                        uniform(-0.5, 0.5)};

  const int n_tumors = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<Ellipsoid> tumors;
  for (int t = 0; t < n_tumors; ++t) {
    // Center drawn inside the inner half of the liver.
    Vec3 q;
    do {
      q = {uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
    } while (q.x * q.x + q.y * q.y + q.z * q.z > 1.0);
    const Vec3 c = liver.from_unit(0.5 * q);
    const double r = uniform(0.12, 0.2);
    tumors.push_back({c, {r * uniform(0.8, 1.2), r * uniform(0.8, 1.2), r * uniform(0.8, 1.2)}, uniform(0.0, 3.14159)});
  }

  Phantom out{Volume3(centered_grid(dims, spacing_mm)), LabelVolume(centered_grid(dims, spacing_mm))};
  auto normalized = [&dims](int i, int j, int k) {
    return Vec3{(i - 0.5 * (dims.nx - 1)) / (0.5 * dims.nx), (j - 0.5 * (dims.ny - 1)) / (0.5 * dims.ny),
                (k - 0.5 * (dims.nz - 1)) / (0.5 * dims.nz)};
  };

  std::vector<int> tumor_voxels(tumors.size(), 0);
  for (int k = 0; k < dims.nz; ++k) {
    for (int j = 0; j < dims.ny; ++j) {
      for (int i = 0; i < dims.nx; ++i) {
        const Vec3 p = normalized(i, j, k);
        if (!body.contains(p)) continue;
        float value = kBodyAttenuation;
        std::uint8_t label = 0;
        if (liver.contains(p)) {
          value = kLiverAttenuation;
          label = 1;
          for (std::size_t t = 0; t < tumors.size(); ++t) {
            if (tumors[t].contains(p)) {
              value = kTumorAttenuation;
              label = 2;
              ++tumor_voxels[t];
            }
          }
        }
        out.volume.at(i, j, k) = value;
        out.mask.at(i, j, k) = label;
      }
    }
  }

  // A tumor smaller than a voxel still marks the voxel nearest its center.
  for (std::size_t t = 0; t < tumors.size(); ++t) {
    if (tumor_voxels[t] > 0) continue;
    int bi = 0, bj = 0, bk = 0;
    double best = std::numeric_limits<double>::max();
    for (int k = 0; k < dims.nz; ++k) {
      for (int j = 0; j < dims.ny; ++j) {
        for (int i = 0; i < dims.nx; ++i) {
          const Vec3 d = normalized(i, j, k) - tumors[t].center;
          const double r2 = d.x * d.x + d.y * d.y + d.z * d.z;
          if (r2 < best) {
            best = r2;
            bi = i, bj = j, bk = k;
          }
        }
      }
    }
    if (out.mask.at(bi, bj, bk) >= 1) {
      out.mask.at(bi, bj, bk) = 2;
      out.volume.at(bi, bj, bk) = kTumorAttenuation;
    }
  }
  return out;
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
