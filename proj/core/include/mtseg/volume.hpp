#pragma once

#include <cstdint>
#include <vector>

#include "mtseg/common.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// Sampling grid shared by scalar and label volumes. `origin` is the center of
/// voxel (0,0,0); all lengths are in millimetres.
struct Grid {
  Dims dims;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin;

  /// Physical position of the center of voxel (i, j, k).
  Vec3 voxel_center(int i, int j, int k) const {
    return {origin.x + i * spacing.x, origin.y + j * spacing.y, origin.z + k * spacing.z};
  }
  /// Physical center of the grid's bounding box.
  Vec3 center() const {
    return {origin.x + 0.5 * (dims.nx - 1) * spacing.x, origin.y + 0.5 * (dims.ny - 1) * spacing.y,
            origin.z + 0.5 * (dims.nz - 1) * spacing.z};
  }
  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Grid of `dims` voxels with isotropic `spacing`, centered on the coordinate origin.
Grid centered_grid(Dims dims, double spacing = 1.0);

/// Throws std::invalid_argument unless dims and spacing are strictly positive.
void validate_grid(const Grid& grid);

enum class Label : std::uint8_t { background = 0, liver = 1, tumor = 2 };

/// Real-valued field in x-fastest order.
struct Volume3 {
  Grid grid;
  std::vector<float> values;

  Volume3() = default;
  explicit Volume3(Grid g, float fill = 0.0f);
  Volume3(Grid g, std::vector<float> v);

  const Dims& dims() const { return grid.dims; }
  float at(int x, int y, int z) const { return values[flat_index(grid.dims, x, y, z)]; }
  float& at(int x, int y, int z) { return values[flat_index(grid.dims, x, y, z)]; }
};

/// Integer mask over {background, liver, tumor} in x-fastest order.
struct LabelVolume {
  Grid grid;
  std::vector<std::uint8_t> labels;

  LabelVolume() = default;
  explicit LabelVolume(Grid g, std::uint8_t fill = 0);
  LabelVolume(Grid g, std::vector<std::uint8_t> l);

  const Dims& dims() const { return grid.dims; }
  std::uint8_t at(int x, int y, int z) const { return labels[flat_index(grid.dims, x, y, z)]; }
  std::uint8_t& at(int x, int y, int z) { return labels[flat_index(grid.dims, x, y, z)]; }
};

/// Halves every axis by averaging 2x2x2 blocks; spacing doubles. Odd axes are
/// padded by replicating the last slice first.
Volume3 downsample2(const Volume3& volume);

/// Halves every axis by 2x2x2 majority vote. Ties go to the larger label so
/// small tumors survive.
LabelVolume downsample2_labels(const LabelVolume& mask);

/// Linear map window_lo -> 0, window_hi -> 1, clamped to [0, 1].
Volume3 normalize_intensity(const Volume3& volume, double window_lo, double window_hi);

/// Root-mean-square error divided by the reference's value range.
double nrmse(const Volume3& estimate, const Volume3& reference);

}  // namespace MTSEG_ABI
}  // namespace mtseg
