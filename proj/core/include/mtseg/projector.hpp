#pragma once

#include <filesystem>
#include <vector>

#include "mtseg/volume.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// Circular cone-beam trajectory with a flat detector.
///
/// The source orbits the isocenter in the z = isocenter.z plane at radius
/// `sad_mm`; at view angle theta it sits at isocenter + sad*(cos, sin, 0). The
/// detector plane is perpendicular to the central ray, `sdd_mm - sad_mm` beyond
/// the isocenter, with columns along (-sin, cos, 0) and rows along +z.
struct ConeBeamGeometry {
  int n_proj = 1;
  double arc_deg = 360.0;
  double sad_mm = 600.0;
  double sdd_mm = 1000.0;
  int det_rows = 1;
  int det_cols = 1;
  double pixel_mm = 1.0;
  Vec3 isocenter_mm;

  /// Detector pitch projected back onto the isocenter plane.
  double pixel_at_isocenter() const { return pixel_mm * sad_mm / sdd_mm; }
  friend bool operator==(const ConeBeamGeometry&, const ConeBeamGeometry&) = default;
};

/// Throws std::invalid_argument when sdd > sad > 0, n_proj >= 1, detector
/// sizes >= 1 or arc in (0, 360] is violated.
void validate_geometry(const ConeBeamGeometry& g);

/// Full 360 degree scan at sad 600 / sdd 1000 mm with a detector that covers the
/// grid's circumscribed sphere plus a 10% margin. Pixel pitch maps to half a
/// voxel at the isocenter, which sits at the grid center.
ConeBeamGeometry default_geometry(const Grid& grid, int n_proj);

/// Line integrals data[view][row][col] (value * mm).
struct ProjectionSet {
  ConeBeamGeometry geometry;
  std::vector<double> angles_rad;
  std::vector<float> data;

  std::size_t view_size() const {
    return static_cast<std::size_t>(geometry.det_rows) * static_cast<std::size_t>(geometry.det_cols);
  }
  float at(int view, int row, int col) const {
    return data[static_cast<std::size_t>(view) * view_size() +
                static_cast<std::size_t>(row) * static_cast<std::size_t>(geometry.det_cols) +
                static_cast<std::size_t>(col)];
  }
};

/// n_proj angles evenly spaced over the arc, starting at 0, half-open.
std::vector<double> make_angles(const ConeBeamGeometry& g);

/// Exact integral of the piecewise-constant volume along the segment p0 -> p1,
/// by parametric voxel traversal. Rays that miss the volume give 0.
double ray_integral(const Volume3& volume, Vec3 p0, Vec3 p1);

/// Ray integral from the source to every detector pixel center, per view.
ProjectionSet simulate_projections(const Volume3& volume, const ConeBeamGeometry& g);

/// Source position and detector pixel center for a view, in world mm.
Vec3 source_position(const ConeBeamGeometry& g, double angle_rad);
Vec3 pixel_position(const ConeBeamGeometry& g, double angle_rad, int row, int col);

/// `<base>.proj` raw little-endian float32 data[view][row][col] plus a
/// `<base>.json` sidecar holding the geometry and the angle list.
void save_projections(const ProjectionSet& p, const std::filesystem::path& path);
ProjectionSet load_projections(const std::filesystem::path& path);

}  // namespace MTSEG_ABI
}  // namespace mtseg
