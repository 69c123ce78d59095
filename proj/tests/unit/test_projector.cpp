#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "mtseg/phantom.hpp"
#include "mtseg/projector.hpp"
#include "temp_dir.hpp"

using namespace mtseg;
using mtseg_test::TempDir;

namespace {

// Chord of the segment p0->p1 through the axis-aligned box [lo, hi].
double box_chord(Vec3 p0, Vec3 p1, Vec3 lo, Vec3 hi) {
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = p1[ax] - p0[ax];
    if (std::abs(d) < 1e-300) {
      if (p0[ax] < lo[ax] || p0[ax] > hi[ax]) return 0.0;
      continue;
    }
    double a = (lo[ax] - p0[ax]) / d;
    double b = (hi[ax] - p0[ax]) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t1 <= t0) return 0.0;
  const Vec3 dd = p1 - p0;
  return (t1 - t0) * std::sqrt(dd.x * dd.x + dd.y * dd.y + dd.z * dd.z);
}

Volume3 ones(Dims d, double spacing) { return Volume3(centered_grid(d, spacing), 1.0f); }

Volume3 sphere(Dims d, double radius_vox, float value) {
  Volume3 v(centered_grid(d));
  const Vec3 c = v.grid.center();
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const Vec3 p = v.grid.voxel_center(x, y, z) - c;
        if (p.x * p.x + p.y * p.y + p.z * p.z <= radius_vox * radius_vox) v.at(x, y, z) = value;
      }
    }
  }
  return v;
}

}  // namespace

TEST(Geometry, ValidationRejectsBrokenInvariants) {
  ConeBeamGeometry g;
  EXPECT_NO_THROW(validate_geometry(g));
  g.sdd_mm = g.sad_mm;
  EXPECT_THROW(validate_geometry(g), std::invalid_argument);
  g = {};
  g.n_proj = 0;
  EXPECT_THROW(validate_geometry(g), std::invalid_argument);
  g = {};
  g.arc_deg = 361.0;
  EXPECT_THROW(validate_geometry(g), std::invalid_argument);
  g = {};
  g.det_cols = 0;
  EXPECT_THROW(validate_geometry(g), std::invalid_argument);
}

TEST(Geometry, DefaultDetectorCoversCircumscribedSphere) {
  const Grid grid = centered_grid({32, 32, 32});
  const ConeBeamGeometry g = default_geometry(grid, 32);
  const double radius = 0.5 * std::sqrt(3.0) * 32.0;
  // Tangent cone half-width on the detector plane.
  const double needed = g.sdd_mm * radius / std::sqrt(g.sad_mm * g.sad_mm - radius * radius);
  EXPECT_GE(0.5 * g.det_cols * g.pixel_mm, 1.1 * needed - g.pixel_mm);
  EXPECT_GE(0.5 * g.det_rows * g.pixel_mm, 1.1 * needed - g.pixel_mm);
  EXPECT_NEAR(g.pixel_at_isocenter(), 0.5, 1e-12);
  EXPECT_EQ(g.arc_deg, 360.0);
  EXPECT_EQ(g.sad_mm, 600.0);
  EXPECT_EQ(g.sdd_mm, 1000.0);
}

TEST(Angles, UniformHalfOpen) {
  ConeBeamGeometry g;
  g.n_proj = 4;
  const auto a = make_angles(g);
  ASSERT_EQ(a.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a[static_cast<std::size_t>(i)], i * std::numbers::pi / 2.0, 1e-15);
  g.n_proj = 1;
  EXPECT_EQ(make_angles(g), std::vector<double>{0.0});
  g.n_proj = 490;
  const auto b = make_angles(g);
  for (std::size_t i = 1; i < b.size(); ++i) EXPECT_NEAR(b[i] - b[i - 1], 2.0 * std::numbers::pi / 490.0, 1e-12);
}

TEST(RayIntegral, ZeroVolumeGivesZero) {
  const Volume3 v(centered_grid({8, 8, 8}));
  EXPECT_EQ(ray_integral(v, {-20, 1, 2}, {20, -3, 0.5}), 0.0);
}

TEST(RayIntegral, AxisAlignedCentralRayMatchesSide) {
  const double L = 12.0;
  const Volume3 v = ones({12, 12, 12}, 1.0);
  EXPECT_NEAR(ray_integral(v, {-30, 0.1, -0.2}, {30, 0.1, -0.2}), L, 1e-9 * L);
  EXPECT_NEAR(ray_integral(v, {0.3, 0.2, -30}, {0.3, 0.2, 30}), L, 1e-9 * L);
}

TEST(RayIntegral, CornerToCornerDiagonalOfUnitCube) {
  const Volume3 v = ones({10, 10, 10}, 0.1);
  EXPECT_NEAR(ray_integral(v, {-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}), std::sqrt(3.0), 1e-9);
}

TEST(RayIntegral, MissReturnsZero) {
  const Volume3 v = ones({4, 4, 4}, 1.0);
  EXPECT_EQ(ray_integral(v, {-10, 5, 0}, {10, 5, 0}), 0.0);
  EXPECT_EQ(ray_integral(v, {-10, 0, 0}, {-5, 0, 0}), 0.0);
}

TEST(RayIntegral, SegmentEndingInsideCountsPartialChord) {
  const Volume3 v = ones({4, 4, 4}, 1.0);
  EXPECT_NEAR(ray_integral(v, {-10, 0.3, 0.1}, {0.5, 0.3, 0.1}), 2.5, 1e-12);
}

TEST(RayIntegral, RandomChordsMatchBoxOracle) {
  const Volume3 v = ones({7, 5, 9}, 1.3);
  const Vec3 lo = v.grid.origin - 0.5 * v.grid.spacing;
  const Vec3 hi = lo + Vec3{7 * 1.3, 5 * 1.3, 9 * 1.3};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p0{u(rng), u(rng), u(rng)};
    const Vec3 p1{u(rng), u(rng), u(rng)};
    const double expected = box_chord(p0, p1, lo, hi);
    EXPECT_NEAR(ray_integral(v, p0, p1), expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(RayIntegral, ReversalSymmetry) {
  const Phantom ph = make_phantom({20, 20, 20}, 5);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-25.0, 25.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p0{u(rng), u(rng), u(rng)};
    const Vec3 p1{u(rng), u(rng), u(rng)};
    const double a = ray_integral(ph.volume, p0, p1);
    const double b = ray_integral(ph.volume, p1, p0);
    EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(a)));
  }
}

TEST(RayIntegral, SingleVoxelPiecewiseExact) {
  Volume3 v(centered_grid({3, 3, 3}));
  v.at(1, 1, 1) = 2.0f;
  v.at(2, 1, 1) = 5.0f;
  // Along x through the middle row: voxel 1 contributes 2*1, voxel 2 contributes 5*1.
  EXPECT_NEAR(ray_integral(v, {-5, 0, 0}, {5, 0, 0}), 7.0, 1e-12);
}

TEST(Simulate, ZeroVolumeGivesZeroProjections) {
  const Volume3 v(centered_grid({16, 16, 16}));
  const ProjectionSet p = simulate_projections(v, default_geometry(v.grid, 4));
  ASSERT_EQ(p.data.size(), 4 * p.view_size());
  for (float x : p.data) EXPECT_EQ(x, 0.0f);
}

TEST(Simulate, DoublingVolumeDoublesProjections) {
  const Phantom ph = make_phantom({16, 16, 16}, 2);
  Volume3 twice = ph.volume;
  for (auto& x : twice.values) x *= 2.0f;
  const ConeBeamGeometry g = default_geometry(ph.volume.grid, 6);
  const ProjectionSet a = simulate_projections(ph.volume, g);
  const ProjectionSet b = simulate_projections(twice, g);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_EQ(b.data[i], 2.0f * a.data[i]);
}

TEST(Simulate, LinearInVolume) {
  const Phantom p1 = make_phantom({16, 16, 16}, 3);
  const Phantom p2 = make_phantom({16, 16, 16}, 4);
  Volume3 mix = p1.volume;
  for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = 0.5f * p1.volume.values[i] + 1.5f * p2.volume.values[i];
  const ConeBeamGeometry g = default_geometry(mix.grid, 5);
  const auto a = simulate_projections(p1.volume, g);
  const auto b = simulate_projections(p2.volume, g);
  const auto c = simulate_projections(mix, g);
  for (std::size_t i = 0; i < c.data.size(); ++i) {
    const double expected = 0.5 * a.data[i] + 1.5 * b.data[i];
    EXPECT_NEAR(c.data[i], expected, 1e-5 * std::max(1.0, std::abs(expected)));
  }
}

TEST(Simulate, NonNegativeForNonNegativeVolume) {
  const Phantom ph = make_phantom({16, 16, 16}, 9);
  const auto p = simulate_projections(ph.volume, default_geometry(ph.volume.grid, 8));
  for (float x : p.data) EXPECT_GE(x, 0.0f);
}

TEST(Simulate, OpposedViewsOfCenteredSphereAreMirrorImages) {
  const Volume3 v = sphere({20, 20, 20}, 6.0, 1.0f);
  const ConeBeamGeometry g = default_geometry(v.grid, 2);  // views at 0 and 180 degrees
  const ProjectionSet p = simulate_projections(v, g);
  for (int r = 0; r < g.det_rows; ++r) {
    for (int c = 0; c < g.det_cols; ++c) {
      EXPECT_NEAR(p.at(0, r, c), p.at(1, r, g.det_cols - 1 - c), 1e-5);
    }
  }
}

TEST(Simulate, SourceAndPixelAreOnOppositeSidesOfIsocenter) {
  ConeBeamGeometry g;
  g.det_rows = 3;
  g.det_cols = 3;
  const Vec3 s = source_position(g, 0.3);
  const Vec3 p = pixel_position(g, 0.3, 1, 1);
  const Vec3 d = p - s;
  EXPECT_NEAR(std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z), g.sdd_mm, 1e-9);
  EXPECT_NEAR(std::sqrt(s.x * s.x + s.y * s.y), g.sad_mm, 1e-9);
}

TEST(ProjectionIo, RoundTripAndSidecarAngles) {
  TempDir dir;
  const Phantom ph = make_phantom({16, 16, 16}, 1);
  const ProjectionSet p = simulate_projections(ph.volume, default_geometry(ph.volume.grid, 32));
  save_projections(p, dir / "p");
  const auto j = nlohmann::json::parse(std::ifstream(dir / "p.json"));
  EXPECT_EQ(j.at("angles_rad").size(), 32u);
  const ProjectionSet q = load_projections(dir / "p.proj");
  EXPECT_EQ(q.geometry, p.geometry);
  EXPECT_EQ(q.angles_rad, p.angles_rad);
  EXPECT_EQ(q.data, p.data);
}

TEST(ProjectionIo, MissingSidecarIsDataError) {
  TempDir dir;
  std::ofstream(dir / "lonely.proj") << "abcd";
  EXPECT_THROW(load_projections(dir / "lonely"), DataError);
}
