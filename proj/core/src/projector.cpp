#include "mtseg/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "io_util.hpp"
#include "mtseg/volume_io.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

using nlohmann::json;

void validate_geometry(const ConeBeamGeometry& g) {
  if (g.n_proj < 1) throw std::invalid_argument("geometry: n_proj must be >= 1");
  if (!(g.sad_mm > 0.0) || !(g.sdd_mm > g.sad_mm)) {
    throw std::invalid_argument("geometry: require sdd_mm > sad_mm > 0");
  }
  if (g.det_rows < 1 || g.det_cols < 1) throw std::invalid_argument("geometry: detector must have >= 1 row and col");
  if (!(g.arc_deg > 0.0) || g.arc_deg > 360.0) throw std::invalid_argument("geometry: arc_deg must be in (0, 360]");
  if (!(g.pixel_mm > 0.0)) throw std::invalid_argument("geometry: pixel_mm must be positive");
}

ConeBeamGeometry default_geometry(const Grid& grid, int n_proj) {
  validate_grid(grid);
  ConeBeamGeometry g;
  g.n_proj = n_proj;
  g.isocenter_mm = grid.center();
  const double ex = grid.dims.nx * grid.spacing.x;
  const double ey = grid.dims.ny * grid.spacing.y;
  const double ez = grid.dims.nz * grid.spacing.z;
  const double radius = 0.5 * std::sqrt(ex * ex + ey * ey + ez * ez);
  if (radius >= g.sad_mm) throw std::invalid_argument("volume does not fit inside the source orbit");
  const double voxel = std::min({grid.spacing.x, grid.spacing.y, grid.spacing.z});
  g.pixel_mm = 0.5 * voxel * g.sdd_mm / g.sad_mm;
  // Cone tangent to the sphere, projected onto the detector.
  const double half = 1.1 * g.sdd_mm * radius / std::sqrt(g.sad_mm * g.sad_mm - radius * radius);
  const int n = static_cast<int>(std::ceil(2.0 * half / g.pixel_mm));
  g.det_rows = n;
  g.det_cols = n;
  validate_geometry(g);
  return g;
}

std::vector<double> make_angles(const ConeBeamGeometry& g) {
  validate_geometry(g);
  const double step = g.arc_deg * std::numbers::pi / 180.0 / g.n_proj;
  std::vector<double> angles(static_cast<std::size_t>(g.n_proj));
  for (int i = 0; i < g.n_proj; ++i) angles[static_cast<std::size_t>(i)] = i * step;
  return angles;
}

double ray_integral(const Volume3& volume, Vec3 p0, Vec3 p1) {
  const Grid& grid = volume.grid;
  const int n[3] = {grid.dims.nx, grid.dims.ny, grid.dims.nz};
  const double s[3] = {grid.spacing.x, grid.spacing.y, grid.spacing.z};
  const double a[3] = {p0.x, p0.y, p0.z};
  const double d[3] = {p1.x - p0.x, p1.y - p0.y, p1.z - p0.z};
  double lo[3];
  for (int ax = 0; ax < 3; ++ax) lo[ax] = grid.origin[ax] - 0.5 * s[ax];

  // Clip the parametric segment [0, 1] against the volume box.
  double t_min = 0.0;
  double t_max = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double hi = lo[ax] + n[ax] * s[ax];
    if (d[ax] == 0.0) {
      if (a[ax] < lo[ax] || a[ax] > hi) return 0.0;
      continue;
    }
    double t1 = (lo[ax] - a[ax]) / d[ax];
    double t2 = (hi - a[ax]) / d[ax];
    if (t1 > t2) std::swap(t1, t2);
    t_min = std::max(t_min, t1);
    t_max = std::min(t_max, t2);
  }
  if (!(t_min < t_max)) return 0.0;

  int idx[3];
  int step[3];
  double t_next[3];
  for (int ax = 0; ax < 3; ++ax) {
    const double pos = a[ax] + t_min * d[ax];
    idx[ax] = std::clamp(static_cast<int>(std::floor((pos - lo[ax]) / s[ax])), 0, n[ax] - 1);
    if (d[ax] > 0.0) {
      step[ax] = 1;
    } else if (d[ax] < 0.0) {
      step[ax] = -1;
    } else {
      step[ax] = 0;
    }
  }
  auto boundary_t = [&](int ax) {
    if (step[ax] == 0) return std::numeric_limits<double>::infinity();
    const int face = step[ax] > 0 ? idx[ax] + 1 : idx[ax];
    return (lo[ax] + face * s[ax] - a[ax]) / d[ax];
  };
  for (int ax = 0; ax < 3; ++ax) t_next[ax] = boundary_t(ax);

  const std::size_t stride[3] = {1, static_cast<std::size_t>(n[0]),
                                 static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1])};
  const float* values = volume.values.data();
  double sum = 0.0;
  double t = t_min;
  while (t < t_max) {
    int ax = 0;
    if (t_next[1] < t_next[ax]) ax = 1;
    if (t_next[2] < t_next[ax]) ax = 2;
    const double t_end = std::min(t_next[ax], t_max);
    if (t_end > t) {
      const std::size_t flat = idx[0] * stride[0] + idx[1] * stride[1] + idx[2] * stride[2];
      sum += static_cast<double>(values[flat]) * (t_end - t);
      t = t_end;
    }
    idx[ax] += step[ax];
    if (idx[ax] < 0 || idx[ax] >= n[ax]) break;
    t_next[ax] = boundary_t(ax);
  }
  const double length = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  return sum * length;
}

Vec3 source_position(const ConeBeamGeometry& g, double angle_rad) {
  return g.isocenter_mm + Vec3{g.sad_mm * std::cos(angle_rad), g.sad_mm * std::sin(angle_rad), 0.0};
}

Vec3 pixel_position(const ConeBeamGeometry& g, double angle_rad, int row, int col) {
  const double c = std::cos(angle_rad);
  const double s = std::sin(angle_rad);
  const double u = (col - 0.5 * (g.det_cols - 1)) * g.pixel_mm;
  const double w = (row - 0.5 * (g.det_rows - 1)) * g.pixel_mm;
  const double behind = g.sdd_mm - g.sad_mm;
  return g.isocenter_mm + Vec3{-behind * c - u * s, -behind * s + u * c, w};
}

ProjectionSet simulate_projections(const Volume3& volume, const ConeBeamGeometry& g) {
  validate_geometry(g);
  if (volume.values.empty()) throw std::invalid_argument("simulate_projections: empty volume");
  ProjectionSet out;
  out.geometry = g;
  out.angles_rad = make_angles(g);
  out.data.assign(static_cast<std::size_t>(g.n_proj) * out.view_size(), 0.0f);
  const std::size_t view_size = out.view_size();

#pragma omp parallel for schedule(dynamic)
  for (int view = 0; view < g.n_proj; ++view) {
    const double angle = out.angles_rad[static_cast<std::size_t>(view)];
    const Vec3 src = source_position(g, angle);
    float* dst = out.data.data() + static_cast<std::size_t>(view) * view_size;
    for (int row = 0; row < g.det_rows; ++row) {
      for (int col = 0; col < g.det_cols; ++col) {
        dst[static_cast<std::size_t>(row) * g.det_cols + col] =
            static_cast<float>(ray_integral(volume, src, pixel_position(g, angle, row, col)));
      }
    }
  }
  return out;
}

namespace {

std::filesystem::path with_ext(const std::filesystem::path& base, const char* ext) {
  std::filesystem::path p = base;
  p += ext;
  return p;
}

}  // namespace

void save_projections(const ProjectionSet& p, const std::filesystem::path& path) {
  validate_geometry(p.geometry);
  const auto base = volume_base(path);
  const auto bytes = detail::encode_f32le(p.data.data(), p.data.size());
  detail::write_file_atomic(with_ext(base, ".proj"), bytes.data(), bytes.size());
  const auto& g = p.geometry;
  json j{{"n_proj", g.n_proj},
         {"arc_deg", g.arc_deg},
         {"sad_mm", g.sad_mm},
         {"sdd_mm", g.sdd_mm},
         {"det_rows", g.det_rows},
         {"det_cols", g.det_cols},
         {"pixel_mm", g.pixel_mm},
         {"isocenter_mm", {g.isocenter_mm.x, g.isocenter_mm.y, g.isocenter_mm.z}},
         {"angles_rad", p.angles_rad},
         {"encoding", "f32le"},
         {"layout", "view,row,col"}};
  detail::write_file_atomic(with_ext(base, ".json"), j.dump(2) + "\n");
}

ProjectionSet load_projections(const std::filesystem::path& path) {
  const auto base = volume_base(path);
  const auto sidecar = with_ext(base, ".json");
  if (!std::filesystem::exists(sidecar)) throw DataError("missing projection sidecar " + sidecar.string());
  ProjectionSet p;
  try {
    const json j = json::parse(detail::read_text(sidecar));
    auto& g = p.geometry;
    g.n_proj = j.at("n_proj").get<int>();
    g.arc_deg = j.at("arc_deg").get<double>();
    g.sad_mm = j.at("sad_mm").get<double>();
    g.sdd_mm = j.at("sdd_mm").get<double>();
    g.det_rows = j.at("det_rows").get<int>();
    g.det_cols = j.at("det_cols").get<int>();
    g.pixel_mm = j.at("pixel_mm").get<double>();
    if (j.contains("isocenter_mm")) {
      const auto& c = j.at("isocenter_mm");
      g.isocenter_mm = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    }
    p.angles_rad = j.at("angles_rad").get<std::vector<double>>();
    if (j.value("encoding", std::string("f32le")) != "f32le") throw DataError("unsupported projection encoding");
    validate_geometry(g);
  } catch (const json::exception& e) {
    throw DataError(sidecar.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(sidecar.string() + ": " + e.what());
  }
  if (p.angles_rad.size() != static_cast<std::size_t>(p.geometry.n_proj)) {
    throw DataError(sidecar.string() + ": angle count does not match n_proj");
  }
  const auto payload = with_ext(base, ".proj");
  const auto bytes = detail::read_file(payload);
  const std::size_t expected = static_cast<std::size_t>(p.geometry.n_proj) * p.view_size();
  if (bytes.size() != 4 * expected) {
    throw DataError(payload.string() + ": payload holds " + std::to_string(bytes.size() / 4) +
                    " values, geometry requires " + std::to_string(expected));
  }
  p.data = detail::decode_f32le(bytes);
  return p;
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
