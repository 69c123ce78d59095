#include "mtseg/fdk.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mtseg {
inline namespace MTSEG_ABI {

namespace {

void check_projection_set(const ProjectionSet& p) {
  validate_geometry(p.geometry);
  if (p.angles_rad.empty() || p.data.empty()) throw std::invalid_argument("empty projection set");
  if (p.angles_rad.size() != static_cast<std::size_t>(p.geometry.n_proj) ||
      p.data.size() != p.angles_rad.size() * p.view_size()) {
    throw std::invalid_argument("projection set size does not match its geometry");
  }
}

}  // namespace

ProjectionSet cosine_weight(const ProjectionSet& projections) {
  check_projection_set(projections);
  const auto& g = projections.geometry;
  const double tau = g.pixel_at_isocenter();
  std::vector<double> weights(projections.view_size());
  for (int row = 0; row < g.det_rows; ++row) {
    const double w = (row - 0.5 * (g.det_rows - 1)) * tau;
    for (int col = 0; col < g.det_cols; ++col) {
      const double u = (col - 0.5 * (g.det_cols - 1)) * tau;
      weights[static_cast<std::size_t>(row) * g.det_cols + col] = g.sad_mm / std::sqrt(g.sad_mm * g.sad_mm + u * u + w * w);
    }
  }
  ProjectionSet out = projections;
  const std::size_t view_size = projections.view_size();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>(out.data[i] * weights[i % view_size]);
  }
  return out;
}

std::vector<double> ramp_kernel(int n, double tau, RampWindow window) {
  if (n < 1 || !(tau > 0.0)) throw std::invalid_argument("ramp_kernel: need n >= 1 and tau > 0");
  // One extra tap on each side so the Hann smoothing sees the neighbours.
  const int half = n;
  std::vector<double> raw(static_cast<std::size_t>(2 * half + 1), 0.0);
  for (int k = -half; k <= half; ++k) {
    double h = 0.0;
    if (k == 0) {
      h = 1.0 / (4.0 * tau * tau);
    } else if (k % 2 != 0) {
      const double d = k * std::numbers::pi * tau;
      h = -1.0 / (d * d);
    }
    raw[static_cast<std::size_t>(k + half)] = h;
  }
  std::vector<double> kernel(static_cast<std::size_t>(2 * n - 1));
  for (int k = -(n - 1); k <= n - 1; ++k) {
    const std::size_t r = static_cast<std::size_t>(k + half);
    kernel[static_cast<std::size_t>(k + n - 1)] =
        window == RampWindow::hann ? 0.5 * raw[r] + 0.25 * (raw[r - 1] + raw[r + 1]) : raw[r];
  }
  return kernel;
}

ProjectionSet ramp_filter(const ProjectionSet& projections, RampWindow window) {
  check_projection_set(projections);
  const auto& g = projections.geometry;
  const int cols = g.det_cols;
  const auto kernel = ramp_kernel(cols, g.pixel_at_isocenter(), window);
  const double* h0 = kernel.data() + (cols - 1);  // h0[k] == h[k]

  ProjectionSet out = projections;
  const int n_rows = g.n_proj * g.det_rows;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n_rows; ++r) {
    const float* in = projections.data.data() + static_cast<std::size_t>(r) * cols;
    float* dst = out.data.data() + static_cast<std::size_t>(r) * cols;
    for (int k = 0; k < cols; ++k) {
      double acc = 0.0;
      for (int j = 0; j < cols; ++j) acc += h0[k - j] * in[j];
      dst[k] = static_cast<float>(acc);
    }
  }
  return out;
}

Volume3 fdk_reconstruct(const ProjectionSet& projections, const Grid& out_grid, const FdkOptions& options) {
  check_projection_set(projections);
  validate_grid(out_grid);
  const auto& g = projections.geometry;
  const ProjectionSet filtered = ramp_filter(cosine_weight(projections), options.window);

  const double tau = g.pixel_at_isocenter();
  const double sad = g.sad_mm;
  const double d_beta = g.arc_deg * std::numbers::pi / 180.0 / g.n_proj;
  // tau converts the discrete convolution to an integral; 1/2 removes the
  // double coverage of a full circular orbit.
  const double scale = 0.5 * d_beta * tau;
  const double col_center = 0.5 * (g.det_cols - 1);
  const double row_center = 0.5 * (g.det_rows - 1);
  const Dims& od = out_grid.dims;
  const std::size_t view_size = filtered.view_size();

  std::vector<double> acc(od.count(), 0.0);
  for (int view = 0; view < g.n_proj; ++view) {
    const double beta = filtered.angles_rad[static_cast<std::size_t>(view)];
    const double cb = std::cos(beta);
    const double sb = std::sin(beta);
    const float* img = filtered.data.data() + static_cast<std::size_t>(view) * view_size;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < od.nz; ++z) {
      const double rz = out_grid.origin.z + z * out_grid.spacing.z - g.isocenter_mm.z;
      for (int y = 0; y < od.ny; ++y) {
        const double ry = out_grid.origin.y + y * out_grid.spacing.y - g.isocenter_mm.y;
        double* line = acc.data() + flat_index(od, 0, y, z);
        for (int x = 0; x < od.nx; ++x) {
          const double rx = out_grid.origin.x + x * out_grid.spacing.x - g.isocenter_mm.x;
          const double big_u = sad - (rx * cb + ry * sb);
          const double mag = sad / big_u;
          const double u = mag * (-rx * sb + ry * cb);
          const double w = mag * rz;
          const double fc = u / tau + col_center;
          const double fr = w / tau + row_center;
          const int c0 = static_cast<int>(std::floor(fc));
          const int r0 = static_cast<int>(std::floor(fr));
          if (c0 < -1 || c0 >= g.det_cols || r0 < -1 || r0 >= g.det_rows) continue;
          const double ac = fc - c0;
          const double ar = fr - r0;
          auto sample = [&](int r, int c) -> double {
            if (r < 0 || r >= g.det_rows || c < 0 || c >= g.det_cols) return 0.0;
            return img[static_cast<std::size_t>(r) * g.det_cols + c];
          };
          const double value = (1.0 - ar) * ((1.0 - ac) * sample(r0, c0) + ac * sample(r0, c0 + 1)) +
                               ar * ((1.0 - ac) * sample(r0 + 1, c0) + ac * sample(r0 + 1, c0 + 1));
          line[x] += mag * mag * value;
        }
      }
    }
  }

  Volume3 out(out_grid);
  for (std::size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(scale * acc[i]);
  return out;
}

Volume3 fdk_reconstruct(const ProjectionSet& projections, Dims out_dims, double spacing_mm,
                        const FdkOptions& options) {
  Grid grid = centered_grid(out_dims, spacing_mm);
  grid.origin = grid.origin + projections.geometry.isocenter_mm;
  return fdk_reconstruct(projections, grid, options);
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
