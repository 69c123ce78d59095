#include "mtseg/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mtseg {
inline namespace MTSEG_ABI {

namespace {

void check_size(const Grid& grid, std::size_t n) {
  validate_grid(grid);
  if (n != grid.dims.count()) {
    throw std::invalid_argument("volume payload has " + std::to_string(n) + " elements, grid expects " +
                                std::to_string(grid.dims.count()));
  }
}

// Source index for output voxel 2*o + d, replicating the last slice on odd axes.
int source_index(int o, int d, int n) { return std::min(2 * o + d, n - 1); }

Grid half_grid(const Grid& g) {
  Grid out;
  out.dims = {(g.dims.nx + 1) / 2, (g.dims.ny + 1) / 2, (g.dims.nz + 1) / 2};
  out.spacing = 2.0 * g.spacing;
  // Center of the first output voxel sits between the first two input voxels.
  out.origin = g.origin + 0.5 * g.spacing;
  return out;
}

}  // namespace

Grid centered_grid(Dims dims, double spacing) {
  Grid g;
  g.dims = dims;
  g.spacing = {spacing, spacing, spacing};
  g.origin = {-0.5 * (dims.nx - 1) * spacing, -0.5 * (dims.ny - 1) * spacing, -0.5 * (dims.nz - 1) * spacing};
  return g;
}

void validate_grid(const Grid& grid) {
  if (grid.dims.nx <= 0 || grid.dims.ny <= 0 || grid.dims.nz <= 0) {
    throw std::invalid_argument("volume dims must be positive");
  }
  if (!(grid.spacing.x > 0.0) || !(grid.spacing.y > 0.0) || !(grid.spacing.z > 0.0)) {
    throw std::invalid_argument("voxel spacing must be positive");
  }
}

Volume3::Volume3(Grid g, float fill) : grid(g) {
  validate_grid(grid);
  values.assign(grid.dims.count(), fill);
}

Volume3::Volume3(Grid g, std::vector<float> v) : grid(g), values(std::move(v)) {
  check_size(grid, values.size());
  if (!std::all_of(values.begin(), values.end(), [](float f) { return std::isfinite(f); })) {
    throw std::invalid_argument("volume values must be finite");
  }
}

LabelVolume::LabelVolume(Grid g, std::uint8_t fill) : grid(g) {
  validate_grid(grid);
  if (fill > 2) throw std::invalid_argument("label out of range");
  labels.assign(grid.dims.count(), fill);
}

LabelVolume::LabelVolume(Grid g, std::vector<std::uint8_t> l) : grid(g), labels(std::move(l)) {
  check_size(grid, labels.size());
  if (!std::all_of(labels.begin(), labels.end(), [](std::uint8_t v) { return v <= 2; })) {
    throw std::invalid_argument("labels must be in {0,1,2}");
  }
}

Volume3 downsample2(const Volume3& volume) {
  const Dims& in = volume.dims();
  Volume3 out(half_grid(volume.grid));
  const Dims& od = out.dims();
  for (int z = 0; z < od.nz; ++z) {
    for (int y = 0; y < od.ny; ++y) {
      for (int x = 0; x < od.nx; ++x) {
        double sum = 0.0;
        for (int dz = 0; dz < 2; ++dz) {
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              sum += volume.at(source_index(x, dx, in.nx), source_index(y, dy, in.ny), source_index(z, dz, in.nz));
            }
          }
        }
        out.at(x, y, z) = static_cast<float>(sum / 8.0);
      }
    }
  }
  return out;
}

LabelVolume downsample2_labels(const LabelVolume& mask) {
  const Dims& in = mask.dims();
  LabelVolume out(half_grid(mask.grid));
  const Dims& od = out.dims();
  for (int z = 0; z < od.nz; ++z) {
    for (int y = 0; y < od.ny; ++y) {
      for (int x = 0; x < od.nx; ++x) {
        std::array<int, 3> votes{};
        for (int dz = 0; dz < 2; ++dz) {
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              ++votes[mask.at(source_index(x, dx, in.nx), source_index(y, dy, in.ny), source_index(z, dz, in.nz))];
            }
          }
        }
        // Scanning from the highest label keeps the larger label on ties.
        int best = 2;
        for (int l = 1; l >= 0; --l) {
          if (votes[l] > votes[best]) best = l;
        }
        out.at(x, y, z) = static_cast<std::uint8_t>(best);
      }
    }
  }
  return out;
}

Volume3 normalize_intensity(const Volume3& volume, double window_lo, double window_hi) {
  if (!(window_hi > window_lo)) throw std::invalid_argument("window_hi must exceed window_lo");
  Volume3 out = volume;
  const double width = window_hi - window_lo;
  for (float& v : out.values) {
    v = static_cast<float>(std::clamp((v - window_lo) / width, 0.0, 1.0));
  }
  return out;
}

double nrmse(const Volume3& estimate, const Volume3& reference) {
  if (estimate.values.size() != reference.values.size() || reference.values.empty()) {
    throw std::invalid_argument("nrmse: volumes differ in size");
  }
  const auto [lo, hi] = std::minmax_element(reference.values.begin(), reference.values.end());
  double sq = 0.0;
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    const double d = static_cast<double>(estimate.values[i]) - reference.values[i];
    sq += d * d;
  }
  const double range = static_cast<double>(*hi) - *lo;
  const double rmse = std::sqrt(sq / static_cast<double>(reference.values.size()));
  return range > 0.0 ? rmse / range : rmse;
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
