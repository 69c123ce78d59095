#pragma once

#include <vector>

#include "mtseg/projector.hpp"
#include "mtseg/volume.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

enum class RampWindow {
  ram_lak,  ///< plain band-limited ramp
  hann,     ///< ramp apodized by a Hann window (spatial [1/4, 1/2, 1/4] smoothing)
};

/// Multiplies each pixel by sad / sqrt(sad^2 + u^2 + w^2), with (u, w) the
/// pixel offset from the detector center scaled to the isocenter plane.
ProjectionSet cosine_weight(const ProjectionSet& projections);

/// Discrete band-limited ramp kernel h[-(n-1)] .. h[n-1] for sample pitch
/// `tau`: h[0] = 1/(4 tau^2), h[k] = -1/(k pi tau)^2 for odd k, 0 otherwise.
/// Element n-1 of the result is h[0].
std::vector<double> ramp_kernel(int n, double tau, RampWindow window = RampWindow::ram_lak);

/// Convolves every detector row with the ramp kernel (spatial domain, zero
/// padded). The pitch is the detector pitch at the isocenter.
ProjectionSet ramp_filter(const ProjectionSet& projections, RampWindow window = RampWindow::ram_lak);

struct FdkOptions {
  RampWindow window = RampWindow::ram_lak;
};

/// Feldkamp-Davis-Kress reconstruction onto `out_grid`: cosine weighting, row
/// ramp filtering, then voxel-driven backprojection with bilinear detector
/// interpolation and the (sad/U)^2 distance weight.
Volume3 fdk_reconstruct(const ProjectionSet& projections, const Grid& out_grid, const FdkOptions& options = {});

/// Same, on a grid of `out_dims` x `spacing_mm` centered on the isocenter.
Volume3 fdk_reconstruct(const ProjectionSet& projections, Dims out_dims, double spacing_mm,
                        const FdkOptions& options = {});

}  // namespace MTSEG_ABI
}  // namespace mtseg
