#pragma once

#include <cstdint>

#include "mtseg/volume.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// Attenuation constants of the synthetic abdomen.
inline constexpr float kBodyAttenuation = 0.2f;
inline constexpr float kLiverAttenuation = 0.45f;
inline constexpr float kTumorAttenuation = 0.7f;

/// Smallest axis length that still holds body, liver and tumors.
inline constexpr int kMinPhantomDim = 16;

struct Phantom {
  Volume3 volume;
  LabelVolume mask;
};

/// Synthetic abdomen: an ellipsoidal body holding one liver ellipsoid, which in
/// turn holds 1-3 tumor ellipsoids. Labels: liver and tumor voxels are 1,
/// tumor voxels are 2. Deterministic in (dims, seed). Voxel pitch is
/// `spacing_mm` and the grid is centered on the coordinate origin.
Phantom make_phantom(Dims dims, std::uint64_t seed, double spacing_mm = 1.0);

}  // namespace MTSEG_ABI
}  // namespace mtseg
