#pragma once

#include <random>
#include <span>
#include <vector>

#include "mtseg/tensor.hpp"
#include "mtseg/volume.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// Patch geometry for extraction and training. Size must be a multiple of 8 to
/// pass through the U-Net; 0 < stride <= size.
struct PatchSpec {
  Index3 size{16, 16, 16};
  Index3 stride{16, 16, 16};
  float pad_value = 0.0f;

  static PatchSpec cube(int size, int stride, float pad_value = 0.0f) {
    return {{size, size, size}, {stride, stride, stride}, pad_value};
  }
};

/// Throws std::invalid_argument when the spec breaks its invariants.
/// `require_model_multiple` additionally demands size % 8 == 0.
void validate_patch_spec(const PatchSpec& spec, bool require_model_multiple = true);

/// Multi-channel block of voxels in (channel, z, y, x) order, x fastest.
struct ChannelVolume {
  int channels = 1;
  Dims dims;
  std::vector<float> values;

  ChannelVolume() = default;
  ChannelVolume(int c, Dims d, float fill = 0.0f);
  float at(int c, int x, int y, int z) const {
    return values[static_cast<std::size_t>(c) * dims.count() + flat_index(dims, x, y, z)];
  }
};

struct Patch {
  Index3 origin{};
  Volume3 data;
};

/// Per-axis patch origins: 0, stride, 2*stride, ... with the last origin
/// clamped so the final patch ends at the volume edge (0 for axes shorter
/// than the patch).
std::vector<int> patch_origins_1d(int length, int size, int stride);
std::vector<Index3> patch_origins(Dims dims, const PatchSpec& spec);

/// Copies a `size` block starting at `origin`, padding with `pad_value` outside
/// the volume. The patch keeps the volume's spacing.
Volume3 crop(const Volume3& volume, Index3 origin, Index3 size, float pad_value);
LabelVolume crop(const LabelVolume& mask, Index3 origin, Index3 size);

/// All patches of the origin grid, x-fastest origin order.
std::vector<Patch> extract_patches(const Volume3& volume, const PatchSpec& spec);

/// Per-voxel mean of all patch outputs covering it; parts of patches outside
/// `out_dims` are dropped. Throws std::invalid_argument if a voxel is left
/// uncovered or a patch has the wrong channel count.
ChannelVolume reaggregate(std::span<const ChannelVolume> patch_outputs, std::span<const Index3> origins, Dims out_dims);

struct SamplingPolicy {
  double foreground_fraction = 0.5;
  int max_tries = 100;
};

struct TrainingPatch {
  Index3 origin{};
  Volume3 volume;
  LabelVolume mask;
};

/// Random training patch. With probability `foreground_fraction` the origin is
/// rejection-sampled until the patch holds a foreground (label >= 1) voxel,
/// falling back to a uniform origin after `max_tries`; otherwise uniform.
TrainingPatch sample_training_patch(const Volume3& volume, const LabelVolume& mask, const PatchSpec& spec,
                                    std::mt19937_64& rng, const SamplingPolicy& policy = {});

/// (1, 1, x, y, z) tensor of a volume.
Tensor volume_tensor(const Volume3& volume);
/// Stacks equally sized volumes into (n, 1, x, y, z).
Tensor batch_tensor(std::span<const Volume3> volumes);
/// Stacks masks into (n, 2, x, y, z) binary targets: channel 0 liver (label
/// >= 1), channel 1 tumor (label == 2).
Tensor mask_tensor(std::span<const LabelVolume> masks);

/// Sample `index` of a (n, c, x, y, z) tensor as a channel volume.
ChannelVolume tensor_sample(const Tensor& t, int index);
/// (1, c, x, y, z) tensor from a channel volume.
Tensor channel_tensor(const ChannelVolume& v);

}  // namespace MTSEG_ABI
}  // namespace mtseg
