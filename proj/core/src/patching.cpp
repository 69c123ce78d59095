#include "mtseg/patching.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mtseg {
inline namespace MTSEG_ABI {

void validate_patch_spec(const PatchSpec& spec, bool require_model_multiple) {
  for (int ax = 0; ax < 3; ++ax) {
    const int size = spec.size[static_cast<std::size_t>(ax)];
    const int stride = spec.stride[static_cast<std::size_t>(ax)];
    if (size < 1) throw std::invalid_argument("patch size must be positive");
    if (stride < 1 || stride > size) throw std::invalid_argument("patch stride must satisfy 0 < stride <= size");
    if (require_model_multiple && size % 8 != 0) {
      throw std::invalid_argument("patch size " + std::to_string(size) + " is not a multiple of 8");
    }
  }
}

ChannelVolume::ChannelVolume(int c, Dims d, float fill)
    : channels(c), dims(d), values(static_cast<std::size_t>(c) * d.count(), fill) {}

std::vector<int> patch_origins_1d(int length, int size, int stride) {
  std::vector<int> out;
  for (int o = 0;; o += stride) {
    if (o + size >= length) {
      out.push_back(std::max(0, length - size));
      break;
    }
    out.push_back(o);
  }
  return out;
}

std::vector<Index3> patch_origins(Dims dims, const PatchSpec& spec) {
  const auto ox = patch_origins_1d(dims.nx, spec.size[0], spec.stride[0]);
  const auto oy = patch_origins_1d(dims.ny, spec.size[1], spec.stride[1]);
  const auto oz = patch_origins_1d(dims.nz, spec.size[2], spec.stride[2]);
  std::vector<Index3> out;
  out.reserve(ox.size() * oy.size() * oz.size());
  for (int z : oz) {
    for (int y : oy) {
      for (int x : ox) out.push_back({x, y, z});
    }
  }
  return out;
}

Volume3 crop(const Volume3& volume, Index3 origin, Index3 size, float pad_value) {
  Grid g = volume.grid;
  g.dims = {size[0], size[1], size[2]};
  g.origin = volume.grid.voxel_center(origin[0], origin[1], origin[2]);
  Volume3 out(g, pad_value);
  const Dims& d = volume.dims();
  for (int z = 0; z < size[2]; ++z) {
    const int sz = origin[2] + z;
    if (sz < 0 || sz >= d.nz) continue;
    for (int y = 0; y < size[1]; ++y) {
      const int sy = origin[1] + y;
      if (sy < 0 || sy >= d.ny) continue;
      for (int x = 0; x < size[0]; ++x) {
        const int sx = origin[0] + x;
        if (sx < 0 || sx >= d.nx) continue;
        out.at(x, y, z) = volume.at(sx, sy, sz);
      }
    }
  }
  return out;
}

LabelVolume crop(const LabelVolume& mask, Index3 origin, Index3 size) {
  Grid g = mask.grid;
  g.dims = {size[0], size[1], size[2]};
  g.origin = mask.grid.voxel_center(origin[0], origin[1], origin[2]);
  LabelVolume out(g, 0);
  const Dims& d = mask.dims();
  for (int z = 0; z < size[2]; ++z) {
    const int sz = origin[2] + z;
    if (sz < 0 || sz >= d.nz) continue;
    for (int y = 0; y < size[1]; ++y) {
      const int sy = origin[1] + y;
      if (sy < 0 || sy >= d.ny) continue;
      for (int x = 0; x < size[0]; ++x) {
        const int sx = origin[0] + x;
        if (sx < 0 || sx >= d.nx) continue;
        out.at(x, y, z) = mask.at(sx, sy, sz);
      }
    }
  }
  return out;
}

std::vector<Patch> extract_patches(const Volume3& volume, const PatchSpec& spec) {
  validate_patch_spec(spec, false);
  std::vector<Patch> out;
  for (const Index3& o : patch_origins(volume.dims(), spec)) {
    out.push_back({o, crop(volume, o, spec.size, spec.pad_value)});
  }
  return out;
}

ChannelVolume reaggregate(std::span<const ChannelVolume> patch_outputs, std::span<const Index3> origins, Dims out_dims) {
  if (patch_outputs.size() != origins.size()) throw std::invalid_argument("reaggregate: one origin per patch required");
  if (patch_outputs.empty()) throw std::invalid_argument("reaggregate: no patches");
  const int C = patch_outputs.front().channels;
  const std::size_t V = out_dims.count();
  std::vector<double> sum(static_cast<std::size_t>(C) * V, 0.0);
  std::vector<int> hits(V, 0);
  for (std::size_t p = 0; p < patch_outputs.size(); ++p) {
    const ChannelVolume& patch = patch_outputs[p];
    if (patch.channels != C) throw std::invalid_argument("reaggregate: patches disagree on channel count");
    const Index3& o = origins[p];
    const Dims& pd = patch.dims;
    for (int z = 0; z < pd.nz; ++z) {
      const int gz = o[2] + z;
      if (gz < 0 || gz >= out_dims.nz) continue;
      for (int y = 0; y < pd.ny; ++y) {
        const int gy = o[1] + y;
        if (gy < 0 || gy >= out_dims.ny) continue;
        for (int x = 0; x < pd.nx; ++x) {
          const int gx = o[0] + x;
          if (gx < 0 || gx >= out_dims.nx) continue;
          const std::size_t g = flat_index(out_dims, gx, gy, gz);
          ++hits[g];
          for (int c = 0; c < C; ++c) sum[static_cast<std::size_t>(c) * V + g] += patch.at(c, x, y, z);
        }
      }
    }
  }
  ChannelVolume out(C, out_dims);
  for (std::size_t g = 0; g < V; ++g) {
    if (hits[g] == 0) throw std::invalid_argument("reaggregate: voxel " + std::to_string(g) + " is not covered by any patch");
    for (int c = 0; c < C; ++c) {
      const std::size_t i = static_cast<std::size_t>(c) * V + g;
      out.values[i] = static_cast<float>(sum[i] / hits[g]);
    }
  }
  return out;
}

namespace {

Index3 uniform_origin(Dims d, const PatchSpec& spec, std::mt19937_64& rng) {
  Index3 o{};
  for (int ax = 0; ax < 3; ++ax) {
    const int hi = std::max(0, d[ax] - spec.size[static_cast<std::size_t>(ax)]);
    o[static_cast<std::size_t>(ax)] = std::uniform_int_distribution<int>(0, hi)(rng);
  }
  return o;
}

bool has_foreground(const LabelVolume& mask, Index3 o, const Index3& size) {
  const Dims& d = mask.dims();
  for (int z = o[2]; z < std::min(d.nz, o[2] + size[2]); ++z) {
    for (int y = o[1]; y < std::min(d.ny, o[1] + size[1]); ++y) {
      for (int x = o[0]; x < std::min(d.nx, o[0] + size[0]); ++x) {
        if (mask.at(x, y, z) >= 1) return true;
      }
    }
  }
  return false;
}

}  // namespace

TrainingPatch sample_training_patch(const Volume3& volume, const LabelVolume& mask, const PatchSpec& spec,
                                    std::mt19937_64& rng, const SamplingPolicy& policy) {
  validate_patch_spec(spec, false);
  if (volume.dims() != mask.dims()) throw std::invalid_argument("sample_training_patch: volume and mask dims differ");
  const bool want_foreground = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < policy.foreground_fraction;
  Index3 origin = uniform_origin(volume.dims(), spec, rng);
  if (want_foreground) {
    bool found = has_foreground(mask, origin, spec.size);
    for (int attempt = 1; attempt < policy.max_tries && !found; ++attempt) {
      origin = uniform_origin(volume.dims(), spec, rng);
      found = has_foreground(mask, origin, spec.size);
    }
    if (!found) origin = uniform_origin(volume.dims(), spec, rng);
  }
  return {origin, crop(volume, origin, spec.size, spec.pad_value), crop(mask, origin, spec.size)};
}

Tensor volume_tensor(const Volume3& volume) {
  return batch_tensor(std::span<const Volume3>(&volume, 1));
}

Tensor batch_tensor(std::span<const Volume3> volumes) {
  if (volumes.empty()) throw std::invalid_argument("batch_tensor: empty batch");
  const Dims d = volumes.front().dims();
  std::vector<Real> values;
  values.reserve(volumes.size() * d.count());
  for (const auto& v : volumes) {
    if (v.dims() != d) throw std::invalid_argument("batch_tensor: volumes differ in dims");
    values.insert(values.end(), v.values.begin(), v.values.end());
  }
  return Tensor(Shape{static_cast<int>(volumes.size()), 1, d.nx, d.ny, d.nz}, std::move(values));
}

Tensor mask_tensor(std::span<const LabelVolume> masks) {
  if (masks.empty()) throw std::invalid_argument("mask_tensor: empty batch");
  const Dims d = masks.front().dims();
  const std::size_t S = d.count();
  std::vector<Real> values(masks.size() * 2 * S);
  for (std::size_t n = 0; n < masks.size(); ++n) {
    if (masks[n].dims() != d) throw std::invalid_argument("mask_tensor: masks differ in dims");
    for (std::size_t i = 0; i < S; ++i) {
      const auto l = masks[n].labels[i];
      values[(2 * n) * S + i] = l >= 1 ? Real(1) : Real(0);
      values[(2 * n + 1) * S + i] = l == 2 ? Real(1) : Real(0);
    }
  }
  return Tensor(Shape{static_cast<int>(masks.size()), 2, d.nx, d.ny, d.nz}, std::move(values));
}

ChannelVolume tensor_sample(const Tensor& t, int index) {
  const Shape s = t.shape();
  if (index < 0 || index >= s.n) throw std::invalid_argument("tensor_sample: index out of range");
  ChannelVolume out(s.c, Dims{s.x, s.y, s.z});
  const std::size_t block = static_cast<std::size_t>(s.c) * s.spatial();
  const auto src = t.values().subspan(static_cast<std::size_t>(index) * block, block);
  std::transform(src.begin(), src.end(), out.values.begin(), [](Real v) { return static_cast<float>(v); });
  return out;
}

Tensor channel_tensor(const ChannelVolume& v) {
  std::vector<Real> values(v.values.begin(), v.values.end());
  return Tensor(Shape{1, v.channels, v.dims.nx, v.dims.ny, v.dims.nz}, std::move(values));
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
