#pragma once

#include <vector>

#include "mtseg/tensor.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

enum class Padding { same, none };
enum class Mode { train, eval };

/// Stride-1 3D cross-correlation. `weight` has shape (out_c, in_c, k, k, k)
/// with odd k, `bias` has shape (1, out_c, 1, 1, 1) or is undefined.
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, Padding padding = Padding::same);

/// 2x2x2 max pooling, stride 2. Spatial dims must be even. The first maximum
/// in scan order wins and receives the whole gradient.
Tensor maxpool3d_2(const Tensor& input);

/// Nearest-neighbour x2 upsampling.
Tensor upsample3d_2(const Tensor& input);

struct BatchNormState {
  std::vector<Real> running_mean;
  std::vector<Real> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(int channels)
      : running_mean(static_cast<std::size_t>(channels), Real(0)),
        running_var(static_cast<std::size_t>(channels), Real(1)) {}
};

/// Per-channel batch normalization over (n, x, y, z). Train mode uses batch
/// statistics and updates the running ones (unbiased variance); eval mode
/// uses the running statistics. `scale` and `shift` are (1, C, 1, 1, 1).
Tensor batchnorm3d(const Tensor& input, const Tensor& scale, const Tensor& shift, BatchNormState& state, Mode mode);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);

/// Concatenates along the channel axis, `a` first.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Elementwise sum of equally shaped tensors.
Tensor add(const Tensor& a, const Tensor& b);

/// Multiplies every element by a constant.
Tensor scale(const Tensor& a, Real factor);

}  // namespace MTSEG_ABI
}  // namespace mtseg
