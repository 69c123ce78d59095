#pragma once

#include <span>
#include <vector>

#include "mtseg/tensor.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates, one slot per parameter, plus the step count.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient. Parameters without a gradient are treated as having zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamConfig& config = {});

}  // namespace MTSEG_ABI
}  // namespace mtseg
