#pragma once

#include <vector>

#include "mtseg/tensor.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

struct LossConfig {
  double alpha = 0.8;  ///< weight of the segmentation term in loss2
  double dice_epsilon = 1e-6;
  double bce_clamp = 1e-7;
};

/// Throws std::invalid_argument unless 0 <= alpha <= 1 and dice_epsilon > 0.
void validate_loss_config(const LossConfig& config);

/// Mean binary cross-entropy over all elements; probabilities are clamped to
/// [clamp, 1 - clamp] (zero gradient outside the clamp).
Tensor bce(const Tensor& probs, const Tensor& target, double clamp = 1e-7);

/// Mean over channels of 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps),
/// sums running over batch and space.
Tensor soft_dice_loss(const Tensor& probs, const Tensor& target, double epsilon = 1e-6);

/// Mean squared difference.
Tensor l2(const Tensor& recon, const Tensor& target);

/// bce + soft Dice: the segmentation-only objective.
Tensor loss1(const Tensor& probs, const Tensor& target, const LossConfig& config = {});

/// alpha * loss1 + (1 - alpha) * l2: the joint segmentation + reconstruction objective.
Tensor loss2(const Tensor& probs, const Tensor& seg_target, const Tensor& recon, const Tensor& recon_target,
             double alpha, const LossConfig& config = {});

/// Hard Dice per channel after binarizing probs >= threshold (targets > 0.5).
/// Both sets empty gives 1, exactly one empty gives 0.
std::vector<double> dice_score(const Tensor& probs, const Tensor& target, double threshold = 0.5);

}  // namespace MTSEG_ABI
}  // namespace mtseg
