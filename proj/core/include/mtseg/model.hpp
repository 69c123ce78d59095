#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtseg/checkpoint.hpp"
#include "mtseg/ops.hpp"
#include "mtseg/tensor.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// Architecture of the dual-head 3D U-Net. `encoder_filters` lists the three
/// encoder levels followed by the bottleneck; the decoder mirrors the encoder.
struct UnetConfig {
  int in_channels = 1;
  std::vector<int> encoder_filters{8, 16, 32, 64};
  int seg_classes = 2;
  bool multitask = true;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument on a malformed config.
void validate_config(const UnetConfig& config);

struct Conv3dLayer {
  Tensor weight;
  Tensor bias;
};

struct BatchNormLayer {
  Tensor scale;
  Tensor shift;
  BatchNormState state;
};

/// (conv 3x3x3 -> batch norm -> relu) x 2
struct DoubleConv {
  Conv3dLayer conv1;
  BatchNormLayer bn1;
  Conv3dLayer conv2;
  BatchNormLayer bn2;
};

struct ForwardResult {
  Tensor seg;                   ///< sigmoid probabilities, (n, seg_classes, x, y, z)
  std::optional<Tensor> recon;  ///< linear reconstruction, (n, 1, x, y, z)
};

/// Three encoder double-conv blocks joined by max pooling, a double-conv
/// bottleneck, and three decoder blocks (nearest upsampling, concatenation with
/// the same-level encoder output, double conv). The last decoder output feeds a
/// 1x1x1 segmentation head and, for multi-task models, a 1x1x1 linear
/// reconstruction head.
///
/// Copies share parameter storage; use clone() for an independent model.
class MtUnet {
 public:
  explicit MtUnet(const UnetConfig& config);

  const UnetConfig& config() const { return config_; }
  bool has_recon_head() const { return recon_head_.has_value(); }

  /// Input spatial dims must be divisible by 8.
  ForwardResult forward(const Tensor& input, Mode mode);

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  /// Parameters followed by batch-norm running statistics.
  std::vector<NamedTensor> state_dict() const;
  /// Overwrites parameters and running statistics; names and shapes must match.
  void load_state_dict(const std::vector<NamedTensor>& state);

  MtUnet clone() const;
  void zero_grad();

 private:
  UnetConfig config_;
  std::array<DoubleConv, 3> encoder_;
  DoubleConv bottleneck_;
  std::array<DoubleConv, 3> decoder_;
  Conv3dLayer seg_head_;
  std::optional<Conv3dLayer> recon_head_;

  template <typename Fn>
  void visit_blocks(Fn&& fn) const;
  template <typename Fn>
  void visit_blocks(Fn&& fn);
};

/// Deterministic He-normal initialization from `config.seed`, zero biases.
MtUnet build_model(const UnetConfig& config);

}  // namespace MTSEG_ABI
}  // namespace mtseg
