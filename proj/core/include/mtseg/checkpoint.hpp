#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mtseg/tensor.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<Real> values;
};

/// Writes `<base>.bin` (tensors back to back as little-endian float32, in list
/// order) and `<base>.json` listing name, shape and byte offset of each.
void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::filesystem::path& base);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& base);

}  // namespace MTSEG_ABI
}  // namespace mtseg
