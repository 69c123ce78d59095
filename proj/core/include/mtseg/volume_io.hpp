#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "mtseg/volume.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

enum class Encoding { f32le, u8 };

const char* encoding_tag(Encoding e);
Encoding parse_encoding(const std::string& tag);

/// Sidecar contents of a `.vol` file.
struct VolumeMeta {
  Grid grid;
  Encoding encoding = Encoding::f32le;
  std::string provenance;

  friend bool operator==(const VolumeMeta&, const VolumeMeta&) = default;
};

/// `<base>.vol` raw payload + `<base>.json` sidecar. `path` may name either file
/// or the extension-less base.
///
/// Sidecar keys: dims [3], spacing_mm [3], origin_mm [3], encoding ("f32le" |
/// "u8"), provenance. Payloads are little-endian IEEE-754 binary32 for scalar
/// fields and unsigned bytes for labels.
void save_volume(const Volume3& volume, const std::filesystem::path& path, const std::string& provenance = {});
void save_volume(const LabelVolume& mask, const std::filesystem::path& path, const std::string& provenance = {});

using AnyVolume = std::variant<Volume3, LabelVolume>;

/// Dispatches on the sidecar's encoding tag. Throws DataError on a missing
/// file, unknown tag, or payload/dims disagreement.
AnyVolume load_volume(const std::filesystem::path& path);
Volume3 load_scalar_volume(const std::filesystem::path& path);
LabelVolume load_label_volume(const std::filesystem::path& path);

VolumeMeta read_volume_meta(const std::filesystem::path& path);

/// Strips a trailing `.vol`/`.json`/`.proj` extension.
std::filesystem::path volume_base(const std::filesystem::path& path);

}  // namespace MTSEG_ABI
}  // namespace mtseg
