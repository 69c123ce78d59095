#include "mtseg/volume_io.hpp"

#include <json.hpp>

#include "io_util.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

using nlohmann::json;

namespace {

std::filesystem::path with_ext(const std::filesystem::path& base, const char* ext) {
  std::filesystem::path p = base;
  p += ext;
  return p;
}

json meta_to_json(const VolumeMeta& meta) {
  const Grid& g = meta.grid;
  return json{{"dims", {g.dims.nx, g.dims.ny, g.dims.nz}},
              {"spacing_mm", {g.spacing.x, g.spacing.y, g.spacing.z}},
              {"origin_mm", {g.origin.x, g.origin.y, g.origin.z}},
              {"encoding", encoding_tag(meta.encoding)},
              {"provenance", meta.provenance}};
}

Vec3 vec3_from(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw DataError(std::string("sidecar key ") + key + " must be a 3-array");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

void write_meta(const std::filesystem::path& base, const VolumeMeta& meta) {
  detail::write_file_atomic(with_ext(base, ".json"), meta_to_json(meta).dump(2) + "\n");
}

void check_payload(const VolumeMeta& meta, std::size_t bytes, std::size_t elem_size,
                   const std::filesystem::path& file) {
  const std::size_t expected = meta.grid.dims.count();
  if (bytes % elem_size != 0 || bytes / elem_size != expected) {
    throw DataError(file.string() + ": payload holds " + std::to_string(bytes / elem_size) +
                    " elements but dims require " + std::to_string(expected));
  }
}

}  // namespace

const char* encoding_tag(Encoding e) { return e == Encoding::u8 ? "u8" : "f32le"; }

Encoding parse_encoding(const std::string& tag) {
  if (tag == "f32le") return Encoding::f32le;
  if (tag == "u8") return Encoding::u8;
  throw DataError("unknown encoding tag '" + tag + "'");
}

std::filesystem::path volume_base(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".vol" || ext == ".json" || ext == ".proj") {
    auto p = path;
    return p.replace_extension();
  }
  return path;
}

void save_volume(const Volume3& volume, const std::filesystem::path& path, const std::string& provenance) {
  const auto base = volume_base(path);
  const auto bytes = detail::encode_f32le(volume.values.data(), volume.values.size());
  detail::write_file_atomic(with_ext(base, ".vol"), bytes.data(), bytes.size());
  write_meta(base, {volume.grid, Encoding::f32le, provenance});
}

void save_volume(const LabelVolume& mask, const std::filesystem::path& path, const std::string& provenance) {
  const auto base = volume_base(path);
  detail::write_file_atomic(with_ext(base, ".vol"), reinterpret_cast<const char*>(mask.labels.data()),
                            mask.labels.size());
  write_meta(base, {mask.grid, Encoding::u8, provenance});
}

VolumeMeta read_volume_meta(const std::filesystem::path& path) {
  const auto file = with_ext(volume_base(path), ".json");
  json j;
  try {
    j = json::parse(detail::read_text(file));
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  }
  try {
    VolumeMeta meta;
    const auto& d = j.at("dims");
    if (!d.is_array() || d.size() != 3) throw DataError("sidecar key dims must be a 3-array");
    meta.grid.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    meta.grid.spacing = vec3_from(j, "spacing_mm");
    meta.grid.origin = vec3_from(j, "origin_mm");
    meta.encoding = parse_encoding(j.at("encoding").get<std::string>());
    meta.provenance = j.value("provenance", std::string{});
    validate_grid(meta.grid);
    return meta;
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

AnyVolume load_volume(const std::filesystem::path& path) {
  const auto base = volume_base(path);
  const VolumeMeta meta = read_volume_meta(base);
  const auto payload_file = with_ext(base, ".vol");
  const auto bytes = detail::read_file(payload_file);
  if (meta.encoding == Encoding::u8) {
    check_payload(meta, bytes.size(), 1, payload_file);
    std::vector<std::uint8_t> labels(bytes.begin(), bytes.end());
    try {
      return LabelVolume(meta.grid, std::move(labels));
    } catch (const std::invalid_argument& e) {
      throw DataError(payload_file.string() + ": " + e.what());
    }
  }
  check_payload(meta, bytes.size(), 4, payload_file);
  try {
    return Volume3(meta.grid, detail::decode_f32le(bytes));
  } catch (const std::invalid_argument& e) {
    throw DataError(payload_file.string() + ": " + e.what());
  }
}

Volume3 load_scalar_volume(const std::filesystem::path& path) {
  auto v = load_volume(path);
  if (auto* s = std::get_if<Volume3>(&v)) return std::move(*s);
  throw DataError(path.string() + ": expected a scalar (f32le) volume");
}

LabelVolume load_label_volume(const std::filesystem::path& path) {
  auto v = load_volume(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw DataError(path.string() + ": expected a label (u8) volume");
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
