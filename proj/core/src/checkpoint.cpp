#include "mtseg/checkpoint.hpp"

#include <json.hpp>

#include "io_util.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

using nlohmann::json;

namespace {

std::filesystem::path with_ext(std::filesystem::path base, const char* ext) {
  base += ext;
  return base;
}

}  // namespace

void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::filesystem::path& base) {
  std::vector<float> flat;
  json manifest = json::array();
  for (const auto& t : tensors) {
    if (t.values.size() != t.shape.count()) throw std::invalid_argument("checkpoint tensor '" + t.name + "' size mismatch");
    manifest.push_back({{"name", t.name},
                        {"shape", {t.shape.n, t.shape.c, t.shape.x, t.shape.y, t.shape.z}},
                        {"offset", flat.size() * 4}});
    for (Real v : t.values) flat.push_back(static_cast<float>(v));
  }
  const auto bytes = detail::encode_f32le(flat.data(), flat.size());
  detail::write_file_atomic(with_ext(base, ".bin"), bytes.data(), bytes.size());
  const json doc{{"encoding", "f32le"}, {"tensors", manifest}};
  detail::write_file_atomic(with_ext(base, ".json"), doc.dump(2) + "\n");
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& base) {
  const auto manifest_file = with_ext(base, ".json");
  const auto payload = detail::decode_f32le(detail::read_file(with_ext(base, ".bin")));
  std::vector<NamedTensor> out;
  try {
    const json doc = json::parse(detail::read_text(manifest_file));
    for (const auto& entry : doc.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      const auto s = entry.at("shape").get<std::vector<int>>();
      if (s.size() != 5) throw DataError(manifest_file.string() + ": shape of '" + t.name + "' must have 5 entries");
      t.shape = {s[0], s[1], s[2], s[3], s[4]};
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      if (offset % 4 != 0 || offset / 4 + t.shape.count() > payload.size()) {
        throw DataError(manifest_file.string() + ": tensor '" + t.name + "' lies outside the payload");
      }
      const auto first = payload.begin() + static_cast<std::ptrdiff_t>(offset / 4);
      t.values.assign(first, first + static_cast<std::ptrdiff_t>(t.shape.count()));
      out.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_file.string() + ": " + e.what());
  }
  return out;
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
