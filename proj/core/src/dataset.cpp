#include "mtseg/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "io_util.hpp"
#include "mtseg/fdk.hpp"
#include "mtseg/phantom.hpp"
#include "mtseg/projector.hpp"
#include "mtseg/volume_io.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "dataset.json";

json spec_json(const DatasetSpec& spec) {
  return {{"n_cases", spec.n_cases},
          {"dims", {spec.dims.nx, spec.dims.ny, spec.dims.nz}},
          {"spacing_mm", spec.spacing_mm},
          {"seed", spec.seed},
          {"levels", spec.levels}};
}

void write_manifest(const fs::path& root, const DatasetSpec& spec, const std::vector<std::string>& ids) {
  json doc = spec_json(spec);
  doc["cases"] = ids;
  detail::write_file_atomic(root / kManifest, doc.dump(2) + "\n");
}

void write_case(const fs::path& dir, const Volume3& volume, const LabelVolume& mask, const std::vector<int>& levels,
                const std::string& provenance) {
  save_volume(volume, dir / "source", provenance);
  save_volume(mask, dir / "mask", provenance);
  for (int n_p : levels) {
    const ProjectionSet proj = simulate_projections(volume, default_geometry(volume.grid, n_p));
    save_volume(fdk_reconstruct(proj, volume.grid), dir / level_name(n_p), "fdk ram_lak n_p=" + std::to_string(n_p));
  }
}

}  // namespace

bool is_supported_level(int n_p) {
  return std::find(std::begin(kSupportedLevels), std::end(kSupportedLevels), n_p) != std::end(kSupportedLevels);
}

DatasetSpec normalize_spec(DatasetSpec spec) {
  if (spec.n_cases < 1) throw std::invalid_argument("dataset needs at least one case");
  if (spec.dims.nx < kMinPhantomDim || spec.dims.ny < kMinPhantomDim || spec.dims.nz < kMinPhantomDim) {
    throw std::invalid_argument("dataset dims must be at least " + std::to_string(kMinPhantomDim) + " per axis");
  }
  if (!(spec.spacing_mm > 0.0)) throw std::invalid_argument("dataset spacing must be positive");
  for (int n_p : spec.levels) {
    if (!is_supported_level(n_p)) throw std::invalid_argument("unsupported projection level " + std::to_string(n_p));
  }
  spec.levels.push_back(kBestLevel);
  std::sort(spec.levels.begin(), spec.levels.end(), std::greater<>());
  spec.levels.erase(std::unique(spec.levels.begin(), spec.levels.end()), spec.levels.end());
  return spec;
}

Dataset::Dataset(fs::path root, DatasetSpec spec, std::vector<std::string> case_ids)
    : root_(std::move(root)), spec_(std::move(spec)), case_ids_(std::move(case_ids)) {}

bool Dataset::has_level(int n_p) const {
  return std::find(spec_.levels.begin(), spec_.levels.end(), n_p) != spec_.levels.end();
}

Volume3 Dataset::source(const std::string& case_id) const { return load_scalar_volume(case_dir(case_id) / "source"); }

LabelVolume Dataset::mask(const std::string& case_id) const { return load_label_volume(case_dir(case_id) / "mask"); }

Volume3 Dataset::reconstruction(const std::string& case_id, int n_p) const {
  if (!has_level(n_p)) {
    throw DataError("dataset at " + root_.string() + " has no reconstructions for n_p=" + std::to_string(n_p));
  }
  return load_scalar_volume(case_dir(case_id) / level_name(n_p));
}

std::string level_name(int n_p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "np%04d", n_p);
  return buf;
}

std::string case_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "case_%03d", index);
  return buf;
}

std::uint64_t case_seed(std::uint64_t dataset_seed, int index) {
  return dataset_seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(index) + 1;
}

Dataset open_dataset(const fs::path& root) {
  const fs::path file = root / kManifest;
  if (!fs::exists(file)) throw DataError("no dataset manifest at " + file.string());
  try {
    const json doc = json::parse(detail::read_text(file));
    DatasetSpec spec;
    spec.n_cases = doc.at("n_cases").get<int>();
    const auto dims = doc.at("dims").get<std::vector<int>>();
    if (dims.size() != 3) throw DataError("dataset manifest dims must have 3 entries");
    spec.dims = {dims[0], dims[1], dims[2]};
    spec.spacing_mm = doc.at("spacing_mm").get<double>();
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.levels = doc.at("levels").get<std::vector<int>>();
    return Dataset(root, spec, doc.at("cases").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError("malformed dataset manifest " + file.string() + ": " + e.what());
  }
}

Dataset build_dataset(const DatasetSpec& requested, const fs::path& root) {
  const DatasetSpec spec = normalize_spec(requested);
  if (fs::exists(root / kManifest)) {
    Dataset existing = open_dataset(root);
    if (!(existing.spec() == spec)) {
      throw DataError("dataset at " + root.string() + " was built with a different spec: " +
                      spec_json(existing.spec()).dump() + " vs requested " + spec_json(spec).dump());
    }
    return existing;
  }
  std::vector<std::string> ids;
  for (int i = 0; i < spec.n_cases; ++i) {
    const std::uint64_t seed = case_seed(spec.seed, i);
    const Phantom ph = make_phantom(spec.dims, seed, spec.spacing_mm);
    ids.push_back(case_name(i));
    write_case(root / ids.back(), ph.volume, ph.mask, spec.levels, "phantom seed=" + std::to_string(seed));
  }
  // The manifest goes last so an interrupted build is never mistaken for a complete one.
  write_manifest(root, spec, ids);
  return Dataset(root, spec, ids);
}

void ingest_case(const fs::path& root, const std::string& case_id, const Volume3& volume, const LabelVolume& mask) {
  Dataset ds = open_dataset(root);
  if (volume.dims() != ds.spec().dims || mask.dims() != ds.spec().dims) {
    throw DataError("ingested case '" + case_id + "' does not match the dataset dims");
  }
  std::vector<std::string> ids = ds.case_ids();
  if (std::find(ids.begin(), ids.end(), case_id) != ids.end()) {
    throw DataError("case '" + case_id + "' already exists in " + root.string());
  }
  write_case(root / case_id, volume, mask, ds.spec().levels, "ingested");
  ids.push_back(case_id);
  DatasetSpec spec = ds.spec();
  spec.n_cases = static_cast<int>(ids.size());
  write_manifest(root, spec, ids);
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
