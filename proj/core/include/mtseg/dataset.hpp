#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtseg/volume.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// Projection counts the harness knows about; the first entry is the
/// best-quality level used as the reconstruction target v_o.
inline constexpr int kSupportedLevels[] = {490, 256, 128, 64, 32};
inline constexpr int kBestLevel = 490;

bool is_supported_level(int n_p);

struct DatasetSpec {
  int n_cases = 20;
  Dims dims{32, 32, 32};
  double spacing_mm = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> levels{490, 32};  ///< normalized to descending order, always contains kBestLevel

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Sorts levels descending, removes duplicates and adds kBestLevel. Throws
/// std::invalid_argument on unsupported levels or bad sizes.
DatasetSpec normalize_spec(DatasetSpec spec);

/// On-disk layout:
///   <root>/dataset.json                 spec + case list
///   <root>/<case>/source.{vol,json}     phantom or ingested volume
///   <root>/<case>/mask.{vol,json}       labels
///   <root>/<case>/np0490.{vol,json}     FDK reconstruction per level
class Dataset {
 public:
  Dataset(std::filesystem::path root, DatasetSpec spec, std::vector<std::string> case_ids);

  const std::filesystem::path& root() const { return root_; }
  const DatasetSpec& spec() const { return spec_; }
  const std::vector<std::string>& case_ids() const { return case_ids_; }

  bool has_level(int n_p) const;
  std::filesystem::path case_dir(const std::string& case_id) const { return root_ / case_id; }

  Volume3 source(const std::string& case_id) const;
  LabelVolume mask(const std::string& case_id) const;
  /// Throws DataError when the level was not built or its file is missing.
  Volume3 reconstruction(const std::string& case_id, int n_p) const;

 private:
  std::filesystem::path root_;
  DatasetSpec spec_;
  std::vector<std::string> case_ids_;
};

std::string level_name(int n_p);
std::string case_name(int index);

/// Seed of the phantom for case `index`.
std::uint64_t case_seed(std::uint64_t dataset_seed, int index);

/// Writes a fully reconstructed dataset of phantoms. An existing dataset with
/// the same spec is reused as is; one with a different spec is a DataError.
Dataset build_dataset(const DatasetSpec& spec, const std::filesystem::path& root);

/// Reads dataset.json. Throws DataError if absent or malformed.
Dataset open_dataset(const std::filesystem::path& root);

/// Simulates and reconstructs every level of the dataset for an external
/// volume and appends it to the manifest. The volume must match the dataset dims.
void ingest_case(const std::filesystem::path& root, const std::string& case_id, const Volume3& volume,
                 const LabelVolume& mask);

}  // namespace MTSEG_ABI
}  // namespace mtseg
