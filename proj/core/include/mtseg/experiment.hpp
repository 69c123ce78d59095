#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtseg/dataset.hpp"
#include "mtseg/losses.hpp"
#include "mtseg/model.hpp"
#include "mtseg/patching.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

enum class TrainMode { baseline, mt_c, mt_b };
enum class Scale { holistic, patched };

const char* mode_name(TrainMode mode);  ///< "baseline", "mt-c", "mt-b"
const char* scale_name(Scale scale);    ///< "holistic", "patched"
TrainMode parse_mode(const std::string& name);
Scale parse_scale(const std::string& name);

/// Defaults table for a run; the JSON config uses these field names verbatim.
///
///   field            default               notes
///   mode             baseline              baseline | mt-c | mt-b
///   scale            patched               holistic | patched
///   n_p              490                   one of 490, 256, 128, 64, 32
///   alpha            0.8                   segmentation weight in loss2
///   split_ratios     [0.7, 0.2, 0.1]       train / val / test, sum to 1
///   repeats          4                     training seeds seed .. seed+repeats-1
///   epochs           40
///   learning_rate    1e-3                  Adam
///   batch_size       1 holistic, 2 patched
///   patches_per_case 1                     patched training samples per case and epoch
///   seed             0                     split seed and first training seed
///   patch            {size 16, stride 16, pad_value 0}   or an integer N for an N^3 cube
///   dataset_root     "dataset"
///   results_dir      "results"
///   n_cases          20                    phantoms built when the dataset is absent
///   dims             [32, 32, 32]
///   dataset_seed     0
///   levels           [490, 32]             reconstructions to build; 490 always added
///   encoder_filters  [8, 16, 32, 64]
///   window           [0.0, 0.8]            intensity window mapped to [0, 1]
///   threshold        0.5                   Dice binarization
struct ExperimentConfig {
  TrainMode mode = TrainMode::baseline;
  Scale scale = Scale::patched;
  int n_p = 490;
  double alpha = 0.8;
  std::array<double, 3> split_ratios{0.7, 0.2, 0.1};
  int repeats = 4;
  int epochs = 40;
  double learning_rate = 1e-3;
  int batch_size = 2;
  int patches_per_case = 1;
  std::uint64_t seed = 0;
  PatchSpec patch;
  std::filesystem::path dataset_root = "dataset";
  std::filesystem::path results_dir = "results";
  int n_cases = 20;
  Dims dims{32, 32, 32};
  std::uint64_t dataset_seed = 0;
  std::vector<int> levels{490, 32};
  std::vector<int> encoder_filters{8, 16, 32, 64};
  std::array<double, 2> window{0.0, 0.8};
  double threshold = 0.5;
};

int default_batch_size(Scale scale);

/// Throws ConfigError naming the first offending field.
void validate(const ExperimentConfig& config);

/// Parses one config object. Unknown keys, wrong types and invariant
/// violations raise ConfigError with the key. Relative paths stay relative.
ExperimentConfig parse_config(const std::string& json_text);
/// Accepts either a single object or an array of objects (a sweep).
std::vector<ExperimentConfig> parse_config_list(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& config);

DatasetSpec dataset_spec(const ExperimentConfig& config);

/// 64-bit FNV-1a of the canonical config JSON with `seed` replaced by the run seed.
std::uint64_t config_fingerprint(const ExperimentConfig& config, std::uint64_t run_seed);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ull);

struct Splits {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Deterministic shuffle by `seed`; val and test take round(n * ratio) cases
/// and train gets the rest.
Splits split_dataset(std::span<const std::string> case_ids, std::array<double, 3> ratios, std::uint64_t seed);
std::uint64_t split_fingerprint(const Splits& splits);

/// baseline -> none, mt-c -> reconstruction at n_p, mt-b -> reconstruction at 490.
std::optional<Volume3> select_recon_target(TrainMode mode, const Dataset& dataset, const std::string& case_id, int n_p);

struct CaseDice {
  std::string case_id;
  double liver = 0.0;
  double tumor = 0.0;
};

struct RunResult {
  std::string fingerprint;  ///< 16 hex digits
  TrainMode mode = TrainMode::baseline;
  Scale scale = Scale::patched;
  int n_p = 0;
  std::uint64_t seed = 0;
  std::vector<CaseDice> cases;
  double wall_seconds = 0.0;
  double initial_train_loss = 0.0;  ///< mean over the first epoch
  double final_train_loss = 0.0;    ///< mean over the last epoch
  double best_val_loss = 0.0;       ///< loss1 on the validation set
  int best_epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

/// One prepared case: normalized model input, labels and optional normalized
/// reconstruction target, at the resolution the run trains on.
struct CaseData {
  std::string id;
  Volume3 input;
  LabelVolume mask;
  std::optional<Volume3> target;
};

CaseData load_case(const ExperimentConfig& config, const Dataset& dataset, const std::string& case_id);

struct TrainedRun {
  MtUnet model;
  RunResult result;
};

using ProgressFn = std::function<void(int epoch, double train_loss, double val_loss)>;

/// Trains one seed. The returned model holds the best-validation weights.
TrainedRun train(const ExperimentConfig& config, const Dataset& dataset, const Splits& splits, std::uint64_t run_seed,
                 const ProgressFn& progress = {});

/// Maps a normalized input block to (seg_classes)-channel probabilities of the same dims.
using Predictor = std::function<ChannelVolume(const Volume3& input)>;

Predictor model_predictor(MtUnet& model);

/// Whole-volume probabilities: patched runs tile with `spec` and reaggregate,
/// holistic runs call the predictor once.
ChannelVolume segment_volume(const Predictor& predictor, const Volume3& input, Scale scale, const PatchSpec& spec);

/// Per-channel hard Dice of a probability volume against liver / tumor targets.
CaseDice case_dice(const ChannelVolume& probs, const LabelVolume& mask, double threshold);

/// Dice of every test case at the run's scale.
std::vector<CaseDice> evaluate(const Predictor& predictor, const ExperimentConfig& config, const Dataset& dataset,
                               std::span<const std::string> test_ids);

/// Builds the dataset if needed, then trains and evaluates `repeats` seeds,
/// writing each run to `<results_dir>/runs/` atomically.
std::vector<RunResult> run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// File stem of a run: `<mode>_<scale>_np<NNNN>_seed<S>`.
std::string run_stem(const RunResult& run);

}  // namespace MTSEG_ABI
}  // namespace mtseg
