#include "mtseg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "mtseg/ops.hpp"
#include "mtseg/optim.hpp"
#include "mtseg/report.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

using nlohmann::json;

const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::mt_c: return "mt-c";
    case TrainMode::mt_b: return "mt-b";
  }
  return "?";
}

const char* scale_name(Scale scale) { return scale == Scale::holistic ? "holistic" : "patched"; }

TrainMode parse_mode(const std::string& name) {
  if (name == "baseline") return TrainMode::baseline;
  if (name == "mt-c") return TrainMode::mt_c;
  if (name == "mt-b") return TrainMode::mt_b;
  throw std::invalid_argument("unknown mode '" + name + "' (expected baseline, mt-c or mt-b)");
}

Scale parse_scale(const std::string& name) {
  if (name == "holistic") return Scale::holistic;
  if (name == "patched") return Scale::patched;
  throw std::invalid_argument("unknown scale '" + name + "' (expected holistic or patched)");
}

int default_batch_size(Scale scale) { return scale == Scale::holistic ? 1 : 2; }

// ---- configuration -------------------------------------------------------

namespace {

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type: " + j.dump());
  }
}

Index3 axis_triple(const json& j, const char* key) {
  if (j.is_number_integer()) {
    const int v = j.get<int>();
    return {v, v, v};
  }
  const auto v = field<std::vector<int>>(j, key);
  require(v.size() == 3, key, "needs one integer or three");
  return {v[0], v[1], v[2]};
}

// Either {"size", "stride", "pad_value"} or a bare integer for a cube with
// stride == size.
PatchSpec parse_patch(const json& j) {
  PatchSpec spec;
  if (j.is_number_integer()) {
    const int size = j.get<int>();
    return PatchSpec::cube(size, size);
  }
  require(j.is_object(), "patch", "must be an object or an integer");
  bool stride_given = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "size") {
      spec.size = axis_triple(value, "patch.size");
    } else if (key == "stride") {
      spec.stride = axis_triple(value, "patch.stride");
      stride_given = true;
    } else if (key == "pad_value") {
      spec.pad_value = field<float>(value, "patch.pad_value");
    } else {
      throw ConfigError("patch." + key, "unknown key");
    }
  }
  if (!stride_given) spec.stride = spec.size;
  return spec;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  require(c.n_cases >= 1, "n_cases", "must be >= 1");
  for (int ax = 0; ax < 3; ++ax) {
    require(c.dims[ax] >= 16, "dims", "every axis needs at least 16 voxels");
  }
  require(is_supported_level(c.n_p), "n_p", "must be one of 490, 256, 128, 64, 32");
  for (int n_p : c.levels) require(is_supported_level(n_p), "levels", "unsupported level " + std::to_string(n_p));
  require(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha", "must lie in [0, 1]");
  for (double r : c.split_ratios) require(r >= 0.0, "split_ratios", "must be non-negative");
  require(std::abs(c.split_ratios[0] + c.split_ratios[1] + c.split_ratios[2] - 1.0) <= 1e-9, "split_ratios",
          "must sum to 1");
  require(c.repeats >= 1, "repeats", "must be >= 1");
  require(c.epochs >= 1, "epochs", "must be >= 1");
  require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "learning_rate", "must be positive");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.patches_per_case >= 1, "patches_per_case", "must be >= 1");
  try {
    validate_patch_spec(c.patch, true);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("patch", e.what());
  }
  if (c.scale == Scale::holistic) {
    for (int ax = 0; ax < 3; ++ax) {
      require(((c.dims[ax] + 1) / 2) % 8 == 0, "dims", "holistic runs need half-resolution dims divisible by 8");
    }
  }
  require(c.encoder_filters.size() == 4, "encoder_filters", "needs exactly 4 entries");
  for (int f : c.encoder_filters) require(f >= 1, "encoder_filters", "entries must be >= 1");
  require(c.window[1] > c.window[0], "window", "upper bound must exceed lower bound");
  require(c.threshold > 0.0 && c.threshold < 1.0, "threshold", "must lie in (0, 1)");
  require(!c.dataset_root.empty(), "dataset_root", "must not be empty");
  require(!c.results_dir.empty(), "results_dir", "must not be empty");
}

namespace {

ExperimentConfig parse_object(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  ExperimentConfig c;
  bool batch_given = false;
  for (const auto& [key, value] : j.items()) {
    const char* k = key.c_str();
    if (key == "mode") {
      try {
        c.mode = parse_mode(field<std::string>(value, k));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key, e.what());
      }
    } else if (key == "scale") {
      try {
        c.scale = parse_scale(field<std::string>(value, k));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key, e.what());
      }
    } else if (key == "n_p") {
      c.n_p = field<int>(value, k);
    } else if (key == "alpha") {
      c.alpha = field<double>(value, k);
    } else if (key == "split_ratios") {
      const auto v = field<std::vector<double>>(value, k);
      require(v.size() == 3, k, "needs three ratios");
      c.split_ratios = {v[0], v[1], v[2]};
    } else if (key == "repeats") {
      c.repeats = field<int>(value, k);
    } else if (key == "epochs") {
      c.epochs = field<int>(value, k);
    } else if (key == "learning_rate") {
      c.learning_rate = field<double>(value, k);
    } else if (key == "batch_size") {
      c.batch_size = field<int>(value, k);
      batch_given = true;
    } else if (key == "patches_per_case") {
      c.patches_per_case = field<int>(value, k);
    } else if (key == "seed") {
      c.seed = field<std::uint64_t>(value, k);
    } else if (key == "patch") {
      c.patch = parse_patch(value);
    } else if (key == "dataset_root") {
      c.dataset_root = field<std::string>(value, k);
    } else if (key == "results_dir") {
      c.results_dir = field<std::string>(value, k);
    } else if (key == "n_cases") {
      c.n_cases = field<int>(value, k);
    } else if (key == "dims") {
      const Index3 d = axis_triple(value, k);
      c.dims = {d[0], d[1], d[2]};
    } else if (key == "dataset_seed") {
      c.dataset_seed = field<std::uint64_t>(value, k);
    } else if (key == "levels") {
      c.levels = field<std::vector<int>>(value, k);
    } else if (key == "encoder_filters") {
      c.encoder_filters = field<std::vector<int>>(value, k);
    } else if (key == "window") {
      const auto v = field<std::vector<double>>(value, k);
      require(v.size() == 2, k, "needs [lo, hi]");
      c.window = {v[0], v[1]};
    } else if (key == "threshold") {
      c.threshold = field<double>(value, k);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  if (!batch_given) c.batch_size = default_batch_size(c.scale);
  validate(c);
  return c;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"scale", scale_name(c.scale)},
          {"n_p", c.n_p},
          {"alpha", c.alpha},
          {"split_ratios", c.split_ratios},
          {"repeats", c.repeats},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"patches_per_case", c.patches_per_case},
          {"seed", c.seed},
          {"patch", {{"size", c.patch.size}, {"stride", c.patch.stride}, {"pad_value", c.patch.pad_value}}},
          {"dataset_root", c.dataset_root.generic_string()},
          {"results_dir", c.results_dir.generic_string()},
          {"n_cases", c.n_cases},
          {"dims", {c.dims.nx, c.dims.ny, c.dims.nz}},
          {"dataset_seed", c.dataset_seed},
          {"levels", c.levels},
          {"encoder_filters", c.encoder_filters},
          {"window", c.window},
          {"threshold", c.threshold}};
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) { return parse_object(parse_json(json_text)); }

std::vector<ExperimentConfig> parse_config_list(const std::string& json_text) {
  const json j = parse_json(json_text);
  std::vector<ExperimentConfig> out;
  if (j.is_array()) {
    if (j.empty()) throw ConfigError("<root>", "config array is empty");
    for (std::size_t i = 0; i < j.size(); ++i) {
      try {
        out.push_back(parse_object(j[i]));
      } catch (const ConfigError& e) {
        throw ConfigError("[" + std::to_string(i) + "]." + e.key(), e.what());
      }
    }
  } else {
    out.push_back(parse_object(j));
  }
  return out;
}

std::string config_to_json(const ExperimentConfig& config) { return to_json(config).dump(2); }

DatasetSpec dataset_spec(const ExperimentConfig& config) {
  DatasetSpec spec;
  spec.n_cases = config.n_cases;
  spec.dims = config.dims;
  spec.seed = config.dataset_seed;
  spec.levels = config.levels;
  spec.levels.push_back(config.n_p);
  return normalize_spec(spec);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t config_fingerprint(const ExperimentConfig& config, std::uint64_t run_seed) {
  json j = to_json(config);
  j["seed"] = run_seed;
  j.erase("repeats");
  return fnv1a(j.dump());
}

// ---- splits and targets -----------------------------------------------------

Splits split_dataset(std::span<const std::string> case_ids, std::array<double, 3> ratios, std::uint64_t seed) {
  std::vector<std::string> ids(case_ids.begin(), case_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw std::invalid_argument("duplicate case ids");
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng() % i]);
  const auto n = static_cast<double>(ids.size());
  const auto n_val = static_cast<std::size_t>(std::llround(n * ratios[1]));
  const auto n_test = static_cast<std::size_t>(std::llround(n * ratios[2]));
  if (n_val + n_test > ids.size()) throw std::invalid_argument("split ratios leave no room for training cases");
  const std::size_t n_train = ids.size() - n_val - n_test;
  Splits s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
               ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return s;
}

std::uint64_t split_fingerprint(const Splits& splits) {
  std::uint64_t h = fnv1a("");
  for (const auto* part : {&splits.train, &splits.val, &splits.test}) {
    for (const auto& id : *part) h = fnv1a(id + ",", h);
    h = fnv1a("|", h);
  }
  return h;
}

std::optional<Volume3> select_recon_target(TrainMode mode, const Dataset& dataset, const std::string& case_id,
                                           int n_p) {
  switch (mode) {
    case TrainMode::baseline: return std::nullopt;
    case TrainMode::mt_c: return dataset.reconstruction(case_id, n_p);
    case TrainMode::mt_b: return dataset.reconstruction(case_id, kBestLevel);
  }
  return std::nullopt;
}

CaseData load_case(const ExperimentConfig& config, const Dataset& dataset, const std::string& case_id) {
  CaseData c;
  c.id = case_id;
  c.input = normalize_intensity(dataset.reconstruction(case_id, config.n_p), config.window[0], config.window[1]);
  c.mask = dataset.mask(case_id);
  if (auto target = select_recon_target(config.mode, dataset, case_id, config.n_p)) {
    c.target = normalize_intensity(*target, config.window[0], config.window[1]);
  }
  if (config.scale == Scale::holistic) {
    c.input = downsample2(c.input);
    c.mask = downsample2_labels(c.mask);
    if (c.target) c.target = downsample2(*c.target);
  }
  return c;
}

// ---- training ---------------------------------------------------------------

namespace {

struct Sample {
  Volume3 input;
  LabelVolume mask;
  std::optional<Volume3> target;
};

Sample patch_sample(const CaseData& c, const PatchSpec& spec, std::mt19937_64& rng, double foreground_fraction) {
  SamplingPolicy policy;
  policy.foreground_fraction = foreground_fraction;
  TrainingPatch p = sample_training_patch(c.input, c.mask, spec, rng, policy);
  Sample s{std::move(p.volume), std::move(p.mask), std::nullopt};
  if (c.target) s.target = crop(*c.target, p.origin, spec.size, spec.pad_value);
  return s;
}

Sample whole_sample(const CaseData& c) { return {c.input, c.mask, c.target}; }

struct Batch {
  Tensor input;
  Tensor seg_target;
  std::optional<Tensor> recon_target;
};

Batch make_batch(std::span<const Sample> samples) {
  std::vector<Volume3> inputs;
  std::vector<LabelVolume> masks;
  std::vector<Volume3> targets;
  for (const auto& s : samples) {
    inputs.push_back(s.input);
    masks.push_back(s.mask);
    if (s.target) targets.push_back(*s.target);
  }
  Batch b{batch_tensor(inputs), mask_tensor(masks), std::nullopt};
  if (!targets.empty()) b.recon_target = batch_tensor(targets);
  return b;
}

Tensor objective(const ExperimentConfig& config, const ForwardResult& out, const Batch& batch) {
  if (config.mode == TrainMode::baseline) return loss1(out.seg, batch.seg_target);
  return loss2(out.seg, batch.seg_target, *out.recon, *batch.recon_target, config.alpha);
}

constexpr std::uint64_t kSamplerStream = 0xA0761D6478BD642Full;
constexpr std::uint64_t kValidationStream = 0xE7037ED1A0B428DBull;

}  // namespace

TrainedRun train(const ExperimentConfig& config, const Dataset& dataset, const Splits& splits, std::uint64_t run_seed,
                 const ProgressFn& progress) {
  validate(config);
  if (splits.train.empty()) throw DataError("training split is empty");
  const auto t0 = std::chrono::steady_clock::now();

  UnetConfig ucfg;
  ucfg.encoder_filters = config.encoder_filters;
  ucfg.multitask = config.mode != TrainMode::baseline;
  ucfg.seed = run_seed;
  MtUnet model(ucfg);
  std::vector<Tensor> params = model.parameters();
  AdamState adam;

  std::vector<CaseData> train_cases;
  for (const auto& id : splits.train) train_cases.push_back(load_case(config, dataset, id));

  // Validation samples depend only on the split seed so every repeat and mode
  // is selected on the same data.
  std::vector<Sample> val_samples;
  {
    std::mt19937_64 vrng(config.seed ^ kValidationStream);
    for (const auto& id : splits.val) {
      const CaseData c = load_case(config, dataset, id);
      if (config.scale == Scale::holistic) {
        val_samples.push_back(whole_sample(c));
      } else {
        val_samples.push_back(patch_sample(c, config.patch, vrng, 1.0));
        val_samples.push_back(patch_sample(c, config.patch, vrng, 0.0));
      }
    }
  }

  std::mt19937_64 rng(run_seed ^ kSamplerStream);
  RunResult result;
  result.mode = config.mode;
  result.scale = config.scale;
  result.n_p = config.n_p;
  result.seed = run_seed;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config_fingerprint(config, run_seed)));
  result.fingerprint = hex;

  std::vector<NamedTensor> best_state;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_cases.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    std::vector<Sample> samples;
    for (std::size_t idx : order) {
      const CaseData& c = train_cases[idx];
      if (config.scale == Scale::holistic) {
        samples.push_back(whole_sample(c));
      } else {
        for (int k = 0; k < config.patches_per_case; ++k) samples.push_back(patch_sample(c, config.patch, rng, 0.5));
      }
    }

    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(samples.size(), b + static_cast<std::size_t>(config.batch_size));
      const Batch batch = make_batch(std::span<const Sample>(samples).subspan(b, e - b));
      const ForwardResult out = model.forward(batch.input, Mode::train);
      const Tensor loss = objective(config, out, batch);
      backward(loss);
      adam_step(params, adam, config.learning_rate);
      model.zero_grad();
      loss_sum += loss.item();
      ++steps;
    }
    const double train_loss = loss_sum / steps;
    result.train_loss.push_back(train_loss);

    double val_loss = train_loss;
    if (!val_samples.empty()) {
      NoGradGuard no_grad;
      double sum = 0.0;
      for (const auto& s : val_samples) {
        const Batch batch = make_batch(std::span<const Sample>(&s, 1));
        sum += loss1(model.forward(batch.input, Mode::eval).seg, batch.seg_target).item();
      }
      val_loss = sum / static_cast<double>(val_samples.size());
    }
    result.val_loss.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best_state = model.state_dict();
      result.best_epoch = epoch;
    }
    if (progress) progress(epoch, train_loss, val_loss);
  }

  model.load_state_dict(best_state);
  result.initial_train_loss = result.train_loss.front();
  result.final_train_loss = result.train_loss.back();
  result.best_val_loss = best_val;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(result)};
}

// ---- evaluation -------------------------------------------------------------

Predictor model_predictor(MtUnet& model) {
  return [&model](const Volume3& input) {
    NoGradGuard no_grad;
    return tensor_sample(model.forward(volume_tensor(input), Mode::eval).seg, 0);
  };
}

ChannelVolume segment_volume(const Predictor& predictor, const Volume3& input, Scale scale, const PatchSpec& spec) {
  if (scale == Scale::holistic) return predictor(input);
  std::vector<ChannelVolume> outputs;
  const std::vector<Index3> origins = patch_origins(input.dims(), spec);
  outputs.reserve(origins.size());
  for (const Index3& o : origins) outputs.push_back(predictor(crop(input, o, spec.size, spec.pad_value)));
  return reaggregate(outputs, origins, input.dims());
}

CaseDice case_dice(const ChannelVolume& probs, const LabelVolume& mask, double threshold) {
  if (probs.dims != mask.dims()) throw std::invalid_argument("case_dice: probability and mask dims differ");
  if (probs.channels != 2) throw std::invalid_argument("case_dice: expected liver and tumor channels");
  const auto scores = dice_score(channel_tensor(probs), mask_tensor(std::span<const LabelVolume>(&mask, 1)), threshold);
  return {{}, scores[0], scores[1]};
}

std::vector<CaseDice> evaluate(const Predictor& predictor, const ExperimentConfig& config, const Dataset& dataset,
                               std::span<const std::string> test_ids) {
  std::vector<CaseDice> out;
  for (const auto& id : test_ids) {
    const CaseData c = load_case(config, dataset, id);
    CaseDice d = case_dice(segment_volume(predictor, c.input, config.scale, config.patch), c.mask, config.threshold);
    d.case_id = id;
    out.push_back(std::move(d));
  }
  return out;
}

// ---- orchestration ----------------------------------------------------------

std::string run_stem(const RunResult& run) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_%s_np%04d_seed%llu", mode_name(run.mode), scale_name(run.scale), run.n_p,
                static_cast<unsigned long long>(run.seed));
  return buf;
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config, std::ostream* log) {
  validate(config);
  const Dataset dataset = build_dataset(dataset_spec(config), config.dataset_root);
  if (!dataset.has_level(config.n_p)) {
    throw DataError("dataset at " + config.dataset_root.string() + " lacks level n_p=" + std::to_string(config.n_p));
  }
  const Splits splits = split_dataset(dataset.case_ids(), config.split_ratios, config.seed);
  std::vector<RunResult> results;
  for (int r = 0; r < config.repeats; ++r) {
    const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(r);
    const auto t0 = std::chrono::steady_clock::now();
    const std::string tag = std::string(mode_name(config.mode)) + " " + scale_name(config.scale) +
                            " n_p=" + std::to_string(config.n_p) + " seed=" + std::to_string(run_seed);
    ProgressFn progress;
    if (log) {
      progress = [&](int epoch, double tl, double vl) {
        char line[160];
        std::snprintf(line, sizeof line, "[%s] epoch %d/%d train %.4f val %.4f\n", tag.c_str(), epoch, config.epochs,
                      tl, vl);
        *log << line << std::flush;
      };
    }
    TrainedRun run = train(config, dataset, splits, run_seed, progress);
    run.result.cases = evaluate(model_predictor(run.model), config, dataset, splits.test);
    run.result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_files(run.result, config.results_dir);
    if (log) {
      double liver = 0.0;
      for (const auto& c : run.result.cases) liver += c.liver;
      if (!run.result.cases.empty()) liver /= static_cast<double>(run.result.cases.size());
      char line[200];
      std::snprintf(line, sizeof line, "[%s] done in %.1f s, loss %.4f -> %.4f, mean liver dice %.4f\n", tag.c_str(),
                    run.result.wall_seconds, run.result.initial_train_loss, run.result.final_train_loss, liver);
      *log << line << std::flush;
    }
    results.push_back(std::move(run.result));
  }
  return results;
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
