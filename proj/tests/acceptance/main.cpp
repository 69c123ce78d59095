// Acceptance suite: one [PASS]/[FAIL] line per criterion.
//
//   mtseg_acceptance [--work DIR] [--config FILE] [criterion ...]
//
// With no criterion numbers every criterion runs. Exit status is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_suite.hpp"
#include "mtseg/dataset.hpp"
#include "mtseg/experiment.hpp"
#include "mtseg/fdk.hpp"
#include "mtseg/losses.hpp"
#include "mtseg/patching.hpp"
#include "mtseg/phantom.hpp"
#include "mtseg/projector.hpp"
#include "mtseg/report.hpp"

namespace fs = std::filesystem;
using namespace mtseg;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

class Stopwatch {
 public:
  double wall() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }
  double cpu() const { return cpu_seconds() - cpu_start_; }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  double cpu_start_ = cpu_seconds();
};

// Everything the end-to-end criteria share.
struct Context {
  fs::path work;
  fs::path config_path;
  std::vector<ExperimentConfig> configs;
  std::optional<Dataset> dataset;
  double dataset_cpu_seconds = 0.0;

  struct Sweep {
    std::vector<RunResult> runs;
    std::map<std::string, std::string> files;  ///< results.csv and runs/*.csv by relative path
    double cpu_seconds = 0.0;
    double wall_seconds = 0.0;
  };
  std::optional<Sweep> first_sweep;

  fs::path results_dir() const { return work / "desk_results"; }
};

void load_configs(Context& ctx) {
  if (!ctx.configs.empty()) return;
  ctx.configs = parse_config_list(read_text(ctx.config_path));
  for (auto& c : ctx.configs) {
    c.dataset_root = ctx.work / "desk_dataset";
    c.results_dir = ctx.results_dir();
  }
}

// Always built from scratch once per process so its cost is counted honestly.
const Dataset& ensure_dataset(Context& ctx) {
  load_configs(ctx);
  if (!ctx.dataset) {
    const ExperimentConfig& c = ctx.configs.front();
    fs::remove_all(c.dataset_root);
    DatasetSpec spec = dataset_spec(c);
    for (const auto& other : ctx.configs) spec.levels.push_back(other.n_p);
    const Stopwatch sw;
    ctx.dataset = build_dataset(spec, c.dataset_root);
    ctx.dataset_cpu_seconds = sw.cpu();
    std::printf("  built %zu-case dataset in %.0f s\n", ctx.dataset->case_ids().size(), sw.wall());
    std::fflush(stdout);
  }
  return *ctx.dataset;
}

std::map<std::string, std::string> result_files(const fs::path& dir) {
  std::map<std::string, std::string> files;
  files["results.csv"] = read_text(dir / "results.csv");
  for (const auto& e : fs::directory_iterator(dir / "runs")) {
    if (e.path().extension() == ".csv") files["runs/" + e.path().filename().string()] = read_text(e.path());
  }
  return files;
}

Context::Sweep run_sweep(Context& ctx) {
  ensure_dataset(ctx);
  fs::remove_all(ctx.results_dir());
  Context::Sweep sweep;
  const Stopwatch sw;
  for (const auto& c : ctx.configs) {
    for (auto& r : run_experiment(c)) {
      std::printf("  %-8s n_p=%-3d seed=%llu  loss %.4f -> %.4f  liver %.4f  (%.0f s)\n", mode_name(r.mode), r.n_p,
                  static_cast<unsigned long long>(r.seed), r.initial_train_loss, r.final_train_loss,
                  [&] {
                    double s = 0.0;
                    for (const auto& cd : r.cases) s += cd.liver;
                    return s / static_cast<double>(r.cases.size());
                  }(),
                  r.wall_seconds);
      std::fflush(stdout);
      sweep.runs.push_back(std::move(r));
    }
  }
  write_report(ctx.results_dir(), ctx.results_dir() / "summary.json");
  sweep.cpu_seconds = sw.cpu();
  sweep.wall_seconds = sw.wall();
  sweep.files = result_files(ctx.results_dir());
  return sweep;
}

// ---------------------------------------------------------------------------

// Length of the segment p0->p1 inside the axis-aligned box [lo, hi].
double slab_chord(Vec3 p0, Vec3 p1, Vec3 lo, Vec3 hi) {
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = p1[ax] - p0[ax];
    if (d == 0.0) {
      if (p0[ax] < lo[ax] || p0[ax] > hi[ax]) return 0.0;
      continue;
    }
    const double a = (lo[ax] - p0[ax]) / d;
    const double b = (hi[ax] - p0[ax]) / d;
    t0 = std::max(t0, std::min(a, b));
    t1 = std::min(t1, std::max(a, b));
  }
  const Vec3 v = p1 - p0;
  return std::max(0.0, t1 - t0) * std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
}

Verdict projector_oracle(Context&) {
  const Stopwatch sw;
  const int n = 16;
  const Volume3 cube(centered_grid({n, n, n}, 1.0 / n), 1.0f);
  const Vec3 lo{-0.5, -0.5, -0.5}, hi{0.5, 0.5, 0.5};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> inside(-0.5, 0.5);
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 p{inside(rng), inside(rng), inside(rng)};
    Vec3 d{gauss(rng), gauss(rng), gauss(rng)};
    d = (1.0 / std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z)) * d;
    // Both endpoints lie outside: the cube's diameter is sqrt(3) < 3.
    const Vec3 a = p - 3.0 * d;
    const Vec3 b = p + 3.0 * d;
    const double expected = slab_chord(a, b, lo, hi);
    worst = std::max(worst, std::abs(ray_integral(cube, a, b) - expected) / expected);
  }
  const double t = sw.wall();
  return {worst < 1e-6 && t < 5.0, fmt("100 rays, max relative error %.2e, %.2f s", worst, t)};
}

Verdict fdk_ladder(Context&) {
  const Stopwatch sw;
  const Phantom ph = make_phantom({48, 48, 48}, case_seed(0, 0));
  const std::vector<int> ladder{32, 64, 128, 256, 490};
  std::vector<double> err;
  for (int n_p : ladder) {
    const ProjectionSet p = simulate_projections(ph.volume, default_geometry(ph.volume.grid, n_p));
    err.push_back(nrmse(fdk_reconstruct(p, ph.volume.grid), ph.volume));
  }
  int inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < err.size(); ++i) {
    if (err[i] > err[i - 1]) {
      ++inversions;
      small = small && (err[i] - err[i - 1]) <= 0.02 * err[i - 1];
    }
  }
  const bool halved = err.back() < 0.5 * err.front();
  const double t = sw.cpu();
  std::string detail = "NRMSE";
  for (std::size_t i = 0; i < err.size(); ++i) detail += fmt(" %d:%.4f", ladder[i], err[i]);
  detail += fmt(", %d inversion(s), 490/32 ratio %.3f, %.0f s", inversions, err.back() / err.front(), t);
  return {inversions <= 1 && small && halved && t < 600.0, detail};
}

Verdict gradient_suite(Context&) {
  const Stopwatch sw;
  const auto outcomes = acceptance::run_gradient_suite();
  bool pass = true;
  std::string failures;
  double worst = 0.0;
  for (const auto& o : outcomes) {
    worst = std::max(worst, o.max_rel_error);
    if (!(o.max_rel_error < o.tolerance) || o.checked == 0) {
      pass = false;
      failures += fmt(" %s=%.2e (%s)", o.name.c_str(), o.max_rel_error, o.worst.c_str());
    }
  }
  const double t = sw.wall();
  return {pass && t < 120.0, fmt("%zu cases, max relative error %.2e, %.1f s", outcomes.size(), worst, t) + failures};
}

Verdict loss_identities(Context&) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution bit(0.35);
  auto tensor = [&](Shape s, auto&& draw) {
    std::vector<Real> v(s.count());
    for (auto& x : v) x = static_cast<Real>(draw());
    return Tensor(s, std::move(v));
  };
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const Shape seg{1 + i % 2, 2, 2 + i % 3, 3, 2};
    const Shape rec{seg.n, 1, seg.x, seg.y, seg.z};
    const Tensor p = tensor(seg, [&] { return u(rng); });
    const Tensor t = tensor(seg, [&] { return bit(rng) ? 1.0 : 0.0; });
    const Tensor r = tensor(rec, [&] { return 3.0 * u(rng) - 1.0; });
    const Tensor rt = tensor(rec, [&] { return u(rng); });
    const Real a1 = loss2(p, t, r, rt, 1.0).item(), b1 = loss1(p, t).item();
    const Real a0 = loss2(p, t, r, rt, 0.0).item(), b0 = l2(r, rt).item();
    mismatches += std::memcmp(&a1, &b1, sizeof(Real)) != 0;
    mismatches += std::memcmp(&a0, &b0, sizeof(Real)) != 0;
  }
  const Shape s{1, 1, 4, 1, 1};
  const Tensor truth(s, {1, 1, 0, 0});
  const double d_same = dice_score(truth, truth)[0];
  const double d_none = dice_score(Tensor::zeros(s), truth)[0];
  const double d_half = dice_score(Tensor(s, {1, 0, 1, 0}), truth)[0];
  const bool hand = d_same == 1.0 && d_none == 0.0 && d_half == 0.5;
  return {mismatches == 0 && hand, fmt("%d/200 bitwise mismatches; dice hand cases %.17g / %.17g / %.17g", mismatches,
                                       d_same, d_none, d_half)};
}

bool clamps_an_edge(Dims d, const PatchSpec& spec) {
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] > spec.size[static_cast<std::size_t>(ax)] &&
        (d[ax] - spec.size[static_cast<std::size_t>(ax)]) % spec.stride[static_cast<std::size_t>(ax)] != 0) {
      return true;
    }
  }
  return false;
}

Verdict patch_round_trip(Context&) {
  std::mt19937_64 rng(5);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<float> value(-2.0f, 2.0f);
  int specs = 0, clamped = 0, oversized = 0, failures = 0;
  while (specs < 20) {
    const Dims d{pick(1, 24), pick(1, 24), pick(1, 24)};
    PatchSpec spec;
    for (std::size_t ax = 0; ax < 3; ++ax) {
      spec.size[ax] = pick(1, d[static_cast<int>(ax)] + 3);
      spec.stride[ax] = pick(1, spec.size[ax]);
    }
    spec.pad_value = value(rng);
    const bool edge = clamps_an_edge(d, spec);
    // At least half of the specs end on a clamped patch.
    if (!edge && specs - clamped >= 10) continue;
    ++specs;
    clamped += edge;
    oversized += spec.size[0] > d.nx || spec.size[1] > d.ny || spec.size[2] > d.nz;

    Volume3 v(centered_grid(d));
    for (auto& x : v.values) x = value(rng);
    std::vector<ChannelVolume> outputs;
    std::vector<Index3> origins;
    for (const Patch& p : extract_patches(v, spec)) {
      ChannelVolume c(1, p.data.dims());
      c.values = p.data.values;
      outputs.push_back(std::move(c));
      origins.push_back(p.origin);
    }
    const ChannelVolume back = reaggregate(outputs, origins, d);
    failures += back.values.size() != v.values.size() ||
                std::memcmp(back.values.data(), v.values.data(), v.values.size() * sizeof(float)) != 0;
  }
  return {failures == 0, fmt("%d specs (%d with clamped edges, %d larger than the volume), %d not exact", specs, clamped,
                             oversized, failures)};
}

Verdict target_policy(Context& ctx) {
  const Dataset& ds = ensure_dataset(ctx);
  int differing = 0;
  ExperimentConfig c = ctx.configs.front();
  c.n_p = kBestLevel;
  for (const auto& id : ds.case_ids()) {
    const auto b = select_recon_target(TrainMode::mt_b, ds, id, kBestLevel);
    const auto m = select_recon_target(TrainMode::mt_c, ds, id, kBestLevel);
    c.mode = TrainMode::mt_b;
    const CaseData cb = load_case(c, ds, id);
    c.mode = TrainMode::mt_c;
    const CaseData cm = load_case(c, ds, id);
    const bool same = b && m && b->values.size() == m->values.size() &&
                      std::memcmp(b->values.data(), m->values.data(), b->values.size() * sizeof(float)) == 0 &&
                      cb.target && cm.target && cb.target->values == cm.target->values;
    differing += !same;
  }
  return {differing == 0, fmt("%zu cases at n_p=490, %d with differing targets", ds.case_ids().size(), differing)};
}

Verdict end_to_end(Context& ctx) {
  load_configs(ctx);
  ctx.first_sweep = run_sweep(ctx);
  const auto& sweep = *ctx.first_sweep;
  const double cpu = sweep.cpu_seconds + ctx.dataset_cpu_seconds;

  std::size_t expected_runs = 0;
  std::set<int> levels;
  std::set<std::string> modes;
  for (const auto& c : ctx.configs) {
    expected_runs += static_cast<std::size_t>(c.repeats);
    levels.insert(c.n_p);
    modes.insert(mode_name(c.mode));
  }
  double worst_ratio = 0.0;
  for (const auto& r : sweep.runs) worst_ratio = std::max(worst_ratio, r.final_train_loss / r.initial_train_loss);

  const std::string results = sweep.files.at("results.csv");
  const std::string summary = read_text(ctx.results_dir() / "summary.json");
  std::vector<std::string> problems = validate_results_csv(results);
  for (const auto& p : validate_summary_json(summary)) problems.push_back(p);
  for (const auto& [name, text] : sweep.files) {
    if (name != "results.csv" && !validate_results_csv(text).empty()) problems.push_back(name + " invalid");
  }
  const auto rows = summarize(parse_results_csv(results));
  if (rows.size() != ctx.configs.size() * 2) problems.push_back(fmt("summary has %zu rows", rows.size()));

  std::map<std::string, std::map<int, double>> liver;
  for (const auto& row : rows) {
    if (row.channel == "liver") liver[row.mode][row.n_p] = row.stats.mean;
  }
  bool trend = true;
  std::string trend_detail;
  for (const auto& [mode, by_np] : liver) {
    const double hi = by_np.count(490) ? by_np.at(490) : 0.0;
    const double lo = by_np.count(32) ? by_np.at(32) : 1.0;
    trend = trend && hi > lo;
    trend_detail += fmt(" %s %.4f/%.4f", mode.c_str(), hi, lo);
  }

  const bool complete = sweep.runs.size() == expected_runs && expected_runs == 24 && modes.size() == 3 &&
                        levels == std::set<int>{32, 490};
  const bool pass = complete && worst_ratio < 0.5 && trend && problems.empty() && cpu <= 3600.0;
  std::string detail = fmt("%zu runs, %.1f min CPU incl. dataset, worst final/initial loss %.3f; liver mean 490/32:",
                           sweep.runs.size(), cpu / 60.0, worst_ratio) +
                       trend_detail;
  if (!problems.empty()) detail += "; schema: " + problems.front();
  return {pass, detail};
}

Verdict reproducibility(Context& ctx) {
  load_configs(ctx);
  if (!ctx.first_sweep) ctx.first_sweep = run_sweep(ctx);
  const auto second = run_sweep(ctx);
  std::size_t identical = 0;
  std::string first_diff;
  for (const auto& [name, text] : ctx.first_sweep->files) {
    const auto it = second.files.find(name);
    if (it != second.files.end() && it->second == text) {
      ++identical;
    } else if (first_diff.empty()) {
      first_diff = name;
    }
  }
  const bool pass = identical == ctx.first_sweep->files.size() && second.files.size() == identical;
  std::string detail = fmt("%zu/%zu result CSVs bitwise identical (results.csv %zu bytes)", identical,
                           ctx.first_sweep->files.size(), ctx.first_sweep->files.at("results.csv").size());
  if (!first_diff.empty()) detail += ", first difference in " + first_diff;
  return {pass, detail};
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*run)(Context&);
};

const Criterion kCriteria[] = {
    {1, "projector analytic oracle", projector_oracle},
    {2, "FDK quality ladder", fdk_ladder},
    {3, "gradient suite", gradient_suite},
    {4, "loss identities", loss_identities},
    {5, "patch round-trip", patch_round_trip},
    {6, "target-policy equivalence", target_policy},
    {7, "end-to-end desk-scale run", end_to_end},
    {8, "reproducibility", reproducibility},
};

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.work = MTSEG_ACCEPTANCE_WORK;
  ctx.config_path = MTSEG_DESK_CONFIG;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      ctx.work = argv[++i];
    } else if (arg == "--config" && i + 1 < argc) {
      ctx.config_path = argv[++i];
    } else {
      try {
        selected.insert(std::stoi(arg));
      } catch (const std::exception&) {
        std::cerr << "usage: " << argv[0] << " [--work DIR] [--config FILE] [criterion ...]\n";
        return 64;
      }
    }
  }
  fs::create_directories(ctx.work);

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Verdict v;
    try {
      v = c.run(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("[%s] %d %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
