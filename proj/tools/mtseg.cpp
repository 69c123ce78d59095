// mtseg: phantom -> simulate -> reconstruct -> run -> report.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtseg/dataset.hpp"
#include "mtseg/experiment.hpp"
#include "mtseg/fdk.hpp"
#include "mtseg/phantom.hpp"
#include "mtseg/projector.hpp"
#include "mtseg/report.hpp"
#include "mtseg/volume_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

mtseg::Dims to_dims(const std::vector<int>& d) {
  if (d.size() == 1) return {d[0], d[0], d[0]};
  if (d.size() != 3) throw std::invalid_argument("--dims takes one value or three");
  return {d[0], d[1], d[2]};
}

struct PhantomArgs {
  int cases = 1;
  std::vector<int> dims{32};
  std::uint64_t seed = 0;
  double spacing = 1.0;
  fs::path out;
};

struct SimulateArgs {
  fs::path in;
  int n_proj = 0;
  std::optional<double> arc_deg, sad_mm, sdd_mm, pixel_mm;
  std::optional<int> rows, cols;
  fs::path out;
};

struct ReconstructArgs {
  fs::path in;
  std::vector<int> dims;
  double spacing = 1.0;
  bool hann = false;
  fs::path out;
};

struct RunArgs {
  fs::path config;
  bool quiet = false;
};

struct ReportArgs {
  fs::path results;
  fs::path out;
};

void cmd_phantom(const PhantomArgs& a) {
  const mtseg::Dims dims = to_dims(a.dims);
  for (int i = 0; i < a.cases; ++i) {
    const std::uint64_t seed = mtseg::case_seed(a.seed, i);
    const mtseg::Phantom ph = mtseg::make_phantom(dims, seed, a.spacing);
    const std::string stem = mtseg::case_name(i);
    const std::string prov = "phantom seed=" + std::to_string(seed);
    mtseg::save_volume(ph.volume, a.out / (stem + "_volume"), prov);
    mtseg::save_volume(ph.mask, a.out / (stem + "_mask"), prov);
  }
  std::printf("wrote %d phantom pairs to %s\n", a.cases, a.out.string().c_str());
}

void cmd_simulate(const SimulateArgs& a) {
  const mtseg::Volume3 vol = mtseg::load_scalar_volume(a.in);
  mtseg::ConeBeamGeometry g = mtseg::default_geometry(vol.grid, a.n_proj);
  if (a.arc_deg) g.arc_deg = *a.arc_deg;
  if (a.sad_mm) g.sad_mm = *a.sad_mm;
  if (a.sdd_mm) g.sdd_mm = *a.sdd_mm;
  if (a.pixel_mm) g.pixel_mm = *a.pixel_mm;
  if (a.rows) g.det_rows = *a.rows;
  if (a.cols) g.det_cols = *a.cols;
  mtseg::validate_geometry(g);
  mtseg::save_projections(mtseg::simulate_projections(vol, g), a.out);
  std::printf("wrote %d views of %dx%d to %s\n", g.n_proj, g.det_rows, g.det_cols, a.out.string().c_str());
}

void cmd_reconstruct(const ReconstructArgs& a) {
  const mtseg::ProjectionSet proj = mtseg::load_projections(a.in);
  mtseg::FdkOptions opt;
  opt.window = a.hann ? mtseg::RampWindow::hann : mtseg::RampWindow::ram_lak;
  const mtseg::Volume3 vol = mtseg::fdk_reconstruct(proj, to_dims(a.dims), a.spacing, opt);
  mtseg::save_volume(vol, a.out, "fdk " + std::string(a.hann ? "hann" : "ram_lak") + " n_p=" +
                                     std::to_string(proj.geometry.n_proj));
  std::printf("wrote %dx%dx%d volume to %s\n", vol.dims().nx, vol.dims().ny, vol.dims().nz, a.out.string().c_str());
}

std::string read_config_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw mtseg::DataError("cannot open config " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void cmd_run(const RunArgs& a) {
  const auto configs = mtseg::parse_config_list(read_config_text(a.config));
  std::set<fs::path> result_dirs;
  for (const auto& config : configs) {
    mtseg::run_experiment(config, a.quiet ? nullptr : &std::cout);
    result_dirs.insert(config.results_dir);
  }
  for (const auto& dir : result_dirs) {
    mtseg::write_report(dir, dir / "summary.json");
    std::printf("results in %s\n", dir.string().c_str());
  }
}

void cmd_report(const ReportArgs& a) {
  const auto summary = mtseg::write_report(a.results, a.out);
  std::cout << mtseg::summary_csv(summary);
}

void add_dims(CLI::App* cmd, std::vector<int>& dims, bool required) {
  auto* opt = cmd->add_option("--dims", dims, "Voxels per axis: one value (cube) or three")
                  ->expected(1, 3)
                  ->check(CLI::PositiveNumber);
  if (required) opt->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cone-beam CT simulation, reconstruction and multi-task U-Net segmentation experiments"};
  app.require_subcommand(1);

  PhantomArgs phantom;
  auto* c_phantom = app.add_subcommand("phantom", "Write synthetic liver phantoms and their label masks");
  c_phantom->add_option("--cases", phantom.cases, "Number of phantoms")->check(CLI::PositiveNumber);
  add_dims(c_phantom, phantom.dims, false);
  c_phantom->add_option("--seed", phantom.seed, "Base seed");
  c_phantom->add_option("--spacing", phantom.spacing, "Voxel spacing in mm")->check(CLI::PositiveNumber);
  c_phantom->add_option("--out", phantom.out, "Output directory")->required();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Forward-project a volume on a circular cone-beam orbit");
  c_sim->add_option("--in", sim.in, "Input volume (.vol/.json or base path)")->required();
  c_sim->add_option("--np", sim.n_proj, "Number of projections")->required()->check(CLI::PositiveNumber);
  c_sim->add_option("--arc", sim.arc_deg, "Orbit arc in degrees (default 360)");
  c_sim->add_option("--sad", sim.sad_mm, "Source-to-isocenter distance in mm (default 600)");
  c_sim->add_option("--sdd", sim.sdd_mm, "Source-to-detector distance in mm (default 1000)");
  c_sim->add_option("--rows", sim.rows, "Detector rows (default: cover the volume)");
  c_sim->add_option("--cols", sim.cols, "Detector columns (default: cover the volume)");
  c_sim->add_option("--pixel", sim.pixel_mm, "Detector pixel pitch in mm (default: half a voxel at the isocenter)");
  c_sim->add_option("--out", sim.out, "Output projection base path")->required();

  ReconstructArgs rec;
  auto* c_rec = app.add_subcommand("reconstruct", "FDK reconstruction of a projection set");
  c_rec->add_option("--in", rec.in, "Projection set (.proj/.json or base path)")->required();
  add_dims(c_rec, rec.dims, true);
  c_rec->add_option("--spacing", rec.spacing, "Voxel spacing in mm")->check(CLI::PositiveNumber);
  c_rec->add_flag("--hann", rec.hann, "Apodize the ramp filter with a Hann window");
  c_rec->add_option("--out", rec.out, "Output volume base path")->required();

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "Build the dataset if needed, train, evaluate and summarize");
  c_run->add_option("--config", run.config, "JSON config: one object or an array of objects")->required();
  c_run->add_flag("--quiet", run.quiet, "Suppress per-epoch progress");

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "Summarize per-run result files");
  c_report->add_option("--results", report.results, "Results directory holding runs/")->required();
  c_report->add_option("--out", report.out, "Summary JSON path (summary CSV is written beside it)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*c_phantom) cmd_phantom(phantom);
    if (*c_sim) cmd_simulate(sim);
    if (*c_rec) cmd_reconstruct(rec);
    if (*c_run) cmd_run(run);
    if (*c_report) cmd_report(report);
  } catch (const mtseg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}
