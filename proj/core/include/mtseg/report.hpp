#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mtseg/experiment.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// One line of the results CSV: `mode,scale,n_p,seed,case_id,channel,dice`.
struct ResultRow {
  std::string mode;
  std::string scale;
  int n_p = 0;
  std::uint64_t seed = 0;
  std::string case_id;
  std::string channel;  ///< "liver" | "tumor"
  double dice = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr const char* kResultsHeader = "mode,scale,n_p,seed,case_id,channel,dice";
inline constexpr const char* kSummaryHeader = "mode,scale,n_p,channel,count,mean,median,q1,q3,min,max";

/// Two rows per case, liver first.
std::vector<ResultRow> result_rows(const RunResult& run);

std::string results_csv(std::span<const ResultRow> rows);
/// Throws DataError on a bad header, field count or value.
std::vector<ResultRow> parse_results_csv(const std::string& text);

struct Stats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;  ///< linear-interpolated 25th percentile
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Throws std::invalid_argument on an empty sample.
Stats describe(std::vector<double> values);

struct SummaryRow {
  std::string mode;
  std::string scale;
  int n_p = 0;
  std::string channel;
  Stats stats;
};

/// One row per (mode, scale, n_p, channel) pooled over seeds and cases, ordered
/// by mode (baseline, mt-c, mt-b), scale, descending n_p, then liver before tumor.
std::vector<SummaryRow> summarize(std::span<const ResultRow> rows);

std::string summary_csv(std::span<const SummaryRow> rows);
/// Nested object mode -> scale -> n_p -> channel -> statistics.
std::string summary_json(std::span<const SummaryRow> rows);

/// Schema checks; each returns a list of problems, empty when valid.
std::vector<std::string> validate_results_csv(const std::string& text);
std::vector<std::string> validate_summary_json(const std::string& text);

/// `<results_dir>/runs/<stem>.csv` with the run's rows and `<stem>.json` with
/// losses and timing.
void write_run_files(const RunResult& run, const std::filesystem::path& results_dir);

/// Rows of every run file under `<results_dir>/runs`, in file name order.
std::vector<ResultRow> collect_results(const std::filesystem::path& results_dir);

/// Merges the runs under `results_dir` into `<results_dir>/results.csv` and
/// writes the summary JSON to `summary_path` plus the summary CSV beside it
/// (same stem, `.csv`). Throws DataError when no runs are found.
std::vector<SummaryRow> write_report(const std::filesystem::path& results_dir, const std::filesystem::path& summary_path);

}  // namespace MTSEG_ABI
}  // namespace mtseg
