#include "mtseg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "io_util.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

int mode_rank(const std::string& m) {
  if (m == "baseline") return 0;
  if (m == "mt-c") return 1;
  if (m == "mt-b") return 2;
  return 3;
}

int scale_rank(const std::string& s) { return s == "holistic" ? 0 : s == "patched" ? 1 : 2; }
int channel_rank(const std::string& c) { return c == "liver" ? 0 : c == "tumor" ? 1 : 2; }

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

std::vector<ResultRow> result_rows(const RunResult& run) {
  std::vector<ResultRow> rows;
  for (const auto& c : run.cases) {
    rows.push_back({mode_name(run.mode), scale_name(run.scale), run.n_p, run.seed, c.case_id, "liver", c.liver});
    rows.push_back({mode_name(run.mode), scale_name(run.scale), run.n_p, run.seed, c.case_id, "tumor", c.tumor});
  }
  return rows;
}

std::string results_csv(std::span<const ResultRow> rows) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : rows) {
    out += r.mode + "," + r.scale + "," + std::to_string(r.n_p) + "," + std::to_string(r.seed) + "," + r.case_id +
           "," + r.channel + "," + format_double(r.dice) + "\n";
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw DataError("results CSV header must be '" +
                                                                         std::string(kResultsHeader) + "'");
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 7) throw DataError("results CSV line " + std::to_string(lineno) + " has " +
                                       std::to_string(f.size()) + " fields, expected 7");
    try {
      std::size_t used = 0;
      ResultRow r;
      r.mode = f[0];
      r.scale = f[1];
      r.n_p = std::stoi(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("n_p");
      r.seed = std::stoull(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("seed");
      r.case_id = f[4];
      r.channel = f[5];
      r.dice = std::stod(f[6], &used);
      if (used != f[6].size()) throw std::invalid_argument("dice");
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError("results CSV line " + std::to_string(lineno) + " has a malformed number");
    }
  }
  return rows;
}

Stats describe(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("describe: empty sample");
  std::sort(values.begin(), values.end());
  Stats s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.median = quantile_sorted(values, 0.5);
  s.q1 = quantile_sorted(values, 0.25);
  s.q3 = quantile_sorted(values, 0.75);
  s.min = values.front();
  s.max = values.back();
  return s;
}

std::vector<SummaryRow> summarize(std::span<const ResultRow> rows) {
  using Key = std::tuple<int, std::string, int, std::string, int, int, std::string>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rows) {
    groups[{mode_rank(r.mode), r.mode, scale_rank(r.scale), r.scale, -r.n_p, channel_rank(r.channel), r.channel}]
        .push_back(r.dice);
  }
  std::vector<SummaryRow> out;
  for (auto& [k, values] : groups) {
    out.push_back({std::get<1>(k), std::get<3>(k), -std::get<4>(k), std::get<6>(k), describe(std::move(values))});
  }
  return out;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& r : rows) {
    const Stats& s = r.stats;
    out += r.mode + "," + r.scale + "," + std::to_string(r.n_p) + "," + r.channel + "," + std::to_string(s.count);
    for (double v : {s.mean, s.median, s.q1, s.q3, s.min, s.max}) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::string summary_json(std::span<const SummaryRow> rows) {
  json doc = json::object();
  for (const auto& r : rows) {
    const Stats& s = r.stats;
    doc[r.mode][r.scale][std::to_string(r.n_p)][r.channel] = {{"count", s.count}, {"mean", s.mean},
                                                               {"median", s.median}, {"q1", s.q1},
                                                               {"q3", s.q3}, {"min", s.min}, {"max", s.max}};
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate_results_csv(const std::string& text) {
  std::vector<std::string> problems;
  std::vector<ResultRow> rows;
  try {
    rows = parse_results_csv(text);
  } catch (const DataError& e) {
    return {e.what()};
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "row " + std::to_string(i + 1) + ": ";
    if (mode_rank(r.mode) > 2) problems.push_back(where + "unknown mode '" + r.mode + "'");
    if (scale_rank(r.scale) > 1) problems.push_back(where + "unknown scale '" + r.scale + "'");
    if (!is_supported_level(r.n_p)) problems.push_back(where + "unsupported n_p " + std::to_string(r.n_p));
    if (r.case_id.empty()) problems.push_back(where + "empty case_id");
    if (channel_rank(r.channel) > 1) problems.push_back(where + "unknown channel '" + r.channel + "'");
    if (!(r.dice >= 0.0 && r.dice <= 1.0)) problems.push_back(where + "dice outside [0, 1]");
  }
  return problems;
}

std::vector<std::string> validate_summary_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    return {std::string("not valid JSON: ") + e.what()};
  }
  std::vector<std::string> problems;
  if (!doc.is_object() || doc.empty()) return {"summary must be a non-empty object"};
  static const char* kStats[] = {"count", "mean", "median", "q1", "q3", "min", "max"};
  for (const auto& [mode, scales] : doc.items()) {
    if (mode_rank(mode) > 2) problems.push_back("unknown mode '" + mode + "'");
    if (!scales.is_object()) {
      problems.push_back(mode + ": expected an object of scales");
      continue;
    }
    for (const auto& [scale, levels] : scales.items()) {
      if (scale_rank(scale) > 1) problems.push_back("unknown scale '" + scale + "'");
      if (!levels.is_object()) {
        problems.push_back(mode + "/" + scale + ": expected an object of levels");
        continue;
      }
      for (const auto& [level, channels] : levels.items()) {
        const std::string path = mode + "/" + scale + "/" + level;
        int n_p = 0;
        try {
          n_p = std::stoi(level);
        } catch (const std::exception&) {
        }
        if (!is_supported_level(n_p)) problems.push_back(path + ": unsupported n_p");
        if (!channels.is_object() || !channels.contains("liver") || !channels.contains("tumor")) {
          problems.push_back(path + ": needs liver and tumor entries");
          continue;
        }
        for (const auto& [channel, stats] : channels.items()) {
          const std::string where = path + "/" + channel;
          if (channel_rank(channel) > 1) problems.push_back(where + ": unknown channel");
          bool complete = stats.is_object();
          for (const char* k : kStats) complete = complete && stats.contains(k) && stats[k].is_number();
          if (!complete) {
            problems.push_back(where + ": missing or non-numeric statistics");
            continue;
          }
          if (stats["count"].get<double>() < 1) problems.push_back(where + ": count must be >= 1");
          const double lo = stats["min"].get<double>();
          const double hi = stats["max"].get<double>();
          if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) problems.push_back(where + ": min/max outside [0, 1]");
          for (const char* k : {"mean", "median", "q1", "q3"}) {
            const double v = stats[k].get<double>();
            if (!(v >= lo - 1e-12 && v <= hi + 1e-12)) problems.push_back(where + ": " + k + " outside [min, max]");
          }
          if (stats["q1"].get<double>() > stats["median"].get<double>() ||
              stats["median"].get<double>() > stats["q3"].get<double>()) {
            problems.push_back(where + ": quartiles out of order");
          }
        }
      }
    }
  }
  return problems;
}

void write_run_files(const RunResult& run, const fs::path& results_dir) {
  const fs::path base = results_dir / "runs" / run_stem(run);
  const auto rows = result_rows(run);
  detail::write_file_atomic(fs::path(base).concat(".csv"), results_csv(rows));
  const json meta{{"fingerprint", run.fingerprint},
                  {"mode", mode_name(run.mode)},
                  {"scale", scale_name(run.scale)},
                  {"n_p", run.n_p},
                  {"seed", run.seed},
                  {"wall_seconds", run.wall_seconds},
                  {"initial_train_loss", run.initial_train_loss},
                  {"final_train_loss", run.final_train_loss},
                  {"best_val_loss", run.best_val_loss},
                  {"best_epoch", run.best_epoch},
                  {"train_loss", run.train_loss},
                  {"val_loss", run.val_loss}};
  detail::write_file_atomic(fs::path(base).concat(".json"), meta.dump(2) + "\n");
}

std::vector<ResultRow> collect_results(const fs::path& results_dir) {
  const fs::path runs = results_dir / "runs";
  if (!fs::is_directory(runs)) throw DataError("no run directory at " + runs.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(runs)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ResultRow> rows;
  for (const auto& f : files) {
    auto part = parse_results_csv(detail::read_text(f));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::vector<SummaryRow> write_report(const fs::path& results_dir, const fs::path& summary_path) {
  const auto rows = collect_results(results_dir);
  if (rows.empty()) throw DataError("no results found under " + results_dir.string());
  const auto summary = summarize(rows);
  detail::write_file_atomic(results_dir / "results.csv", results_csv(rows));
  detail::write_file_atomic(summary_path, summary_json(summary));
  detail::write_file_atomic(fs::path(summary_path).replace_extension(".csv"), summary_csv(summary));
  return summary;
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
