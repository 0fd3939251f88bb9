#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsr/config.hpp"
#include "dsr/trainer.hpp"
#include "json.hpp"

namespace dsr {

struct RunOutputs {
  std::filesystem::path dir;
  std::string metrics_id;     // git blob id of metrics.csv
  std::string checkpoint_id;  // git blob id of checkpoint.bin
  nlohmann::json manifest;
};

/// Writes metrics.csv, checkpoint.bin and manifest.json into `dir`.
RunOutputs WriteRunOutputs(const TrainConfig& cfg, const RunArtifact& art, const std::filesystem::path& dir);

/// One sweep axis: a config key and the values it takes.
struct GridAxis {
  std::string key;  // as written by the user
  std::vector<std::string> values;
};

/// "key=v1,v2;key2=a,b". An axis whose values contain '|' is split on '|'
/// instead, so schedules ("0:1,0.5:4|0:2") can be swept.
std::vector<GridAxis> ParseGrid(const std::string& spec);

struct SweepRun {
  std::string label;  // "fixed_d=2" style, axes joined by '_'
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  bool ok = false;
  std::string error;
  std::optional<double> final_eval_return;
};

struct SummaryRow {
  std::string label;
  int n_ok = 0;
  int n_failed = 0;
  std::optional<double> mean;
  std::optional<double> std;  // population
};

struct SweepResult {
  std::vector<SweepRun> runs;
  std::vector<SummaryRow> summary;
};

struct SweepOptions {
  int seeds = 1;
  /// Seeds are first_seed, first_seed + 1, ...; defaults to train.seed.
  std::optional<std::uint64_t> first_seed;
  std::size_t threads = 1;
  bool quiet = true;
};

/// Runs grid x seeds. Each run writes to out/<label>/seed_<s>/; failed runs
/// are recorded, not rethrown. Writes out/summary.csv.
SweepResult Sweep(const ConfigMap& base, const std::vector<GridAxis>& grid, const SweepOptions& opts,
                  const std::filesystem::path& out);

/// Last non-empty eval_return of a metrics table.
std::optional<double> FinalEvalReturn(const Metrics& m);

/// Mean and population std of final eval returns over `dirs`, read back
/// from each metrics.csv.
SummaryRow SummarizeRuns(const std::string& label, const std::vector<std::filesystem::path>& dirs,
                         int extra_failed = 0);

void WriteSummaryCsv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

/// "0.772 ± 0.050"; "n/a" without data.
std::string FormatCell(const SummaryRow& row);

Metrics ReadMetricsFile(const std::filesystem::path& path);

/// Parallelism cap from DSR_THREADS, else hardware concurrency (>= 1).
std::size_t DefaultThreads();

}  // namespace dsr
