#include "dsr/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dsr/digest.hpp"
#include "dsr/error.hpp"

namespace dsr {

namespace fs = std::filesystem;

namespace {

void WriteFile(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(Trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(Trim(cur));
  return out;
}

std::string DirSafe(std::string s) {
  for (char& ch : s) {
    if (ch == '/' || ch == ':' || ch == ',' || ch == ' ' || ch == '|') ch = '-';
  }
  return s;
}

}  // namespace

RunOutputs WriteRunOutputs(const TrainConfig& cfg, const RunArtifact& art, const fs::path& dir) {
  fs::create_directories(dir);
  RunOutputs out;
  out.dir = dir;

  const std::string csv = art.metrics.ToCsv();
  WriteFile(dir / "metrics.csv", csv);
  out.metrics_id = GitBlobId(csv);

  std::ostringstream ckpt(std::ios::binary);
  art.learner->SaveCheckpoint(ckpt);
  const std::string ckpt_bytes = ckpt.str();
  WriteFile(dir / "checkpoint.bin", ckpt_bytes);
  out.checkpoint_id = GitBlobId(ckpt_bytes);

  nlohmann::json m;
  m["config_hash"] = ConfigHash(cfg);
  m["seed"] = cfg.seed;
  m["output_dir"] = dir.string();
  m["mode"] = art.mode;
  m["final_d"] = art.final_d;
  m["final_eval_return"] = art.final_eval_return ? nlohmann::json(*art.final_eval_return) : nlohmann::json();
  m["artifacts"] = {{"metrics.csv", out.metrics_id}, {"checkpoint.bin", out.checkpoint_id}};
  m["config"] = ConfigToMap(cfg);
  m["learner"] = art.learner->Manifest();
  if (art.controller) m["controller"] = art.controller->ToJson();
  WriteFile(dir / "manifest.json", m.dump(2) + "\n");
  out.manifest = std::move(m);
  return out;
}

std::vector<GridAxis> ParseGrid(const std::string& spec) {
  std::vector<GridAxis> axes;
  if (Trim(spec).empty()) throw ConfigError("grid", "empty grid");
  for (const auto& part : Split(spec, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("grid", "axis '" + part + "' is not key=values");
    GridAxis axis;
    axis.key = Trim(part.substr(0, eq));
    ResolveConfigKey(axis.key);  // reject unknown keys early
    const std::string values = part.substr(eq + 1);
    axis.values = Split(values, values.find('|') != std::string::npos ? '|' : ',');
    for (const auto& v : axis.values) {
      if (v.empty()) throw ConfigError(axis.key, "empty grid value");
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

Metrics ReadMetricsFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open metrics");
  try {
    return Metrics::ReadCsv(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::optional<double> FinalEvalReturn(const Metrics& m) {
  for (auto it = m.rows.rbegin(); it != m.rows.rend(); ++it) {
    if (it->eval_return) return it->eval_return;
  }
  return std::nullopt;
}

SummaryRow SummarizeRuns(const std::string& label, const std::vector<fs::path>& dirs, int extra_failed) {
  SummaryRow row;
  row.label = label;
  row.n_failed = extra_failed;
  std::vector<double> values;
  for (const auto& dir : dirs) {
    try {
      const auto v = FinalEvalReturn(ReadMetricsFile(dir / "metrics.csv"));
      if (!v) throw std::runtime_error("no evaluation rows");
      values.push_back(*v);
    } catch (const std::exception&) {
      ++row.n_failed;
    }
  }
  row.n_ok = static_cast<int>(values.size());
  if (!values.empty()) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    row.mean = mean;
    row.std = std::sqrt(var / static_cast<double>(values.size()));
  }
  return row;
}

std::string FormatCell(const SummaryRow& row) {
  if (!row.mean) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f \xC2\xB1 %.3f", *row.mean, *row.std);
  return buf;
}

void WriteSummaryCsv(const std::vector<SummaryRow>& rows, const fs::path& path) {
  std::ostringstream out;
  out << "config,n_ok,n_failed,mean,std,cell\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.n_ok << ',' << r.n_failed << ',' << (r.mean ? FormatDouble(*r.mean) : "") << ','
        << (r.std ? FormatDouble(*r.std) : "") << ',' << FormatCell(r) << '\n';
  }
  WriteFile(path, out.str());
}

std::size_t DefaultThreads() {
  if (const char* env = std::getenv("DSR_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

SweepResult Sweep(const ConfigMap& base, const std::vector<GridAxis>& grid, const SweepOptions& opts,
                  const fs::path& out) {
  if (grid.empty()) throw ConfigError("grid", "empty grid");
  if (opts.seeds < 1) throw ConfigError("seeds", "must be >= 1");

  // Cross product of axis values, first axis slowest.
  struct Cell {
    std::string label;
    ConfigMap entries;
  };
  std::vector<Cell> cells = {{"", base}};
  for (const auto& axis : grid) {
    std::vector<Cell> next;
    for (const auto& cell : cells) {
      for (const auto& v : axis.values) {
        Cell c = cell;
        ApplyOverride(c.entries, axis.key, v);
        c.label += (c.label.empty() ? "" : "_") + DirSafe(axis.key + "=" + v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  // Validate every cell before running anything.
  std::vector<TrainConfig> cell_cfgs;
  for (const auto& cell : cells) cell_cfgs.push_back(ConfigFromMap(cell.entries));

  const std::uint64_t first_seed = opts.first_seed.value_or(cell_cfgs.front().seed);
  SweepResult result;
  std::vector<TrainConfig> run_cfgs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int k = 0; k < opts.seeds; ++k) {
      SweepRun run;
      run.label = cells[c].label;
      run.seed = first_seed + static_cast<std::uint64_t>(k);
      run.dir = out / run.label / ("seed_" + std::to_string(run.seed));
      TrainConfig cfg = cell_cfgs[c];
      cfg.seed = run.seed;
      run_cfgs.push_back(std::move(cfg));
      result.runs.push_back(std::move(run));
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < result.runs.size(); i = next++) {
      SweepRun& run = result.runs[i];
      try {
        const RunArtifact art = Train(run_cfgs[i]);
        WriteRunOutputs(run_cfgs[i], art, run.dir);
        run.ok = true;
        run.final_eval_return = art.final_eval_return;
      } catch (const std::exception& e) {
        run.error = e.what();
      }
      if (!opts.quiet) {
        std::lock_guard<std::mutex> lock(log_mu);
        std::cerr << "[" << (i + 1) << "/" << result.runs.size() << "] " << run.label << " seed " << run.seed
                  << (run.ok ? " ok" : " FAILED: " + run.error) << "\n";
      }
    }
  };
  const std::size_t n_threads = std::min(std::max<std::size_t>(1, opts.threads), result.runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& cell : cells) {
    std::vector<fs::path> dirs;
    int failed = 0;
    for (const auto& run : result.runs) {
      if (run.label != cell.label) continue;
      if (run.ok) dirs.push_back(run.dir);
      else ++failed;
    }
    result.summary.push_back(SummarizeRuns(cell.label, dirs, failed));
  }
  fs::create_directories(out);
  WriteSummaryCsv(result.summary, out / "summary.csv");
  return result;
}

}  // namespace dsr
