#include "dsr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dsr/config.hpp"
#include "dsr/error.hpp"
#include "dsr/plot.hpp"
#include "dsr/sweep.hpp"
#include "dsr/trainer.hpp"

namespace dsr {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs/train";
  bool quiet = false;
};

struct SweepArgs {
  std::string config;
  int seeds = 1;
  std::optional<std::uint64_t> first_seed;
  std::string grid;
  std::string out = "runs/sweep";
  std::optional<std::size_t> threads;
  bool quiet = false;
};

struct PlotArgs {
  std::vector<std::string> runs;
  std::string out = "plot.svg";
  std::string kind = "return";
  std::string title;
};

struct EvaluateArgs {
  std::string run;
  std::optional<int> d;
  std::optional<int> episodes;
  std::optional<double> eps;
  std::uint64_t seed = 0;
};

std::string Fmt(std::optional<double> v) { return v ? FormatDouble(*v) : "n/a"; }

int CmdTrain(const TrainArgs& a, std::ostream& out) {
  auto entries = [&] {
    std::ifstream in(a.config);
    if (!in) throw std::runtime_error("cannot open config file " + a.config);
    return ParseConfigText(in);
  }();
  if (a.seed) entries["train.seed"] = std::to_string(*a.seed);
  const TrainConfig cfg = ConfigFromMap(entries);
  RowCallback progress;
  if (!a.quiet) {
    const int every = std::max(1, cfg.episodes / 20);
    progress = [&out, every](const MetricsRow& r) {
      if (r.episode % every == 0 || r.eval_return) {
        out << "episode " << r.episode << " steps " << r.env_steps << " d " << r.selected_d << " return "
            << FormatDouble(r.episode_return);
        if (r.eval_return) out << " eval " << FormatDouble(*r.eval_return);
        out << "\n";
      }
    };
  }
  const RunArtifact art = Train(cfg, progress);
  const RunOutputs files = WriteRunOutputs(cfg, art, a.out);
  out << "mode " << art.mode << "\n";
  out << "final d* " << art.final_d << "\n";
  out << "final eval return " << Fmt(art.final_eval_return) << "\n";
  out << "wrote " << (files.dir / "metrics.csv").string() << " (" << files.metrics_id << ")\n";
  return kExitOk;
}

int CmdSweep(const SweepArgs& a, std::ostream& out) {
  std::ifstream in(a.config);
  if (!in) throw std::runtime_error("cannot open config file " + a.config);
  const ConfigMap base = ParseConfigText(in);
  SweepOptions opts;
  opts.seeds = a.seeds;
  opts.first_seed = a.first_seed;
  opts.threads = a.threads.value_or(DefaultThreads());
  if (const char* cap = std::getenv("DSR_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) opts.threads = std::min(opts.threads, static_cast<std::size_t>(v));
  }
  opts.quiet = a.quiet;
  const SweepResult res = Sweep(base, ParseGrid(a.grid), opts, a.out);
  int failed = 0;
  for (const auto& run : res.runs) {
    if (!run.ok) {
      ++failed;
      out << "run " << run.label << " seed " << run.seed << " failed: " << run.error << "\n";
    }
  }
  for (const auto& row : res.summary) {
    out << row.label << "  " << FormatCell(row) << "  (" << row.n_ok << " ok";
    if (row.n_failed) out << ", " << row.n_failed << " failed and excluded";
    out << ")\n";
  }
  out << "wrote " << (fs::path(a.out) / "summary.csv").string() << "\n";
  return failed == 0 ? kExitOk : kExitRuntime;
}

int CmdPlot(const PlotArgs& a, std::ostream& out) {
  if (a.kind != "return" && a.kind != "selected_d") {
    throw ConfigError("kind", "expected return or selected_d, got '" + a.kind + "'");
  }
  std::vector<PlotRun> runs;
  std::vector<std::string> problems;
  for (const auto& dir : a.runs) {
    const fs::path p(dir);
    try {
      PlotRun r;
      r.name = p.lexically_normal().string();
      const fs::path parent = p.lexically_normal().parent_path();
      r.group = parent.filename().empty() ? r.name : parent.filename().string();
      r.metrics = ReadMetricsFile(p / "metrics.csv");
      runs.push_back(std::move(r));
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += "\n  " + s;
    throw std::runtime_error("unreadable metrics:" + msg);
  }
  if (runs.empty()) throw std::runtime_error("no run directories given");
  const std::string svg = a.kind == "return"
                              ? RenderReturnSvg(runs, a.title.empty() ? "Evaluation return" : a.title)
                              : RenderSelectedDSvg(runs, a.title.empty() ? "Selected sight range" : a.title);
  std::ofstream f(a.out, std::ios::binary);
  f << svg;
  if (!f) throw std::runtime_error("cannot write " + a.out);
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

int CmdEvaluate(const EvaluateArgs& a, std::ostream& out) {
  const fs::path dir(a.run);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error((dir / "manifest.json").string() + ": cannot open");
  const nlohmann::json manifest = nlohmann::json::parse(mf);
  ConfigMap entries;
  for (const auto& [k, v] : manifest.at("config").items()) entries[k] = v.get<std::string>();
  const TrainConfig cfg = ConfigFromMap(entries);

  auto env = cfg.env.Make(0);
  Rng unused(0);
  marl::QLearner learner(cfg.algo, env->n_agents(), env->obs_len(), env->action_count(), unused);
  std::ifstream ck(dir / "checkpoint.bin", std::ios::binary);
  if (!ck) throw std::runtime_error((dir / "checkpoint.bin").string() + ": cannot open");
  learner.LoadCheckpoint(ck);

  const int d = a.d.value_or(manifest.at("final_d").get<int>());
  if (d < 0 || d > cfg.env.MaxSight()) throw ConfigError("d", "sight range outside [0, max_sight]");
  const int n = a.episodes.value_or(cfg.eval_episodes);
  if (n < 1) throw ConfigError("episodes", "must be >= 1");
  const double eps = a.eps.value_or(cfg.algo.eval_eps);
  const double ret = Evaluate(learner, *env, d, n, eps, a.seed);
  out << "d " << d << " episodes " << n << " eps " << FormatDouble(eps) << " mean return " << FormatDouble(ret)
      << "\n";
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic sight range selection for multi-agent Q-learning"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Run one training job");
  t->add_option("config", train.config, "Config file")->required();
  t->add_option("--seed", train.seed, "Override train.seed");
  t->add_option("--out", train.out, "Output directory");
  t->add_flag("--quiet", train.quiet, "Only print the final summary");

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Run a grid of configs over several seeds");
  s->add_option("config", sweep.config, "Base config file")->required();
  s->add_option("--seeds", sweep.seeds, "Seeds per grid cell");
  s->add_option("--first-seed", sweep.first_seed, "First seed (default train.seed)");
  s->add_option("--grid", sweep.grid, "Axes, e.g. \"fixed_d=1,2,4,8\" or \"dsr.c=1,2;dsr.w=500,5000\"")->required();
  s->add_option("--out", sweep.out, "Output directory");
  s->add_option("--threads", sweep.threads, "Concurrent runs (capped by DSR_THREADS)");
  s->add_flag("--quiet", sweep.quiet, "No per-run progress");

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render metrics of one or more runs as SVG");
  p->add_option("runs", plot.runs, "Run directories (each holding metrics.csv)")->required();
  p->add_option("--out", plot.out, "SVG path");
  p->add_option("--kind", plot.kind, "return | selected_d");
  p->add_option("--title", plot.title, "Plot title");

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Evaluate a saved checkpoint");
  e->add_option("run", eval.run, "Run directory (manifest.json + checkpoint.bin)")->required();
  e->add_option("--d", eval.d, "Sight range (default: the run's final d*)");
  e->add_option("--episodes", eval.episodes, "Episodes (default train.eval_episodes)");
  e->add_option("--eps", eval.eps, "Exploration rate (default algo.eval_eps)");
  e->add_option("--seed", eval.seed, "Evaluation seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*t) return CmdTrain(train, out);
    if (*s) return CmdSweep(sweep, out);
    if (*p) return CmdPlot(plot, out);
    if (*e) return CmdEvaluate(eval, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace dsr
