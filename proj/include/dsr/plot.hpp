#pragma once

#include <string>
#include <vector>

#include "dsr/trainer.hpp"

namespace dsr {

struct PlotRun {
  std::string group;  // runs sharing a group are aggregated
  std::string name;   // per-run identifier (usually the run directory)
  Metrics metrics;
};

/// Mean across runs at each x of the group's common grid, with population std.
struct ReturnCurve {
  std::string group;
  std::vector<double> x;  // env_steps
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t n_runs = 0;
};

/// Aligns each group's eval curves. The common grid is the evaluation grid of
/// the run with the fewest eval points, clipped to the x-range every run
/// covers; the other runs are linearly interpolated onto it.
std::vector<ReturnCurve> AggregateReturns(const std::vector<PlotRun>& runs);

/// Mean eval return vs env_steps, one line plus a +-std band per group.
std::string RenderReturnSvg(const std::vector<PlotRun>& runs, const std::string& title = "Evaluation return");

/// Selected sight range vs episode, one polyline per run. Each polyline
/// carries the exact series in data-x / data-y.
std::string RenderSelectedDSvg(const std::vector<PlotRun>& runs, const std::string& title = "Selected sight range");

}  // namespace dsr
