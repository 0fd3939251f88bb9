#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "json.hpp"

namespace dsr {

/// Sight range in grid cells (Chebyshev radius).
using SightRange = int;

/// Ordered, duplicate-free set of candidate sight ranges.
class ArmSet {
 public:
  /// Throws std::invalid_argument unless `arms` is non-empty, non-negative
  /// and strictly increasing.
  explicit ArmSet(std::vector<SightRange> arms);

  std::size_t size() const { return arms_.size(); }
  SightRange operator[](std::size_t i) const { return arms_.at(i); }
  const std::vector<SightRange>& values() const { return arms_; }
  SightRange max() const { return arms_.back(); }

  /// Index of `d`, or size() when absent.
  std::size_t IndexOf(SightRange d) const;

  bool operator==(const ArmSet&) const = default;

 private:
  std::vector<SightRange> arms_;
};

struct WindowEntry {
  std::size_t arm;
  double reward;

  bool operator==(const WindowEntry&) const = default;
};

struct ArmChoice {
  std::size_t arm;
  SightRange d;

  bool operator==(const ArmChoice&) const = default;
};

/// Sliding-window UCB bandit over sight ranges.
///
/// The window holds the last min(e, w) (arm, reward) records. Counts are kept
/// exactly; per-arm reward sums are maintained incrementally and re-summed from
/// the window every w evictions so floating-point drift stays bounded.
class MetaController {
 public:
  MetaController(ArmSet arms, double c, std::size_t w);

  const ArmSet& arms() const { return arms_; }
  double c() const { return c_; }
  std::size_t w() const { return w_; }
  /// Total number of updates so far.
  std::uint64_t selections() const { return selections_; }
  const std::deque<WindowEntry>& window() const { return window_; }

  std::size_t WindowedCount(std::size_t arm) const;
  /// Mean reward of `arm` over the window; NaN when the arm is absent.
  double WindowedMean(std::size_t arm) const;

  /// Windowed mean plus c * sqrt(ln(min(e, w)) / N); +inf for unexplored arms.
  double UcbScore(std::size_t arm) const;

  /// Highest-scoring arm, lowest index on ties. Pure.
  ArmChoice Select() const;

  /// Records `reward` for `arm`, evicting the oldest record past w.
  void Update(std::size_t arm, double reward);

  /// Arm with the highest windowed mean among arms present in the window.
  /// Throws std::logic_error when the window is empty.
  ArmChoice BestByMean() const;

  nlohmann::json ToJson() const;
  static MetaController FromJson(const nlohmann::json& j);

 private:
  void CheckArm(std::size_t arm) const;
  void Resum();

  ArmSet arms_;
  double c_;
  std::size_t w_;
  std::uint64_t selections_ = 0;
  std::deque<WindowEntry> window_;
  std::vector<std::size_t> counts_;
  std::vector<double> sums_;
};

}  // namespace dsr
