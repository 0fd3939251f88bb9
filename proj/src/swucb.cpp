#include "dsr/swucb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dsr {

ArmSet::ArmSet(std::vector<SightRange> arms) : arms_(std::move(arms)) {
  if (arms_.empty()) throw std::invalid_argument("arm set is empty");
  for (std::size_t i = 0; i < arms_.size(); ++i) {
    if (arms_[i] < 0) throw std::invalid_argument("negative sight range in arm set");
    if (i > 0 && arms_[i] <= arms_[i - 1]) {
      throw std::invalid_argument("arm set must be strictly increasing without duplicates");
    }
  }
}

std::size_t ArmSet::IndexOf(SightRange d) const {
  auto it = std::lower_bound(arms_.begin(), arms_.end(), d);
  if (it == arms_.end() || *it != d) return arms_.size();
  return static_cast<std::size_t>(it - arms_.begin());
}

MetaController::MetaController(ArmSet arms, double c, std::size_t w)
    : arms_(std::move(arms)), c_(c), w_(w), counts_(arms_.size(), 0), sums_(arms_.size(), 0.0) {
  if (w_ == 0) throw std::invalid_argument("window size must be at least 1");
  if (!std::isfinite(c_) || c_ < 0.0) {
    throw std::invalid_argument("exploration coefficient must be finite and non-negative");
  }
}

void MetaController::CheckArm(std::size_t arm) const {
  if (arm >= arms_.size()) {
    throw std::out_of_range("arm index " + std::to_string(arm) + " out of range");
  }
}

std::size_t MetaController::WindowedCount(std::size_t arm) const {
  CheckArm(arm);
  return counts_[arm];
}

double MetaController::WindowedMean(std::size_t arm) const {
  CheckArm(arm);
  if (counts_[arm] == 0) return std::numeric_limits<double>::quiet_NaN();
  return sums_[arm] / static_cast<double>(counts_[arm]);
}

double MetaController::UcbScore(std::size_t arm) const {
  CheckArm(arm);
  const std::size_t n = counts_[arm];
  if (n == 0) return std::numeric_limits<double>::infinity();
  const double horizon = static_cast<double>(std::min<std::uint64_t>(selections_, w_));
  const double bonus = std::sqrt(std::log(horizon) / static_cast<double>(n));
  return sums_[arm] / static_cast<double>(n) + c_ * bonus;
}

ArmChoice MetaController::Select() const {
  std::size_t best = 0;
  double best_score = UcbScore(0);
  for (std::size_t i = 1; i < arms_.size(); ++i) {
    const double s = UcbScore(i);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return {best, arms_[best]};
}

void MetaController::Update(std::size_t arm, double reward) {
  CheckArm(arm);
  if (!std::isfinite(reward)) throw std::invalid_argument("reward must be finite");
  window_.push_back({arm, reward});
  ++counts_[arm];
  sums_[arm] += reward;
  ++selections_;
  if (window_.size() > w_) {
    const WindowEntry old = window_.front();
    window_.pop_front();
    --counts_[old.arm];
    // Re-sum instead of subtracting so a restored snapshot scores bit-identically.
    Resum();
  }
}

void MetaController::Resum() {
  std::fill(sums_.begin(), sums_.end(), 0.0);
  for (const auto& e : window_) sums_[e.arm] += e.reward;
}

ArmChoice MetaController::BestByMean() const {
  if (window_.empty()) throw std::logic_error("best_by_mean on an empty window");
  std::size_t best = arms_.size();
  double best_mean = 0.0;
  for (std::size_t i = 0; i < arms_.size(); ++i) {
    if (counts_[i] == 0) continue;
    const double m = WindowedMean(i);
    if (best == arms_.size() || m > best_mean) {
      best = i;
      best_mean = m;
    }
  }
  return {best, arms_[best]};
}

nlohmann::json MetaController::ToJson() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : window_) entries.push_back({e.arm, e.reward});
  return {{"arms", arms_.values()},
          {"c", c_},
          {"w", w_},
          {"selections", selections_},
          {"window", entries}};
}

MetaController MetaController::FromJson(const nlohmann::json& j) {
  MetaController mc(ArmSet(j.at("arms").get<std::vector<SightRange>>()), j.at("c").get<double>(),
                    j.at("w").get<std::size_t>());
  const auto& entries = j.at("window");
  const auto total = j.at("selections").get<std::uint64_t>();
  if (entries.size() > mc.w_ || entries.size() > total) {
    throw std::invalid_argument("snapshot window inconsistent with w and selection count");
  }
  for (const auto& e : entries) mc.Update(e.at(0).get<std::size_t>(), e.at(1).get<double>());
  mc.selections_ = total;
  mc.Resum();
  return mc;
}

}  // namespace dsr
