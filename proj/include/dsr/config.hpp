#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dsr/trainer.hpp"

namespace dsr {

/// Flat `section.key = value` file. Blank lines and `#` comments are
/// skipped. Unknown keys, duplicate keys and keys that do not apply to the
/// selected environment raise ConfigError.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap ParseConfigText(std::istream& in);
ConfigMap ParseConfigText(const std::string& text);

/// Builds a config from defaults plus `entries` and validates it.
TrainConfig ConfigFromMap(const ConfigMap& entries);
TrainConfig LoadConfig(const std::filesystem::path& path);

/// Canonical key/value form (keys sorted, shortest round-trip doubles).
ConfigMap ConfigToMap(const TrainConfig& cfg);
std::string SerializeConfig(const TrainConfig& cfg);

/// SHA-1 of the canonical form without train.seed, so every seed of one
/// configuration shares a hash.
std::string ConfigHash(const TrainConfig& cfg);

/// Every accepted key.
const std::vector<std::string>& KnownConfigKeys();

/// Resolves a possibly abbreviated key ("fixed_d") to its full dotted name
/// by unique suffix match.
std::string ResolveConfigKey(const std::string& key);

/// Applies one override. Setting train.fixed_d or train.schedule switches
/// the run mode, disabling the other two.
void ApplyOverride(ConfigMap& entries, const std::string& key, const std::string& value);

std::vector<SightRange> ParseSightList(const std::string& key, const std::string& value);
std::vector<SchedulePhase> ParseSchedule(const std::string& value);
std::string FormatSchedule(const std::vector<SchedulePhase>& schedule);

}  // namespace dsr
