#pragma once

#include <stdexcept>
#include <string>

namespace dsr {

/// Invalid configuration. what() starts with the offending dotted key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::invalid_argument(key + ": " + message), key_(key) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace dsr
