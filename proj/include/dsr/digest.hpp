#pragma once

#include <string>
#include <string_view>

namespace dsr {

/// Lowercase hex SHA-1 of `data`.
std::string Sha1Hex(std::string_view data);

/// Git blob object id ("blob <size>\0" header followed by the content).
std::string GitBlobId(std::string_view content);

}  // namespace dsr
