#pragma once

#include <string>
#include <string_view>

namespace claimnorm {

// Lowercase hex SHA-256 digest of the bytes of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace claimnorm
