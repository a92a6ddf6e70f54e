#pragma once

#include <string>
#include <string_view>

namespace qdbias {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
/// Throws Error if the file cannot be read.
std::string sha256_file(const std::string& path);

} // namespace qdbias
