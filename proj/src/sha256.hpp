#pragma once

#include <string>

namespace drlfm {

// Hex SHA-256 digest of a file's bytes; used for run-manifest input digests.
std::string sha256_file_hex(const std::string& path);

std::string sha256_hex(const void* data, std::size_t len);

}  // namespace drlfm
