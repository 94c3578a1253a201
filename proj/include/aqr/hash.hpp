#pragma once

#include <cstdint>
#include <string>

namespace aqr {

// SHA-256 of a byte string, lowercase hex. Self-contained; used for the
// statistics-file checksum and the experiment output manifest.
std::string sha256_hex(const std::string& bytes);

} // namespace aqr
