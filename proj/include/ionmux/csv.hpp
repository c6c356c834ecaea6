#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace ionmux::csv {

/// Locale-independent numeric formatting helpers. All artifact writers go
/// through these so identical inputs give byte-identical files.
std::string format_fixed(double value, int decimals);
std::string format_sci(double value, int decimals = 12);
std::string format_int(std::int64_t value);

/// Split one CSV line on commas (no quoting; the artifact formats are all
/// plain numeric).
std::vector<std::string> split_fields(const std::string& line);

/// FNV-1a 64-bit digest of a byte string, hex-encoded; used for config and
/// artifact provenance stamps.
std::string fnv1a_hex(const std::string& bytes);

} // namespace ionmux::csv
