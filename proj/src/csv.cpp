#include "ionmux/csv.hpp"

#include <cinttypes>
#include <cstdio>

namespace ionmux::csv {

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::string format_sci(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*e", decimals, value);
    return buf;
}

std::string format_int(std::int64_t value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%" PRId64, value);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

} // namespace ionmux::csv
