#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace foval {

// FNV-1a, 64-bit. Non-cryptographic; used to fingerprint configs, data files
// and pipeline manifests so runs can assert they reuse matching artifacts.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view bytes);
std::string fnv1a64_file_hex(const std::string& path); // throws IoFailure

} // namespace foval
