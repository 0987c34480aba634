#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ordgam {

// FNV-1a, 64 bit. Used for run manifests, not security.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::string hash_file(const std::string& path);

}  // namespace ordgam
