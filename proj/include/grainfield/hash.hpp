#ifndef GRAINFIELD_HASH_HPP_
#define GRAINFIELD_HASH_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace grainfield {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view bytes);
std::string to_hex(const Digest& digest);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace grainfield

#endif  // GRAINFIELD_HASH_HPP_
