#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qkdrelay {

using Octets = std::vector<std::uint8_t>;

// Lowercase hex, two characters per octet.
std::string to_hex(const Octets& bytes);

// Accepts upper or lower case; nullopt on odd length or non-hex characters.
std::optional<Octets> from_hex(std::string_view text);

}  // namespace qkdrelay
