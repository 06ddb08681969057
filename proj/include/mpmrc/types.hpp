#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mpmrc {

using Shape = std::vector<int>;
using Mask = std::vector<std::uint8_t>;
using Tokens = std::vector<std::string>;

}  // namespace mpmrc
