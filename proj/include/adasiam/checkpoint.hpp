// Checkpoint IO: `<prefix>.manifest` text lines `name shape dtype offset`
// plus `<prefix>.blob` of little-endian 32-bit floats in manifest order.

#pragma once

#include <string>

#include "adasiam/nn.hpp"

namespace adasiam {

void save_checkpoint(const std::string& prefix, const ParamSet& params);

// Throws std::runtime_error naming the offending file on any malformed or
// missing input.
ParamSet load_checkpoint(const std::string& prefix);

}  // namespace adasiam
