#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nasrl/envs/env.hpp"

namespace nasrl::envs {

// Named environment presets: "grid_breakout", "grid_freeway" (desk-scale
// defaults) and "grid_freeway_nocars" (traffic disabled, for kinematics tests).
std::unique_ptr<Env> make_env(const std::string& preset);
std::vector<std::string> env_presets();

}  // namespace nasrl::envs
