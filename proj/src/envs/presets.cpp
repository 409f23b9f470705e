#include "nasrl/envs/presets.hpp"

#include "nasrl/envs/grid_games.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::envs {

std::unique_ptr<Env> make_env(const std::string& preset) {
  if (preset == "grid_breakout") return std::make_unique<GridBreakout>();
  if (preset == "grid_freeway") return std::make_unique<GridFreeway>();
  if (preset == "grid_freeway_nocars") {
    GridFreewayConfig cfg;
    cfg.spawn_cars = false;
    return std::make_unique<GridFreeway>(cfg);
  }
  throw ConfigError("unknown environment preset '" + preset + "'");
}

std::vector<std::string> env_presets() {
  return {"grid_breakout", "grid_freeway", "grid_freeway_nocars"};
}

}  // namespace nasrl::envs
