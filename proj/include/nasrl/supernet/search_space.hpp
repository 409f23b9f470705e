#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace nasrl::supernet {

struct ConvSpec {
  std::size_t out_channels = 32;
  std::size_t kernel = 8;
  std::size_t stride = 4;
};

// One choice block: a conv layer whose kernel size is picked from a list.
struct ChoiceSpec {
  std::size_t out_channels = 64;
  std::size_t stride = 1;
  std::vector<std::size_t> kernel_options;
  // Options whose output is replaced by zeros. Only used to build rigged
  // spaces for testing search methods.
  std::vector<std::size_t> zeroed_options;
  // Optional same-size max-pool after the activation (0 disables).
  std::size_t pool_kernel = 0;
  std::size_t pool_stride = 1;

  std::size_t option_count() const { return kernel_options.size(); }
  bool is_zeroed(std::size_t option) const;
};

struct SearchSpace {
  std::string name;
  std::size_t input_channels = 4;
  std::size_t input_height = 12;
  std::size_t input_width = 12;
  ConvSpec stem;
  std::vector<ChoiceSpec> blocks;
  std::size_t pad_target = 0;  // flattened feature length fed to the hidden layer
  std::size_t hidden = 512;
  std::size_t actions = 3;

  // Throws ConfigError describing the first violated invariant.
  void validate() const;
  std::size_t last_channels() const;
};

// One option index per choice block.
struct Architecture {
  std::vector<std::size_t> choices;

  // Dash-joined option indices, e.g. "3-2".
  std::string id() const;
  static Architecture parse(const std::string& id);
  auto operator<=>(const Architecture&) const = default;
};

std::size_t space_size(const SearchSpace& space);

// Every architecture in lexicographic order of option indices. Refuses
// spaces larger than `cap`.
std::vector<Architecture> enumerate(const SearchSpace& space, std::size_t cap = 4096);

// Position of `arch` in enumerate() order.
std::size_t enumeration_index(const SearchSpace& space, const Architecture& arch);
Architecture architecture_at(const SearchSpace& space, std::size_t index);

// Throws ConfigError when `arch` does not fit `space`.
void validate_architecture(const SearchSpace& space, const Architecture& arch);

// Picks the option index matching each requested kernel size.
Architecture architecture_from_kernels(const SearchSpace& space,
                                       const std::vector<std::size_t>& kernels);
std::vector<std::size_t> kernels_of(const SearchSpace& space, const Architecture& arch);
bool is_crippled(const SearchSpace& space, const Architecture& arch);

struct FeatureShape {
  std::size_t channels, height, width;
};

// Shape of the last conv feature map for `arch`, by shape inference only.
FeatureShape final_feature_shape(const SearchSpace& space, const Architecture& arch);

// Search-space definition files (JSON).
nlohmann::json to_json(const SearchSpace& space);
SearchSpace search_space_from_json(const nlohmann::json& j);
SearchSpace load_search_space(const std::string& path);
void save_search_space(const SearchSpace& space, const std::string& path);

// Built-in presets: "space1", "space2", "nature_cnn" (full-scale, 84x84
// input) and "desk_space1", "desk_space2", "desk_nature_cnn" (12x12 grid
// input, narrower layers), plus "rigged_desk" whose block 1 option 0 zeroes
// its output.
SearchSpace preset(const std::string& name);
std::vector<std::string> preset_names();
// Resolves a preset name or, failing that, a definition file path.
SearchSpace resolve_space(const std::string& name_or_path);

struct NamedArchitecture {
  std::string name;
  std::string space;
  std::vector<std::size_t> kernels;
};

// Reference architectures as kernel sizes: the Nature-CNN and the best
// known architecture for each game and space.
std::vector<NamedArchitecture> named_architectures();

}  // namespace nasrl::supernet
