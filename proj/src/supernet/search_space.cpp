#include "nasrl/supernet/search_space.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "nasrl/autodiff/ops.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::supernet {

using nlohmann::json;

bool ChoiceSpec::is_zeroed(std::size_t option) const {
  return std::find(zeroed_options.begin(), zeroed_options.end(), option) != zeroed_options.end();
}

std::size_t SearchSpace::last_channels() const {
  return blocks.empty() ? stem.out_channels : blocks.back().out_channels;
}

void SearchSpace::validate() const {
  const std::string where = "search space '" + name + "': ";
  if (input_channels == 0 || input_height == 0 || input_width == 0)
    throw ConfigError(where + "input dimensions must be positive");
  if (stem.out_channels == 0 || stem.kernel == 0 || stem.stride == 0)
    throw ConfigError(where + "stem fields must be positive");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ChoiceSpec& c = blocks[b];
    const std::string bw = where + "block " + std::to_string(b) + ": ";
    if (c.out_channels == 0 || c.stride == 0)
      throw ConfigError(bw + "out_channels and stride must be positive");
    if (c.kernel_options.empty()) throw ConfigError(bw + "kernel_options is empty");
    std::set<std::size_t> seen;
    for (std::size_t k : c.kernel_options) {
      if (k == 0) throw ConfigError(bw + "kernel sizes must be positive");
      if (!seen.insert(k).second) throw ConfigError(bw + "duplicate kernel size " + std::to_string(k));
    }
    for (std::size_t z : c.zeroed_options)
      if (z >= c.option_count()) throw ConfigError(bw + "zeroed option index out of range");
    if (c.pool_kernel > 0 && c.pool_stride == 0) throw ConfigError(bw + "pool stride must be positive");
  }
  if (pad_target == 0) throw ConfigError(where + "pad_target must be positive");
  if (pad_target % last_channels() != 0)
    throw ConfigError(where + "pad_target " + std::to_string(pad_target) +
                      " is not divisible by the last block's " + std::to_string(last_channels()) +
                      " channels");
  const std::size_t cells = pad_target / last_channels();
  std::size_t side = 0;
  while ((side + 1) * (side + 1) <= cells) ++side;
  if (side * side != cells)
    throw ConfigError(where + "pad_target / channels = " + std::to_string(cells) +
                      " is not a square grid");
  if (hidden == 0 || actions == 0) throw ConfigError(where + "head sizes must be positive");
}

std::string Architecture::id() const {
  std::string s;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(choices[i]);
  }
  return s;
}

Architecture Architecture::parse(const std::string& id) {
  Architecture a;
  if (id.empty()) return a;
  std::stringstream ss(id);
  std::string part;
  while (std::getline(ss, part, '-')) {
    if (part.empty() || !std::all_of(part.begin(), part.end(), ::isdigit))
      throw ConfigError("malformed architecture id '" + id + "'");
    a.choices.push_back(std::stoul(part));
  }
  return a;
}

std::size_t space_size(const SearchSpace& space) {
  std::size_t n = 1;
  for (const auto& b : space.blocks) n *= b.option_count();
  return n;
}

std::vector<Architecture> enumerate(const SearchSpace& space, std::size_t cap) {
  const std::size_t n = space_size(space);
  if (n > cap)
    throw ConfigError("search space '" + space.name + "' has " + std::to_string(n) +
                      " architectures, above the enumeration cap of " + std::to_string(cap) +
                      "; use sampling-based selection instead");
  std::vector<Architecture> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(architecture_at(space, i));
  return out;
}

std::size_t enumeration_index(const SearchSpace& space, const Architecture& arch) {
  validate_architecture(space, arch);
  std::size_t idx = 0;
  for (std::size_t b = 0; b < space.blocks.size(); ++b)
    idx = idx * space.blocks[b].option_count() + arch.choices[b];
  return idx;
}

Architecture architecture_at(const SearchSpace& space, std::size_t index) {
  if (index >= space_size(space)) throw ConfigError("architecture index out of range");
  Architecture a;
  a.choices.resize(space.blocks.size());
  for (std::size_t b = space.blocks.size(); b-- > 0;) {
    const std::size_t n = space.blocks[b].option_count();
    a.choices[b] = index % n;
    index /= n;
  }
  return a;
}

void validate_architecture(const SearchSpace& space, const Architecture& arch) {
  if (arch.choices.size() != space.blocks.size())
    throw ConfigError("architecture " + arch.id() + " has " + std::to_string(arch.choices.size()) +
                      " choices but space '" + space.name + "' has " +
                      std::to_string(space.blocks.size()) + " blocks");
  for (std::size_t b = 0; b < arch.choices.size(); ++b)
    if (arch.choices[b] >= space.blocks[b].option_count())
      throw ConfigError("architecture " + arch.id() + ": option " +
                        std::to_string(arch.choices[b]) + " out of range for block " +
                        std::to_string(b));
}

Architecture architecture_from_kernels(const SearchSpace& space,
                                       const std::vector<std::size_t>& kernels) {
  if (kernels.size() != space.blocks.size())
    throw ConfigError("expected " + std::to_string(space.blocks.size()) + " kernel sizes");
  Architecture a;
  for (std::size_t b = 0; b < kernels.size(); ++b) {
    const auto& opts = space.blocks[b].kernel_options;
    auto it = std::find(opts.begin(), opts.end(), kernels[b]);
    if (it == opts.end())
      throw ConfigError("kernel " + std::to_string(kernels[b]) + " is not an option of block " +
                        std::to_string(b) + " in space '" + space.name + "'");
    a.choices.push_back(static_cast<std::size_t>(it - opts.begin()));
  }
  return a;
}

std::vector<std::size_t> kernels_of(const SearchSpace& space, const Architecture& arch) {
  validate_architecture(space, arch);
  std::vector<std::size_t> k;
  for (std::size_t b = 0; b < arch.choices.size(); ++b)
    k.push_back(space.blocks[b].kernel_options[arch.choices[b]]);
  return k;
}

bool is_crippled(const SearchSpace& space, const Architecture& arch) {
  validate_architecture(space, arch);
  for (std::size_t b = 0; b < arch.choices.size(); ++b)
    if (space.blocks[b].is_zeroed(arch.choices[b])) return true;
  return false;
}

FeatureShape final_feature_shape(const SearchSpace& space, const Architecture& arch) {
  validate_architecture(space, arch);
  using ad::PadMode;
  FeatureShape s{space.stem.out_channels,
                 ad::conv_out_size(space.input_height, space.stem.kernel, space.stem.stride,
                                   PadMode::same_size),
                 ad::conv_out_size(space.input_width, space.stem.kernel, space.stem.stride,
                                   PadMode::same_size)};
  for (const ChoiceSpec& b : space.blocks) {
    s.channels = b.out_channels;
    s.height = ad::conv_out_size(s.height, 1, b.stride, PadMode::same_size);
    s.width = ad::conv_out_size(s.width, 1, b.stride, PadMode::same_size);
    if (b.pool_kernel > 0) {
      s.height = ad::conv_out_size(s.height, b.pool_kernel, b.pool_stride, PadMode::same_size);
      s.width = ad::conv_out_size(s.width, b.pool_kernel, b.pool_stride, PadMode::same_size);
    }
  }
  return s;
}

json to_json(const SearchSpace& space) {
  json blocks = json::array();
  for (const auto& b : space.blocks) {
    json jb{{"out_channels", b.out_channels},
            {"stride", b.stride},
            {"kernel_options", b.kernel_options}};
    if (!b.zeroed_options.empty()) jb["zeroed_options"] = b.zeroed_options;
    if (b.pool_kernel > 0) {
      jb["pool_kernel"] = b.pool_kernel;
      jb["pool_stride"] = b.pool_stride;
    }
    blocks.push_back(jb);
  }
  return json{{"name", space.name},
              {"input",
               {{"channels", space.input_channels},
                {"height", space.input_height},
                {"width", space.input_width}}},
              {"stem",
               {{"out_channels", space.stem.out_channels},
                {"kernel", space.stem.kernel},
                {"stride", space.stem.stride}}},
              {"blocks", blocks},
              {"pad_target", space.pad_target},
              {"head", {{"hidden", space.hidden}, {"actions", space.actions}}}};
}

SearchSpace search_space_from_json(const json& j) {
  SearchSpace s;
  try {
    s.name = j.value("name", std::string("custom"));
    const auto& in = j.at("input");
    s.input_channels = in.at("channels").get<std::size_t>();
    s.input_height = in.at("height").get<std::size_t>();
    s.input_width = in.at("width").get<std::size_t>();
    const auto& st = j.at("stem");
    s.stem = {st.at("out_channels").get<std::size_t>(), st.at("kernel").get<std::size_t>(),
              st.at("stride").get<std::size_t>()};
    for (const auto& jb : j.at("blocks")) {
      ChoiceSpec b;
      b.out_channels = jb.at("out_channels").get<std::size_t>();
      b.stride = jb.at("stride").get<std::size_t>();
      b.kernel_options = jb.at("kernel_options").get<std::vector<std::size_t>>();
      b.zeroed_options = jb.value("zeroed_options", std::vector<std::size_t>{});
      b.pool_kernel = jb.value("pool_kernel", std::size_t{0});
      b.pool_stride = jb.value("pool_stride", std::size_t{1});
      s.blocks.push_back(std::move(b));
    }
    s.pad_target = j.at("pad_target").get<std::size_t>();
    s.hidden = j.at("head").at("hidden").get<std::size_t>();
    s.actions = j.at("head").at("actions").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed search-space definition: ") + e.what());
  }
  s.validate();
  return s;
}

SearchSpace load_search_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open search-space file " + path);
  try {
    return search_space_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse search-space file " + path + ": " + e.what());
  }
}

void save_search_space(const SearchSpace& space, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write search-space file " + path);
  out << to_json(space).dump(2) << '\n';
}

namespace {

SearchSpace full_space(std::string name, std::vector<ChoiceSpec> blocks) {
  SearchSpace s;
  s.name = std::move(name);
  s.input_height = s.input_width = 84;
  s.stem = {32, 8, 4};
  s.blocks = std::move(blocks);
  s.pad_target = 121 * 64;
  s.hidden = 512;
  return s;
}

// Desk scale: 12x12 input, so the stride-4 stem leaves a 3x3 map and the
// flattened target is last_channels * 9.
constexpr std::size_t kDeskStem = 16;
constexpr std::size_t kDeskBlock = 32;
constexpr std::size_t kDeskHidden = 128;

SearchSpace desk_space(std::string name, std::vector<ChoiceSpec> blocks) {
  SearchSpace s;
  s.name = std::move(name);
  s.input_height = s.input_width = 12;
  s.stem = {kDeskStem, 8, 4};
  s.blocks = std::move(blocks);
  s.pad_target = s.last_channels() * 9;
  s.hidden = kDeskHidden;
  return s;
}

ChoiceSpec choice(std::size_t out, std::size_t stride, std::vector<std::size_t> kernels,
                  std::vector<std::size_t> zeroed = {}) {
  ChoiceSpec c;
  c.out_channels = out;
  c.stride = stride;
  c.kernel_options = std::move(kernels);
  c.zeroed_options = std::move(zeroed);
  return c;
}

std::vector<std::size_t> iota_kernels(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> k;
  for (std::size_t i = lo; i <= hi; ++i) k.push_back(i);
  return k;
}

}  // namespace

SearchSpace preset(const std::string& name) {
  SearchSpace s;
  if (name == "space1") {
    s = full_space(name, {choice(64, 2, iota_kernels(1, 5)), choice(64, 1, iota_kernels(1, 5))});
  } else if (name == "space2") {
    s = full_space(name, std::vector<ChoiceSpec>(5, choice(64, 1, {2, 5})));
  } else if (name == "nature_cnn") {
    s = full_space(name, {choice(64, 2, {4}), choice(64, 1, {3})});
  } else if (name == "desk_space1") {
    s = desk_space(name, {choice(kDeskBlock, 2, iota_kernels(1, 5)), choice(kDeskBlock, 1, iota_kernels(1, 5))});
  } else if (name == "desk_space2") {
    s = desk_space(name, std::vector<ChoiceSpec>(5, choice(kDeskBlock, 1, {2, 5})));
  } else if (name == "desk_nature_cnn") {
    s = desk_space(name, {choice(kDeskBlock, 2, {4}), choice(kDeskBlock, 1, {3})});
  } else if (name == "rigged_desk") {
    s.name = name;
    s.stem = {8, 8, 4};
    s.blocks = {choice(16, 1, {1, 3}), choice(16, 1, {1, 3, 5}, {0})};
    s.pad_target = 16 * 9;
    s.hidden = 64;
  } else {
    throw ConfigError("unknown search-space preset '" + name + "'");
  }
  s.validate();
  return s;
}

std::vector<std::string> preset_names() {
  return {"space1",          "space2",      "nature_cnn",   "desk_space1",
          "desk_space2",     "desk_nature_cnn", "rigged_desk"};
}

SearchSpace resolve_space(const std::string& name_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return preset(name_or_path);
  return load_search_space(name_or_path);
}

std::vector<NamedArchitecture> named_architectures() {
  return {
      {"nature_cnn", "space1", {4, 3}},
      {"spos_breakout_space1", "space1", {4, 5}},
      {"spos_freeway_space1", "space1", {3, 2}},
      {"spos_breakout_space2", "space2", {5, 5, 5, 2, 2}},
      {"spos_freeway_space2", "space2", {5, 5, 5, 5, 5}},
  };
}

}  // namespace nasrl::supernet
