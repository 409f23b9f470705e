#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "nasrl/autodiff/ops.hpp"
#include "nasrl/autodiff/optim.hpp"
#include "nasrl/errors.hpp"
#include "nasrl/rng.hpp"
#include "nasrl/supernet/supernet.hpp"

using namespace nasrl;
using namespace nasrl::supernet;
using ad::Tensor;

namespace {

Tensor random_obs(Rng& rng, std::size_t n, std::size_t h = 12, std::size_t w = 12) {
  std::vector<double> v(n * 4 * h * w);
  for (double& x : v) x = rng.uniform();
  return Tensor::from({n, 4, h, w}, std::move(v));
}

std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

SearchSpace random_space(Rng& rng) {
  SearchSpace s;
  s.name = "random";
  s.stem = {4, 3, 4};
  const std::size_t blocks = 1 + rng.uniform_int(6);
  for (std::size_t b = 0; b < blocks; ++b) {
    ChoiceSpec c;
    c.out_channels = 4;
    const std::size_t opts = 1 + rng.uniform_int(5);
    for (std::size_t k = 1; k <= opts; ++k) c.kernel_options.push_back(k);
    s.blocks.push_back(c);
  }
  s.pad_target = 4 * 9;
  s.hidden = 8;
  return s;
}

}  // namespace

TEST_SUITE("space_size") {
  TEST_CASE("full-scale presets: 25 and 32 architectures") {
    CHECK(space_size(preset("space1")) == 25);
    CHECK(space_size(preset("space2")) == 32);
    CHECK(space_size(preset("desk_space1")) == 25);
    CHECK(space_size(preset("desk_space2")) == 32);
  }

  TEST_CASE("single block with one option") {
    SearchSpace s = preset("desk_space1");
    s.blocks = {s.blocks[0]};
    s.blocks[0].kernel_options = {3};
    s.pad_target = s.last_channels() * 9;
    CHECK(space_size(s) == 1);
  }
}

TEST_SUITE("enumerate") {
  TEST_CASE("space 1 is lexicographic from (0,0) to (4,4)") {
    auto all = enumerate(preset("space1"));
    REQUIRE(all.size() == 25);
    CHECK(all.front().choices == std::vector<std::size_t>{0, 0});
    CHECK(all[1].choices == std::vector<std::size_t>{0, 1});
    CHECK(all.back().choices == std::vector<std::size_t>{4, 4});
    CHECK(std::is_sorted(all.begin(), all.end()));
  }

  TEST_CASE("space 2 yields 32 distinct 5-bit patterns") {
    auto all = enumerate(preset("space2"));
    std::set<std::string> ids;
    for (const auto& a : all) {
      CHECK(a.choices.size() == 5);
      for (auto c : a.choices) CHECK(c <= 1);
      ids.insert(a.id());
    }
    CHECK(ids.size() == 32);
  }

  TEST_CASE("every enumerated architecture validates") {
    for (const char* name : {"space1", "space2", "desk_space1", "desk_space2", "rigged_desk"}) {
      auto space = preset(name);
      for (const auto& a : enumerate(space)) CHECK_NOTHROW(validate_architecture(space, a));
    }
  }

  TEST_CASE("cap exceeded is refused with a pointer to sampling") {
    try {
      enumerate(preset("space2"), 16);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("sampling") != std::string::npos);
    }
  }

  TEST_CASE("property: length equals space_size and indices round-trip on random spaces") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
      SearchSpace s = random_space(rng);
      auto all = enumerate(s);
      REQUIRE(all.size() == space_size(s));
      for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(enumeration_index(s, all[i]) == i);
        CHECK(architecture_at(s, i) == all[i]);
      }
    }
  }
}

TEST_SUITE("architecture") {
  TEST_CASE("id is dash-joined and parses back") {
    Architecture a{{3, 0, 4}};
    CHECK(a.id() == "3-0-4");
    CHECK(Architecture::parse("3-0-4") == a);
    CHECK_THROWS_AS(Architecture::parse("3--4"), ConfigError);
    CHECK_THROWS_AS(Architecture::parse("a-1"), ConfigError);
  }

  TEST_CASE("invalid architectures are rejected") {
    auto s = preset("space1");
    CHECK_THROWS_AS(validate_architecture(s, Architecture{{0}}), ConfigError);
    CHECK_THROWS_AS(validate_architecture(s, Architecture{{0, 5}}), ConfigError);
    SharedWeights w(preset("desk_space1"), 0);
    CHECK_THROWS_AS(instantiate(w, Architecture{{5, 0}}), ConfigError);
  }

  TEST_CASE("kernel sizes map to option indices") {
    auto s = preset("space1");
    auto a = architecture_from_kernels(s, {4, 3});
    CHECK(a.choices == std::vector<std::size_t>{3, 2});
    CHECK(kernels_of(s, a) == std::vector<std::size_t>{4, 3});
    CHECK_THROWS_AS(architecture_from_kernels(s, {6, 3}), ConfigError);
  }

  TEST_CASE("crippled architectures in the rigged space") {
    auto s = preset("rigged_desk");
    std::size_t crippled = 0;
    for (const auto& a : enumerate(s)) crippled += is_crippled(s, a);
    CHECK(space_size(s) == 6);
    CHECK(crippled == 2);
  }
}

TEST_SUITE("space definition") {
  TEST_CASE("invariant violations are config errors") {
    auto s = preset("desk_space1");
    auto dup = s;
    dup.blocks[0].kernel_options = {1, 1};
    CHECK_THROWS_AS(dup.validate(), ConfigError);
    auto empty = s;
    empty.blocks[1].kernel_options.clear();
    CHECK_THROWS_AS(empty.validate(), ConfigError);
    auto indivisible = s;
    indivisible.pad_target = s.last_channels() * 9 + 1;
    CHECK_THROWS_AS(indivisible.validate(), ConfigError);
    auto nonsquare = s;
    nonsquare.pad_target = s.last_channels() * 8;
    CHECK_THROWS_AS(nonsquare.validate(), ConfigError);
    CHECK_THROWS_AS(preset("no_such_space"), ConfigError);
  }

  TEST_CASE("JSON round trip through a file") {
    const auto path = std::filesystem::temp_directory_path() / "nasrl_space_roundtrip.json";
    for (const auto& name : preset_names()) {
      auto s = preset(name);
      save_search_space(s, path.string());
      auto back = load_search_space(path.string());
      CHECK(to_json(back) == to_json(s));
      CHECK(resolve_space(path.string()).name == name);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_search_space("/nonexistent/space.json"), ConfigError);
  }

  TEST_CASE("malformed definitions are config errors") {
    CHECK_THROWS_AS(search_space_from_json(nlohmann::json{{"name", "x"}}), ConfigError);
    auto j = to_json(preset("desk_space1"));
    j["blocks"][0]["kernel_options"] = nlohmann::json::array();
    CHECK_THROWS_AS(search_space_from_json(j), ConfigError);
  }
}

TEST_SUITE("full-scale structure") {
  TEST_CASE("reference architectures instantiate in their spaces") {
    for (const auto& na : named_architectures()) {
      CAPTURE(na.name);
      auto space = preset(na.space);
      auto arch = architecture_from_kernels(space, na.kernels);
      SharedWeights w(space, 0, WeightInit::zeros);
      CHECK_NOTHROW(instantiate(w, arch));
    }
    auto nature = named_architectures().front();
    CHECK(nature.kernels == std::vector<std::size_t>{4, 3});
  }

  TEST_CASE("84x84 input flattens to exactly 121*64 for every architecture") {
    for (const char* name : {"space1", "space2"}) {
      auto space = preset(name);
      CHECK(space.pad_target == 7744);
      for (const auto& arch : enumerate(space)) {
        auto shape = final_feature_shape(space, arch);
        auto feat = Tensor::zeros({shape.channels, shape.height, shape.width});
        CHECK(ad::pad_to_exact(feat, space.pad_target).numel() == 7744);
      }
    }
    auto s1 = final_feature_shape(preset("space1"), Architecture{{0, 0}});
    CHECK(s1.channels == 64);
    CHECK(s1.height == 11);
    CHECK(s1.width == 11);
  }
}

TEST_SUITE("pad_to_exact") {
  TEST_CASE("already T x T: flatten only") {
    Rng rng(3);
    std::vector<double> v(2 * 3 * 3);
    for (double& x : v) x = rng.uniform();
    auto t = Tensor::from({2, 3, 3}, v);
    CHECK(to_vec(ad::pad_to_exact(t, 18)) == v);
  }

  TEST_CASE("11x11x64 at 121*64 is an unchanged flatten") {
    Rng rng(4);
    std::vector<double> v(64 * 121);
    for (double& x : v) x = rng.uniform(0.1, 1.0);
    auto out = ad::pad_to_exact(Tensor::from({64, 11, 11}, v), 121 * 64);
    CHECK(out.numel() == 7744);
    CHECK(to_vec(out) == v);
  }

  TEST_CASE("64x9x9 into 11x11: values land at the centred offsets") {
    Rng rng(5);
    std::vector<double> v(64 * 81);
    for (double& x : v) x = rng.uniform(0.1, 1.0);
    auto out = ad::pad_to_exact(Tensor::from({64, 9, 9}, v), 121 * 64);
    REQUIRE(out.numel() == 7744);
    std::vector<double> expected(7744, 0.0);
    for (std::size_t c = 0; c < 64; ++c)
      for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j)
          expected[c * 121 + (i + 1) * 11 + (j + 1)] = v[c * 81 + i * 9 + j];
    CHECK(to_vec(out) == expected);
  }

  TEST_CASE("larger maps are centre-cropped") {
    std::vector<double> v(25);
    for (std::size_t i = 0; i < 25; ++i) v[i] = double(i);
    auto out = ad::pad_to_exact(Tensor::from({1, 5, 5}, v), 9);
    CHECK(to_vec(out) == std::vector<double>{6, 7, 8, 11, 12, 13, 16, 17, 18});
  }

  TEST_CASE("non-square per-channel target is a config error") {
    CHECK_THROWS_AS(ad::pad_to_exact(Tensor::zeros({2, 3, 3}), 16), ConfigError);
    CHECK_THROWS_AS(ad::pad_to_exact(Tensor::zeros({2, 3, 3}), 9), ConfigError);
  }
}

TEST_SUITE("shared weights") {
  TEST_CASE("weight set count is options plus fixed layers") {
    SharedWeights w1(preset("desk_space1"), 0);
    CHECK(w1.weight_set_count() == 10 + 4);
    SharedWeights w2(preset("desk_space2"), 0);
    CHECK(w2.weight_set_count() == 10 + 4);
    CHECK(w2.all_parameters().size() == 2 * w2.weight_set_count());
  }

  TEST_CASE("instantiating twice yields views onto the same storage") {
    SharedWeights w(preset("desk_space1"), 1);
    Architecture a{{2, 3}};
    auto p1 = instantiate(w, a).parameters();
    auto p2 = instantiate(w, a).parameters();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].id() == p2[i].id());
  }

  TEST_CASE("orthogonal init: rows orthonormal up to gain") {
    Rng rng(6);
    auto m = orthogonal_matrix(4, 10, 2.0, rng);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double d = 0;
        for (std::size_t k = 0; k < 10; ++k) d += m[i * 10 + k] * m[j * 10 + k];
        CHECK(d == doctest::Approx(i == j ? 4.0 : 0.0).epsilon(1e-12).scale(1.0));
      }
    auto tall = orthogonal_matrix(10, 4, 1.0, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      double d = 0;
      for (std::size_t k = 0; k < 10; ++k) d += tall[k * 4 + i] * tall[k * 4 + i];
      CHECK(d == doctest::Approx(1.0));
    }
  }

  TEST_CASE("same seed gives identical weights, different seeds differ") {
    auto space = preset("desk_space2");
    CHECK(SharedWeights(space, 9).snapshot() == SharedWeights(space, 9).snapshot());
    CHECK(SharedWeights(space, 9).snapshot() != SharedWeights(space, 10).snapshot());
  }

  TEST_CASE("clone owns separate storage") {
    SharedWeights w(preset("desk_space1"), 2);
    auto c = w.clone();
    CHECK(c.snapshot() == w.snapshot());
    c.all_parameters()[0].mutable_data()[0] += 1.0;
    CHECK(c.snapshot() != w.snapshot());
  }
}

TEST_SUITE("forward") {
  TEST_CASE("same architecture twice gives identical outputs") {
    Rng rng(7);
    SharedWeights w(preset("desk_space1"), 3);
    auto obs = random_obs(rng, 5);
    auto a = instantiate(w, Architecture{{1, 4}}).forward(obs);
    auto b = instantiate(w, Architecture{{1, 4}}).forward(obs);
    CHECK(to_vec(a.logits) == to_vec(b.logits));
    CHECK(to_vec(a.value) == to_vec(b.value));
    CHECK(a.logits.shape() == ad::Shape{5, 3});
    CHECK(a.value.shape() == ad::Shape{5});
  }

  TEST_CASE("architectures differing in one block disagree on random input") {
    Rng rng(8);
    SharedWeights w(preset("desk_space1"), 4);
    auto obs = random_obs(rng, 3);
    auto a = instantiate(w, Architecture{{1, 4}}).forward(obs);
    auto b = instantiate(w, Architecture{{1, 2}}).forward(obs);
    CHECK(to_vec(a.value) != to_vec(b.value));
  }

  TEST_CASE("zero weights give uniform actions and zero value") {
    Rng rng(9);
    SharedWeights w(preset("desk_space1"), 0, WeightInit::zeros);
    auto out = instantiate(w, Architecture{{0, 0}}).forward(random_obs(rng, 2));
    for (double l : out.logits.data()) CHECK(l == 0.0);
    for (double v : out.value.data()) CHECK(v == 0.0);
  }

  TEST_CASE("every architecture flattens a 4x12x12 input to pad_target") {
    Rng rng(10);
    auto obs = random_obs(rng, 1);
    for (const char* name : {"desk_space1", "desk_space2", "space1", "space2"}) {
      auto space = preset(name);
      SharedWeights w(space, 0, WeightInit::zeros);
      for (const auto& arch : enumerate(space)) {
        auto f = instantiate(w, arch).features(obs);
        CHECK(f.shape() == ad::Shape{1, space.pad_target});
      }
    }
  }

  TEST_CASE("wrong channel count is a dimension error") {
    SharedWeights w(preset("desk_space1"), 0);
    CHECK_THROWS_AS(instantiate(w, Architecture{{0, 0}}).forward(Tensor::zeros({1, 3, 12, 12})),
                    DimensionError);
  }

  TEST_CASE("gradient reaches the selected options only") {
    Rng rng(11);
    SharedWeights w(preset("desk_space1"), 5);
    Architecture arch{{2, 1}};
    auto out = instantiate(w, arch).forward(random_obs(rng, 4));
    ad::backward(ad::mean(out.logits));
    const auto& space = w.space();
    for (std::size_t b = 0; b < space.blocks.size(); ++b)
      for (std::size_t o = 0; o < space.blocks[b].option_count(); ++o) {
        const Tensor& weight = w.option(b, o).weight;
        double norm = 0;
        if (weight.has_grad())
          for (double g : weight.grad()) norm += g * g;
        CAPTURE(b);
        CAPTURE(o);
        if (o == arch.choices[b])
          CHECK(norm > 0.0);
        else
          CHECK(norm == 0.0);
      }
  }

  TEST_CASE("an optimizer step through one architecture leaves other options bitwise unchanged") {
    Rng rng(12);
    SharedWeights w(preset("desk_space2"), 6);
    auto before = w.snapshot();
    Architecture arch{{0, 1, 0, 1, 1}};
    auto net = instantiate(w, arch);
    auto out = net.forward(random_obs(rng, 4));
    ad::backward(ad::add(ad::mean(out.logits), ad::mean(out.value)));
    auto params = w.all_parameters();
    ad::Adam opt(ad::CosineSchedule{1e-2, 10});
    opt.step(params);
    auto after = w.snapshot();
    std::set<const void*> selected;
    for (const auto& p : net.parameters()) selected.insert(p.id());
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (selected.count(params[i].id()))
        continue;
      CHECK(after[i] == before[i]);
    }
    CHECK(after[0] != before[0]);
  }

  TEST_CASE("crippled option outputs zeros regardless of input") {
    Rng rng(13);
    SharedWeights w(preset("rigged_desk"), 7);
    auto net = instantiate(w, Architecture{{1, 0}});
    auto a = net.forward(random_obs(rng, 2));
    auto b = net.forward(random_obs(rng, 2));
    CHECK(to_vec(a.logits) == to_vec(b.logits));
    auto feat = net.features(random_obs(rng, 1));
    for (double f : feat.data()) CHECK(f == 0.0);
  }
}
