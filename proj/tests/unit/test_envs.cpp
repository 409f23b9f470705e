#include <numeric>
#include <sstream>

#include "doctest.h"
#include "nasrl/envs/grid_games.hpp"
#include "nasrl/envs/presets.hpp"
#include "nasrl/envs/vec_env.hpp"
#include "nasrl/errors.hpp"
#include "nasrl/rng.hpp"

using namespace nasrl;
using namespace nasrl::envs;

namespace {

double random_episode(Env& env, std::uint64_t seed, Rng& rng) {
  env.reset(seed);
  double ret = 0;
  while (true) {
    auto r = env.step(rng.uniform_int(env.num_actions()));
    ret += r.reward;
    if (r.done) return ret;
  }
}

}  // namespace

TEST_SUITE("reset") {
  TEST_CASE("same seed gives identical observations") {
    GridBreakout env;
    auto a = env.reset(0);
    auto b = env.reset(0);
    CHECK(a == b);
  }

  TEST_CASE("freeway starts the agent on the bottom row with values in [0,1]") {
    GridFreeway env;
    auto obs = env.reset(7);
    CHECK(env.agent_row() == env.height() - 1);
    CHECK(obs.size() == 4 * 12 * 12);
    for (double v : obs.pixels) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(obs.frame(0)[(env.height() - 1) * env.width() + env.agent_col()] == 1.0);
  }

  TEST_CASE("different seeds give different layouts") {
    GridBreakout b;
    CHECK_FALSE(b.reset(0) == b.reset(1));
    GridFreeway f;
    CHECK_FALSE(f.reset(0) == f.reset(1));
  }
}

TEST_SUITE("step") {
  TEST_CASE("freeway without cars: always-up scores floor(length / rows)") {
    auto env = make_env("grid_freeway_nocars");
    auto& fw = dynamic_cast<GridFreeway&>(*env);
    env->reset(3);
    StepResult r;
    do r = env->step(0);
    while (!r.done);
    CHECK(*r.episode_return == double(512 / fw.rows_to_cross()));
    CHECK(*r.episode_return == env->max_return());
  }

  TEST_CASE("breakout: staying put loses the ball for zero return") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      GridBreakout env;
      env.reset(seed);
      StepResult r;
      do r = env.step(1);
      while (!r.done);
      CHECK(*r.episode_return == 0.0);
      CHECK(r.episode_length < 20);
    }
  }

  TEST_CASE("random policy earns under 5% of the maximum on both games") {
    Rng rng(123);
    for (const char* name : {"grid_breakout", "grid_freeway"}) {
      auto env = make_env(name);
      double total = 0;
      for (int e = 0; e < 100; ++e) total += random_episode(*env, 1000 + e, rng);
      CAPTURE(name);
      CHECK(total / 100 < 0.05 * env->max_return());
    }
  }

  TEST_CASE("contract errors") {
    GridFreeway env;
    CHECK_THROWS_AS(env.step(0), ContractError);  // before reset
    env.reset(0);
    CHECK_THROWS_AS(env.step(3), ContractError);
    StepResult r;
    do r = env.step(1);
    while (!r.done);
    CHECK_THROWS_AS(env.step(1), ContractError);
  }

  TEST_CASE("episode_return is present exactly when done") {
    GridBreakout env;
    env.reset(4);
    Rng rng(4);
    StepResult r;
    do {
      r = env.step(rng.uniform_int(3));
      CHECK(r.episode_return.has_value() == r.done);
    } while (!r.done);
  }

  TEST_CASE("frame stack shifts by one channel per step") {
    Rng rng(8);
    for (const char* name : {"grid_breakout", "grid_freeway"}) {
      auto env = make_env(name);
      auto prev = env->reset(8);
      for (int t = 0; t < 40 && !env->done(); ++t) {
        auto r = env->step(rng.uniform_int(3));
        for (std::size_t c = 0; c + 1 < kFrameStack; ++c) {
          auto a = prev.frame(c);
          auto b = r.observation.frame(c + 1);
          CHECK(std::equal(a.begin(), a.end(), b.begin()));
        }
        prev = r.observation;
      }
    }
  }

  TEST_CASE("same seed and actions replay bitwise, returns stay in bounds") {
    for (const char* name : {"grid_breakout", "grid_freeway"}) {
      auto trace = [&] {
        auto env = make_env(name);
        Rng rng(77);
        std::vector<double> out;
        for (int e = 0; e < 5; ++e) {
          env->reset(e);
          StepResult r;
          do {
            r = env->step(rng.uniform_int(3));
            out.insert(out.end(), r.observation.pixels.begin(), r.observation.pixels.end());
            out.push_back(r.reward);
          } while (!r.done);
          CHECK(*r.episode_return >= 0.0);
          CHECK(*r.episode_return <= env->max_return());
        }
        return out;
      };
      CHECK(trace() == trace());
    }
  }
}

TEST_SUITE("vec_step") {
  TEST_CASE("eight copies with the same seed and actions agree") {
    VecEnv venv(GridBreakout(), 8);
    std::vector<std::uint64_t> seeds(8, 5);
    venv.reset(seeds);
    std::vector<std::size_t> actions(8, 2);
    for (int t = 0; t < 30; ++t) {
      auto rs = venv.step(actions);
      for (std::size_t i = 1; i < 8; ++i) {
        CHECK(rs[i].observation == rs[0].observation);
        CHECK(rs[i].reward == rs[0].reward);
      }
    }
  }

  TEST_CASE("results come back in environment order") {
    VecEnv venv(GridFreeway(), 8);
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7};
    auto obs = venv.reset(seeds);
    for (std::size_t i = 0; i < 8; ++i) {
      GridFreeway single;
      CHECK(single.reset(i) == obs[i]);
    }
    std::vector<std::size_t> actions{0, 1, 2, 0, 1, 2, 0, 1};
    auto rs = venv.step(actions);
    for (std::size_t i = 0; i < 8; ++i) {
      GridFreeway single;
      single.reset(i);
      CHECK(single.step(actions[i]).observation == rs[i].observation);
    }
  }

  TEST_CASE("length mismatch") {
    VecEnv venv(GridFreeway(), 8);
    venv.reset(0);
    std::vector<std::size_t> actions(7, 0);
    CHECK_THROWS_AS(venv.step(actions), DimensionError);
  }

  TEST_CASE("episode counts match a sequential per-env replay") {
    const std::size_t steps = 10000;
    VecEnv venv(GridBreakout(), 8);
    venv.reset(42);
    Rng rng(42);
    std::vector<std::vector<std::size_t>> log(8);
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<std::size_t> actions(8);
      for (std::size_t i = 0; i < 8; ++i) log[i].push_back(actions[i] = rng.uniform_int(3));
      venv.step(actions);
    }
    std::size_t sequential = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      GridBreakout env;
      std::uint64_t base = derive_seed(42, i);
      std::size_t episode = 0;
      env.reset(base);
      for (std::size_t a : log[i])
        if (env.step(a).done) env.reset(derive_seed(base, ++episode));
      CHECK(episode == venv.episodes_finished(i));
      sequential += episode;
    }
    CHECK(venv.stats().episodes() == sequential);
    CHECK(venv.stats().total_steps() == steps * 8);
  }
}

TEST_SUITE("stats") {
  TEST_CASE("mean of [1,2,3] is 2") {
    EpisodeStats s;
    for (double v : {1.0, 2.0, 3.0}) s.push(v);
    CHECK(*s.mean() == 2.0);
  }

  TEST_CASE("no episodes yet is an absent value") { CHECK_FALSE(EpisodeStats().mean().has_value()); }

  TEST_CASE("only the last 100 episodes count") {
    EpisodeStats s;
    for (int i = 0; i < 150; ++i) s.push(i);
    CHECK(s.buffered() == 100);
    CHECK(s.episodes() == 150);
    CHECK(*s.mean() == doctest::Approx((50 + 149) / 2.0));
  }

  TEST_CASE("mean matches a recomputation from the persisted episode log") {
    std::stringstream log;
    VecEnv venv(GridBreakout(), 8);
    venv.set_episode_sink([&](const EpisodeRecord& r) { write_episode_record(log, r); });
    venv.reset(9);
    Rng rng(9);
    for (int t = 0; t < 3000; ++t) {
      std::vector<std::size_t> actions(8);
      for (auto& a : actions) a = rng.uniform_int(3);
      venv.step(actions);
    }
    auto records = read_episode_log(log);
    REQUIRE(records.size() == venv.stats().episodes());
    REQUIRE(records.size() > 100);
    double tail = 0;
    for (std::size_t i = records.size() - 100; i < records.size(); ++i) tail += records[i].episode_return;
    CHECK(*venv.stats().mean() == doctest::Approx(tail / 100).epsilon(1e-12));
  }
}
