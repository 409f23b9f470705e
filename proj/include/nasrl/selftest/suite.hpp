#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace nasrl::selftest {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Central-difference gradient checks on `networks` randomly generated small
// networks mixing conv, max-pool, linear, softmax and PPO-loss layers. Passes
// when every entry has relative error below `tolerance`.
CheckOutcome gradient_suite(std::size_t networks, std::uint64_t seed, double tolerance = 1e-4);

// compute_gae and ppo_loss against the scalar oracles on random batches.
CheckOutcome gae_oracle_suite(std::size_t batches, std::uint64_t seed, double tolerance = 1e-10);
CheckOutcome ppo_loss_oracle_suite(std::size_t batches, std::uint64_t seed,
                                   double tolerance = 1e-10);

// conv2d / maxpool2d forward passes against the direct window loops.
CheckOutcome conv_pool_oracle_suite(std::size_t cases, std::uint64_t seed);

// The active SIMD kernel table against the scalar one.
CheckOutcome simd_equivalence_suite(std::uint64_t seed);

// Monte-Carlo best-of-K against the exhaustive subset expectation (3 sigma).
CheckOutcome best_of_k_oracle_suite(std::size_t trials, std::uint64_t seed);

// Every suite above; writes one line per check to `log`.
std::vector<CheckOutcome> run_selftest(std::ostream& log);

}  // namespace nasrl::selftest
