#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "nasrl/autodiff/categorical.hpp"
#include "nasrl/autodiff/ops.hpp"
#include "nasrl/autodiff/optim.hpp"
#include "nasrl/errors.hpp"
#include "nasrl/rng.hpp"
#include "nasrl/selftest/oracles.hpp"

using namespace nasrl;
using namespace nasrl::ad;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool grad = false, double scale = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_SUITE("conv2d") {
  TEST_CASE("1x1 identity kernel reproduces the input") {
    auto x = Tensor::full({1, 3, 3}, 1.0);
    auto w = Tensor::full({1, 1, 1, 1}, 1.0);
    auto y = conv2d(x, w, 1, PadMode::same_size);
    CHECK(y.shape() == Shape{1, 3, 3});
    CHECK(to_vec(y) == to_vec(x));
  }

  TEST_CASE("same_size stride 1 keeps spatial size") {
    Rng rng(1);
    auto y = conv2d(random_tensor(rng, {4, 12, 12}), random_tensor(rng, {32, 4, 5, 5}), 1,
                    PadMode::same_size);
    CHECK(y.shape() == Shape{32, 12, 12});
  }

  TEST_CASE("kernel 8 stride 4 on 12x12 gives 3x3 and matches the direct convolution") {
    Rng rng(2);
    auto x = random_tensor(rng, {4, 12, 12});
    auto w = random_tensor(rng, {32, 4, 8, 8});
    auto y = conv2d(x, w, 4, PadMode::same_size);
    REQUIRE(y.shape() == Shape{32, 3, 3});  // ceil(12/4) = 3
    // (3-1)*4 + 8 - 12 = 4 cells of padding, 2 on each side.
    auto ref = selftest::reference_conv2d(x.data(), 4, 12, 12, w.data(), 32, 8, 4, 2, 2, 3, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }

  TEST_CASE("asymmetric same padding puts the extra cell bottom/right") {
    Rng rng(3);
    auto x = random_tensor(rng, {2, 5, 5});
    auto w = random_tensor(rng, {3, 2, 2, 2});
    auto y = conv2d(x, w, 1, PadMode::same_size);
    // Total padding 1: none on top/left.
    auto ref = selftest::reference_conv2d(x.data(), 2, 5, 5, w.data(), 3, 2, 1, 0, 0, 5, 5);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }

  TEST_CASE("batched input equals per-sample calls, bias included") {
    Rng rng(4);
    auto x = random_tensor(rng, {3, 2, 6, 6});
    auto w = random_tensor(rng, {4, 2, 3, 3});
    auto b = random_tensor(rng, {4});
    auto y = conv2d(x, w, b, 2, PadMode::same_size);
    REQUIRE(y.shape() == Shape{3, 4, 3, 3});
    for (std::size_t n = 0; n < 3; ++n) {
      auto xn = Tensor::from({2, 6, 6}, std::vector<double>(x.data().begin() + n * 72,
                                                            x.data().begin() + (n + 1) * 72));
      auto yn = conv2d(xn, w, b, 2, PadMode::same_size);
      for (std::size_t i = 0; i < yn.numel(); ++i) CHECK(y[n * 36 + i] == yn[i]);
    }
  }

  TEST_CASE("valid mode output size") {
    Rng rng(5);
    auto y = conv2d(random_tensor(rng, {1, 7, 7}), random_tensor(rng, {1, 1, 3, 3}), 2, PadMode::valid);
    CHECK(y.shape() == Shape{1, 3, 3});
    CHECK_THROWS_AS(conv2d(random_tensor(rng, {1, 2, 2}), random_tensor(rng, {1, 1, 3, 3}), 1,
                           PadMode::valid),
                    ContractError);
  }

  TEST_CASE("channel mismatch is a dimension error") {
    Rng rng(6);
    CHECK_THROWS_AS(conv2d(random_tensor(rng, {3, 4, 4}), random_tensor(rng, {2, 4, 3, 3}), 1,
                           PadMode::same_size),
                    DimensionError);
  }

  TEST_CASE("same_size output is ceil(H/stride) for every kernel 1..8") {
    Rng rng(7);
    for (std::size_t k = 1; k <= 8; ++k)
      for (std::size_t s = 1; s <= 4; ++s)
        for (std::size_t h : {3u, 5u, 12u}) {
          auto y = conv2d(random_tensor(rng, {1, h, h}), random_tensor(rng, {1, 1, k, k}), s,
                          PadMode::same_size);
          CHECK(y.dim(1) == (h + s - 1) / s);
          auto p = maxpool2d(random_tensor(rng, {1, h, h}), k, s);
          CHECK(p.dim(1) == (h + s - 1) / s);
        }
  }
}

TEST_SUITE("maxpool2d") {
  TEST_CASE("2x2 example keeps the maximum") {
    auto x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    auto y = maxpool2d(x, 2, 1);
    bool has4 = false;
    for (double v : y.data()) has4 = has4 || v == 4.0;
    CHECK(has4);
  }

  TEST_CASE("constant input stays constant") {
    auto y = maxpool2d(Tensor::full({2, 5, 5}, 0.3), 3, 1);
    for (double v : y.data()) CHECK(v == 0.3);
  }

  TEST_CASE("random 6x6, k=3, stride=2 matches brute-force window scan") {
    Rng rng(8);
    auto x = random_tensor(rng, {1, 6, 6});
    auto y = maxpool2d(x, 3, 2);
    REQUIRE(y.shape() == Shape{1, 3, 3});
    // (3-1)*2 + 3 - 6 = 1 padding cell, on the bottom/right.
    auto ref = selftest::reference_maxpool(x.data(), 1, 6, 6, 3, 2, 0, 0, 3, 3);
    CHECK(to_vec(y) == ref);
  }

  TEST_CASE("gradient goes to the lowest flat index on ties") {
    auto x = Tensor::from({1, 2, 2}, {5, 5, 5, 1}, true);
    auto y = maxpool2d(x, 2, 2, PadMode::valid);
    backward(sum(y));
    CHECK(to_vec(Tensor::from({4}, {x.grad().begin(), x.grad().end()})) == std::vector<double>{1, 0, 0, 0});
  }
}

TEST_SUITE("linear") {
  TEST_CASE("identity weight and zero bias") {
    auto x = Tensor::from({3}, {1.5, -2, 4});
    auto w = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(to_vec(linear(x, w, Tensor::zeros({3}))) == to_vec(x));
  }

  TEST_CASE("zero weight returns the bias") {
    auto b = Tensor::from({2}, {0.25, -7});
    CHECK(to_vec(linear(Tensor::full({4}, 3.0), Tensor::zeros({2, 4}), b)) == to_vec(b));
  }

  TEST_CASE("random 4->3 map matches explicit dot products") {
    Rng rng(9);
    auto x = random_tensor(rng, {4});
    auto w = random_tensor(rng, {3, 4});
    auto b = random_tensor(rng, {3});
    auto y = linear(x, w, b);
    for (std::size_t i = 0; i < 3; ++i) {
      double acc = b[i];
      for (std::size_t j = 0; j < 4; ++j) acc += w[i * 4 + j] * x[j];
      CHECK(std::abs(y[i] - acc) < 1e-12);
    }
  }

  TEST_CASE("dimension errors") {
    CHECK_THROWS_AS(linear(Tensor::zeros({5}), Tensor::zeros({3, 4}), Tensor::zeros({3})),
                    DimensionError);
    CHECK_THROWS_AS(linear(Tensor::zeros({4}), Tensor::zeros({3, 4}), Tensor::zeros({2})),
                    DimensionError);
  }
}

TEST_SUITE("categorical") {
  TEST_CASE("uniform logits have entropy ln n") {
    Categorical d(Tensor::zeros({4}));
    CHECK(d.entropy().item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }

  TEST_CASE("saturated logits almost always pick action 0") {
    Categorical d(Tensor::from({2}, {1000, 0}));
    Rng rng(10);
    int zeros = 0;
    for (int i = 0; i < 10000; ++i) zeros += d.sample_one(rng) == 0;
    CHECK(zeros >= 9990);
  }

  TEST_CASE("empirical frequencies match softmax within 3 sigma") {
    Rng rng(11);
    auto logits = random_tensor(rng, {5}, false, 2.0);
    std::vector<double> p(5);
    double z = 0;
    for (std::size_t i = 0; i < 5; ++i) z += std::exp(logits[i]);
    for (std::size_t i = 0; i < 5; ++i) p[i] = std::exp(logits[i]) / z;
    Categorical d(logits);
    const int draws = 100000;
    std::vector<int> counts(5, 0);
    for (int i = 0; i < draws; ++i) ++counts[d.sample_one(rng)];
    for (std::size_t i = 0; i < 5; ++i) {
      const double sigma = std::sqrt(p[i] * (1 - p[i]) / draws);
      CHECK(std::abs(counts[i] / double(draws) - p[i]) <= 3 * sigma);
    }
  }

  TEST_CASE("exp(log_prob) sums to one") {
    Rng rng(12);
    Categorical d(random_tensor(rng, {3, 6}, false, 5.0));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t a = 0; a < 6; ++a) s += std::exp(d.log_probs()[r * 6 + a]);
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }

  TEST_CASE("non-finite logits are rejected") {
    CHECK_THROWS_AS(Categorical(Tensor::from({2}, {0.0, std::nan("")})), NumericError);
    CHECK_THROWS_AS(Categorical(Tensor::from({2}, {0.0, INFINITY})), NumericError);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("grad of sum is all ones") {
    Rng rng(13);
    auto x = random_tensor(rng, {2, 3, 4}, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }

  TEST_CASE("x*x at 3 has gradient 6, and repeated calls accumulate") {
    auto x = Tensor::scalar(3.0, true);
    backward(mul(x, x));
    CHECK(x.grad()[0] == 6.0);
    backward(mul(x, x));
    CHECK(x.grad()[0] == 12.0);
    x.zero_grad();
    CHECK_FALSE(x.has_grad());
  }

  TEST_CASE("non-scalar loss is a contract error") {
    CHECK_THROWS_AS(backward(Tensor::zeros({2}, true)), ContractError);
  }

  TEST_CASE("every reachable tensor gets a grad") {
    auto a = Tensor::from({2}, {1, 2}, true);
    auto b = Tensor::from({2}, {3, 4}, true);
    auto c = mul(a, b);
    backward(sum(c));
    CHECK(a.has_grad());
    CHECK(b.has_grad());
    CHECK(c.has_grad());
  }

  TEST_CASE("no-grad mode records nothing") {
    auto a = Tensor::from({2}, {1, 2}, true);
    NoGradGuard guard;
    auto c = square(a);
    CHECK_FALSE(c.requires_grad());
  }

  TEST_CASE("2-conv-1-linear network matches central differences") {
    Rng rng(14);
    auto x = random_tensor(rng, {2, 2, 6, 6});
    std::vector<Tensor> params{random_tensor(rng, {3, 2, 3, 3}, true, 0.5),
                               random_tensor(rng, {3}, true, 0.5),
                               random_tensor(rng, {4, 3, 2, 2}, true, 0.5),
                               random_tensor(rng, {4}, true, 0.5),
                               random_tensor(rng, {3, 36}, true, 0.3),
                               random_tensor(rng, {3}, true, 0.3)};
    auto loss_fn = [&] {
      auto h = ad::tanh(conv2d(x, params[0], params[1], 1, PadMode::same_size));
      h = ad::tanh(conv2d(h, params[2], params[3], 2, PadMode::same_size));
      auto y = linear(reshape(h, {2, 36}), params[4], params[5]);
      return sum(square(y));
    };
    auto r = selftest::check_gradients(loss_fn, params);
    CHECK(r.entries == 54 + 3 + 48 + 4 + 108 + 3);
    CHECK(r.max_rel_error < 1e-4);
  }

  TEST_CASE("relu, minimum, clamp, slice gradients away from kinks") {
    std::vector<Tensor> params{Tensor::from({4}, {0.7, -0.4, 1.3, -2.0}, true),
                               Tensor::from({4}, {0.2, 0.9, -1.1, 0.5}, true)};
    auto loss_fn = [&] {
      auto r = relu(params[0]);
      auto m = minimum(params[0], params[1]);
      auto c = clamp(params[1], -1.0, 0.8);
      auto s = slice(mul(r, c), 1, 3);
      return add(sum(mul(m, m)), add(sum(s), mean(sigmoid(params[0]))));
    };
    auto r = selftest::check_gradients(loss_fn, params);
    CHECK(r.max_rel_error < 1e-6);
  }

  TEST_CASE("identical inputs give bitwise identical outputs and gradients") {
    auto run = [] {
      Rng rng(99);
      auto x = random_tensor(rng, {2, 3, 7, 7});
      auto w = random_tensor(rng, {5, 3, 3, 3}, true);
      auto y = maxpool2d(relu(conv2d(x, w, 1, PadMode::same_size)), 2, 2);
      auto loss = sum(square(y));
      backward(loss);
      auto out = to_vec(y);
      out.push_back(loss.item());
      out.insert(out.end(), w.grad().begin(), w.grad().end());
      return out;
    };
    CHECK(run() == run());
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("cosine schedule endpoints and midpoint") {
    CosineSchedule s{0.00025, 1000};
    CHECK(s.rate(0) == 0.00025);
    CHECK(std::abs(s.rate(1000)) < 1e-20);
    CHECK(s.rate(500) == doctest::Approx(0.000125).epsilon(1e-12));
    CHECK_THROWS_AS(s.rate(1001), ContractError);
  }

  TEST_CASE("cosine schedule is non-increasing") {
    CosineSchedule s{0.001, 97};
    for (std::size_t t = 0; t < 97; ++t) CHECK(s.rate(t + 1) <= s.rate(t));
    for (std::size_t t = 0; t <= 97; ++t) CHECK(s.rate(t) >= 0.0);
  }

  TEST_CASE("zero gradient on fresh state leaves parameters unchanged") {
    auto p = Tensor::from({3}, {1, 2, 3}, true);
    p.mutable_grad();  // zero-filled gradient
    Adam opt({0.1, 10});
    std::vector<Tensor> ps{p};
    opt.step(ps);
    CHECK(to_vec(p) == std::vector<double>{1, 2, 3});
  }

  TEST_CASE("zero gradient decays existing moments") {
    std::vector<double> param{0.0};
    AdamMoments m;
    adam_update(param, std::vector<double>{1.0}, m, 0.0, 0.9, 0.999, 1e-8);
    const double m1 = m.first[0], v1 = m.second[0];
    adam_update(param, std::vector<double>{0.0}, m, 0.0, 0.9, 0.999, 1e-8);
    CHECK(m.first[0] == doctest::Approx(0.9 * m1));
    CHECK(m.second[0] == doctest::Approx(0.999 * v1));
  }

  TEST_CASE("first step with unit gradient moves by about the rate") {
    auto p = Tensor::scalar(5.0, true);
    p.mutable_grad()[0] = 1.0;
    Adam opt({0.01, 10});
    std::vector<Tensor> ps{p};
    opt.step(ps);
    CHECK(p.item() == doctest::Approx(5.0 - 0.01).epsilon(1e-6));
    CHECK(opt.step_count() == 1);
  }

  TEST_CASE("shape mismatch is a dimension error") {
    std::vector<double> param(3, 0.0);
    AdamMoments m;
    CHECK_THROWS_AS(adam_update(param, std::vector<double>(2, 0.0), m, 0.1, 0.9, 0.999, 1e-8),
                    DimensionError);
  }

  TEST_CASE("100 steps on (x-2)^2 from 0 land near 2 and match a hand-rolled update") {
    const double rate = 0.1;
    auto x = Tensor::scalar(0.0, true);
    Adam opt({rate, 100});
    std::vector<Tensor> ps{x};
    for (int i = 0; i < 100; ++i) {
      x.zero_grad();
      backward(square(add_scalar(x, -2.0)));
      opt.step(ps);
    }
    // Independent replay of the update rule.
    double xr = 0, m = 0, v = 0;
    for (int t = 1; t <= 100; ++t) {
      const double g = 2 * (xr - 2);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double lr = rate * 0.5 * (1 + std::cos(std::numbers::pi * (t - 1) / 100.0));
      xr -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(x.item() == doctest::Approx(xr).epsilon(1e-12));
    CHECK(std::abs(x.item() - 2.0) < 0.1);
  }

  TEST_CASE("step budget is enforced") {
    auto p = Tensor::scalar(0.0, true);
    Adam opt({0.1, 1});
    std::vector<Tensor> ps{p};
    opt.step(ps);
    CHECK_THROWS_AS(opt.step(ps), ContractError);
  }

  TEST_CASE("gradient norm clipping") {
    auto a = Tensor::from({2}, {0, 0}, true);
    a.mutable_grad()[0] = 3;
    a.mutable_grad()[1] = 4;
    std::vector<Tensor> ps{a};
    CHECK(clip_grad_norm(ps, 0.5) == doctest::Approx(5.0));
    CHECK(a.grad()[0] == doctest::Approx(0.3));
    CHECK(a.grad()[1] == doctest::Approx(0.4));
  }
}
