#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "mtir/ops.hpp"
#include "mtir/rng.hpp"

using namespace mtir;
using ops::BNMode;

namespace {

using TP = TensorPtr<double>;
using Builder = std::function<TP(TapeT<double>&)>;

TP rand_tensor(Rng& rng, std::vector<int> shape, bool grad = true,
               double lo = -1.0, double hi = 1.0) {
  auto t = make_tensor<double>(std::move(shape), grad);
  for (auto& x : t->v) x = rng.uniform(lo, hi);
  return t;
}

// values bounded away from zero so relu kinks sit outside the probe radius
TP rand_tensor_nonzero(Rng& rng, std::vector<int> shape) {
  auto t = make_tensor<double>(std::move(shape), true);
  for (auto& x : t->v) {
    double m = rng.uniform(0.05, 1.0);
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// Central finite differences against the recorded backward pass. Returns
// the worst relative error across every element of every input.
double fd_max_rel_err(const Builder& f, const std::vector<TP>& inputs,
                      double h = 1e-3) {
  for (const auto& p : inputs) {
    p->ensure_grad();
    p->zero_grad();
  }
  TapeT<double> tape;
  auto loss = f(tape);
  REQUIRE(loss->is_scalar());
  REQUIRE(loss->requires_grad);
  tape.backward(loss);

  TapeT<double> dead;
  dead.set_enabled(false);
  double worst = 0.0;
  for (const auto& p : inputs) {
    if (!p->requires_grad) continue;
    REQUIRE(int64_t(p->g.size()) == p->numel());
    for (int64_t i = 0; i < p->numel(); ++i) {
      double keep = p->v[i];
      p->v[i] = keep + h;
      double lp = f(dead)->v[0];
      p->v[i] = keep - h;
      double lm = f(dead)->v[0];
      p->v[i] = keep;
      double fd = (lp - lm) / (2.0 * h);
      double err = std::fabs(p->g[i] - fd) /
                   std::max({std::fabs(p->g[i]), std::fabs(fd), 1.0});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

TP weighted_sum(TapeT<double>& t, const TP& x, const TP& w) {
  return ops::sum_all(t, ops::mul(t, x, w));
}

constexpr double kGradTol = 1e-4;

}  // namespace

TEST_CASE("gradients: matmul") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto a = rand_tensor(rng, {4, 6});
    auto b = rand_tensor(rng, {6, 5});
    auto w = rand_tensor(rng, {4, 5}, false);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::matmul(t, a, b), w);
              },
              {a, b}) < kGradTol);
  }
}

TEST_CASE("gradients: add, mul, scale, bias_add") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto a = rand_tensor(rng, {3, 7});
    auto b = rand_tensor(rng, {3, 7});
    auto w = rand_tensor(rng, {3, 7}, false);
    auto bias = rand_tensor(rng, {7});
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                auto y = ops::add(t, ops::mul(t, a, b), b);
                y = ops::bias_add(t, ops::scale(t, y, -1.7), bias);
                return weighted_sum(t, y, w);
              },
              {a, b, bias}) < kGradTol);
  }
}

TEST_CASE("gradients: relu and sigmoid") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto x = rand_tensor_nonzero(rng, {6, 4});
    auto w = rand_tensor(rng, {6, 4}, false);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::relu(t, x), w);
              },
              {x}) < kGradTol);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::sigmoid(t, x), w);
              },
              {x}) < kGradTol);
  }
}

TEST_CASE("gradients: softmax over each axis") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto x = rand_tensor(rng, {4, 5}, true, -2.0, 2.0);
    auto w = rand_tensor(rng, {4, 5}, false);
    for (int axis = 0; axis < 2; ++axis)
      CHECK(fd_max_rel_err(
                [&](TapeT<double>& t) {
                  return weighted_sum(t, ops::softmax(t, x, axis), w);
                },
                {x}) < kGradTol);
    auto x3 = rand_tensor(rng, {2, 3, 4}, true, -2.0, 2.0);
    auto w3 = rand_tensor(rng, {2, 3, 4}, false);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::softmax(t, x3, 1), w3);
              },
              {x3}) < kGradTol);
  }
}

TEST_CASE("gradients: maxpool and mean") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    // values are shuffled multiples of 0.05, so within each pooled lane the
    // runner-up trails the max by more than the probe radius
    auto x = make_tensor<double>({3, 6, 2}, true);
    for (int64_t o = 0; o < 3; ++o)
      for (int64_t i = 0; i < 2; ++i) {
        int perm[6] = {0, 1, 2, 3, 4, 5};
        for (int a = 5; a > 0; --a)
          std::swap(perm[a], perm[rng.below(uint64_t(a) + 1)]);
        for (int64_t a = 0; a < 6; ++a)
          x->v[(o * 6 + a) * 2 + i] = 0.05 * perm[a];
      }
    auto w = rand_tensor(rng, {3, 1, 2}, false);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::maxpool(t, x, 1), w);
              },
              {x}) < kGradTol);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::mean(t, x, 1), w);
              },
              {x}) < kGradTol);
  }
}

TEST_CASE("gradients: concat and slice") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto a = rand_tensor(rng, {2, 3, 2});
    auto b = rand_tensor(rng, {2, 4, 2});
    auto w = rand_tensor(rng, {2, 7, 2}, false);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::concat(t, a, b, 1), w);
              },
              {a, b}) < kGradTol);
    auto x = rand_tensor(rng, {3, 8});
    auto ws = rand_tensor(rng, {3, 3}, false);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return weighted_sum(t, ops::slice(t, x, 1, 2, 3), ws);
              },
              {x}) < kGradTol);
  }
}

TEST_CASE("gradients: batchnorm in both modes") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto x = rand_tensor(rng, {8, 5});
    auto gamma = rand_tensor(rng, {5}, true, 0.5, 1.5);
    auto beta = rand_tensor(rng, {5});
    auto w = rand_tensor(rng, {8, 5}, false);
    ops::BNStateT<double> state{make_tensor<double>({5}),
                                make_tensor<double>({5})};
    for (auto& v : state.running_var->v) v = rng.uniform(0.5, 2.0);
    for (auto& v : state.running_mean->v) v = rng.uniform(-0.5, 0.5);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                auto y =
                    ops::batchnorm(t, x, gamma, beta, state, BNMode::train);
                return weighted_sum(t, y, w);
              },
              {x, gamma, beta}) < kGradTol);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                auto y = ops::batchnorm(t, x, gamma, beta, state, BNMode::eval);
                return weighted_sum(t, y, w);
              },
              {x, gamma, beta}) < kGradTol);
  }
}

TEST_CASE("gradients: losses") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto logits = rand_tensor(rng, {7}, true, -2.0, 2.0);
    std::vector<uint8_t> targets(7);
    for (auto& y : targets) y = rng.uniform() < 0.5 ? 0 : 1;
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return ops::bce_with_logits_mean(t, logits, targets);
              },
              {logits}) < kGradTol);

    auto cls = rand_tensor(rng, {6, 4}, true, -2.0, 2.0);
    std::vector<int> labels(6);
    std::vector<uint8_t> mask(6);
    for (auto& l : labels) l = int(rng.below(4));
    int active = 0;
    for (auto& m : mask) active += (m = rng.uniform() < 0.7 ? 1 : 0);
    if (!active) mask[0] = 1;
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return ops::softmax_xent_mean(t, cls, labels, mask);
              },
              {cls}) < kGradTol);
    CHECK(fd_max_rel_err(
              [&](TapeT<double>& t) {
                return ops::softmax_xent_mean(t, cls, labels);
              },
              {cls}) < kGradTol);
  }
}

TEST_CASE("relu and sum_all have the advertised exact behaviour") {
  TapeT<double> tape;
  auto x = make_tensor<double>({3}, true);
  x->v = {-1.0, 0.0, 2.0};
  auto y = ops::relu(tape, x);
  CHECK(y->v == std::vector<double>{0.0, 0.0, 2.0});
  auto s = ops::sum_all(tape, y);
  CHECK(s->v[0] == 2.0);
  tape.backward(s);
  // d(sum relu)/dx is the positive-input indicator
  CHECK(x->g == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("softmax of equal logits is uniform") {
  TapeT<double> tape;
  tape.set_enabled(false);
  for (int k : {2, 3, 7}) {
    auto x = make_tensor<double>({2, k});
    for (auto& v : x->v) v = 0.42;
    auto y = ops::softmax(tape, x, 1);
    for (auto v : y->v) CHECK(v == doctest::Approx(1.0 / k).epsilon(1e-12));
  }
}

TEST_CASE("maxpool routes gradient to the lowest-index tie") {
  TapeT<double> tape;
  auto x = make_tensor<double>({3, 1}, true);
  x->v = {3.0, 5.0, 5.0};
  auto y = ops::maxpool(tape, x, 0);
  CHECK(y->v[0] == 5.0);
  auto s = ops::sum_all(tape, y);
  tape.backward(s);
  CHECK(x->g == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("bce at logit zero is ln 2 with slope -1/2 toward a positive label") {
  TapeT<double> tape;
  auto logit = make_tensor<double>({1}, true);
  logit->v = {0.0};
  auto l = ops::bce_with_logits_mean(tape, logit, {1});
  CHECK(l->v[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  tape.backward(l);
  CHECK(logit->g[0] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("cross entropy of uniform logits is ln K and masked rows are inert") {
  TapeT<double> tape;
  auto logits = make_tensor<double>({4, 3}, true);
  for (auto& v : logits->v) v = 1.23;
  std::vector<int> labels{0, 1, 2, 0};
  auto l = ops::softmax_xent_mean(tape, logits, labels);
  CHECK(l->v[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  TapeT<double> t2;
  auto lg = make_tensor<double>({4, 3}, true);
  Rng rng(5);
  for (auto& v : lg->v) v = rng.uniform(-1, 1);
  std::vector<uint8_t> mask{1, 0, 1, 0};
  auto lm = ops::softmax_xent_mean(t2, lg, labels, mask);
  t2.backward(lm);
  for (int j = 0; j < 3; ++j) {
    CHECK(lg->g[1 * 3 + j] == 0.0);
    CHECK(lg->g[3 * 3 + j] == 0.0);
  }

  // no active rows: exact zero, nothing recorded
  TapeT<double> t3;
  auto l0 = ops::softmax_xent_mean(t3, lg, labels, {0, 0, 0, 0});
  CHECK(l0->v[0] == 0.0);
  CHECK_FALSE(l0->requires_grad);
}

TEST_CASE("batchnorm train mode normalizes each column") {
  Rng rng(17);
  TapeT<double> tape;
  tape.set_enabled(false);
  auto x = rand_tensor(rng, {64, 6}, false, -3.0, 5.0);
  auto gamma = make_tensor<double>({6});
  auto beta = make_tensor<double>({6});
  for (auto& v : gamma->v) v = 1.0;
  ops::BNStateT<double> state{make_tensor<double>({6}),
                              make_tensor<double>({6})};
  auto y = ops::batchnorm(tape, x, gamma, beta, state, BNMode::train);
  for (int j = 0; j < 6; ++j) {
    double m = 0.0, v = 0.0;
    for (int i = 0; i < 64; ++i) m += y->at(i, j);
    m /= 64;
    for (int i = 0; i < 64; ++i) {
      double d = y->at(i, j) - m;
      v += d * d;
    }
    v /= 64;
    CHECK(std::fabs(m) < 1e-9);
    // the epsilon in the denominator shrinks unit variance to var/(var+eps)
    double bm = 0.0, bv = 0.0;
    for (int i = 0; i < 64; ++i) bm += x->at(i, j);
    bm /= 64;
    for (int i = 0; i < 64; ++i) {
      double d = x->at(i, j) - bm;
      bv += d * d;
    }
    bv /= 64;
    CHECK(v == doctest::Approx(bv / (bv + 1e-5)).epsilon(1e-9));
    // running stats pulled one momentum step toward the batch stats
    CHECK(state.running_mean->v[j] == doctest::Approx(0.1 * bm).epsilon(1e-9));
  }
}

TEST_CASE("batchnorm eval mode treats rows independently") {
  Rng rng(23);
  Tape tape;  // float instantiation, bit-level comparison
  tape.set_enabled(false);
  auto x = make_tensor<float>({8, 5});
  for (auto& v : x->v) v = float(rng.uniform(-2, 2));
  auto gamma = make_tensor<float>({5});
  auto beta = make_tensor<float>({5});
  for (auto& v : gamma->v) v = float(rng.uniform(0.5, 1.5));
  for (auto& v : beta->v) v = float(rng.uniform(-1, 1));
  ops::BNStateT<float> state{make_tensor<float>({5}), make_tensor<float>({5})};
  for (auto& v : state.running_mean->v) v = float(rng.uniform(-1, 1));
  for (auto& v : state.running_var->v) v = float(rng.uniform(0.5, 2.0));

  auto full = ops::batchnorm(tape, x, gamma, beta, state, BNMode::eval);
  for (int i = 0; i < 8; ++i) {
    auto row = make_tensor<float>({1, 5});
    std::copy_n(x->v.data() + i * 5, 5, row->v.data());
    auto one = ops::batchnorm(tape, row, gamma, beta, state, BNMode::eval);
    CHECK(std::memcmp(one->v.data(), full->v.data() + i * 5,
                      5 * sizeof(float)) == 0);
  }
}

TEST_CASE("backward pass is bitwise deterministic") {
  auto run = [](std::vector<float>& grads) {
    Rng rng(31);
    Tape tape;
    auto x = make_tensor<float>({16, 8});
    auto w1 = make_tensor<float>({8, 12}, true);
    auto b1 = make_tensor<float>({12}, true);
    auto w2 = make_tensor<float>({12, 1}, true);
    for (auto& v : x->v) v = float(rng.uniform(-1, 1));
    for (auto& v : w1->v) v = float(rng.gaussian() * 0.3);
    for (auto& v : b1->v) v = float(rng.uniform(-0.1, 0.1));
    for (auto& v : w2->v) v = float(rng.gaussian() * 0.3);
    std::vector<uint8_t> targets(16);
    for (auto& t : targets) t = rng.uniform() < 0.5;
    auto h = ops::relu(tape, ops::bias_add(tape, ops::matmul(tape, x, w1), b1));
    auto logits = ops::matmul(tape, h, w2);
    auto loss = ops::bce_with_logits_mean(tape, logits, targets);
    tape.backward(loss);
    grads.clear();
    grads.insert(grads.end(), w1->g.begin(), w1->g.end());
    grads.insert(grads.end(), b1->g.begin(), b1->g.end());
    grads.insert(grads.end(), w2->g.begin(), w2->g.end());
  };
  std::vector<float> g1, g2;
  run(g1);
  run(g2);
  REQUIRE(g1.size() == g2.size());
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(float)) == 0);
}

TEST_CASE("shape mismatches throw with both shapes named") {
  TapeT<double> tape;
  auto a = make_tensor<double>({2, 3});
  auto b = make_tensor<double>({2, 3});
  CHECK_THROWS_AS((void)ops::matmul(tape, a, b), std::invalid_argument);
  try {
    (void)ops::matmul(tape, a, b);
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS((void)ops::slice(tape, a, 1, 2, 2), std::invalid_argument);
  auto nonscalar = make_tensor<double>({2}, true);
  CHECK_THROWS_AS(tape.backward(nonscalar), std::invalid_argument);
}

TEST_CASE("a disabled tape records nothing and marks no gradients") {
  TapeT<double> tape;
  tape.set_enabled(false);
  auto a = make_tensor<double>({2, 2}, true);
  auto b = make_tensor<double>({2, 2}, true);
  auto c = ops::matmul(tape, a, b);
  CHECK_FALSE(c->requires_grad);
  CHECK(tape.size() == 0);
}
