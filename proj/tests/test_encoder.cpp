#include <cmath>
#include <random>

#include "bysgnn/encoder.hpp"
#include "bysgnn/error.hpp"
#include "bysgnn/ops.hpp"
#include "doctest.h"
#include "support/backends.hpp"

using namespace bysgnn;
namespace o = bysgnn::ops;

namespace {

void randomize(ParameterStore& store, std::mt19937_64& rng, double bound = 0.8) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& p : store.items())
    for (double& v : p.tensor.mutable_data()) v = u(rng);
}

Tensor random_windows(std::size_t b, std::size_t s, std::size_t t, std::mt19937_64& rng) {
  return Tensor::uniform({b, s, t}, 1.5, rng);
}

struct Fixture {
  ParameterStore store;
  TemporalEncoder enc;
  Fixture(std::size_t s, std::size_t d, std::size_t m, std::uint64_t seed, bool attention = true) {
    std::mt19937_64 rng(seed);
    enc = TemporalEncoder({s, d, m, attention}, store, rng);
    randomize(store, rng);
  }
};

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Straight-line GRU for one series and one sample, reading raw parameter arrays.
std::vector<std::vector<double>> loop_gru(const TemporalEncoder& e, std::size_t s, const std::vector<double>& xs) {
  const std::size_t d = e.config().lift_dim, m = e.config().hidden_dim;
  const auto W1 = e.W1.data(), b1 = e.b1.data(), W2 = e.W2.data(), b2 = e.b2.data();
  const auto Wx = e.W_x.data(), Wh = e.W_h.data(), bx = e.b_x.data(), bh = e.b_h.data();
  std::vector<double> h(m, 0.0);
  std::vector<std::vector<double>> states;
  for (double xv : xs) {
    std::vector<double> u(d), x(d);
    for (std::size_t j = 0; j < d; ++j) u[j] = std::tanh(xv * W1[s * d + j] + b1[s * d + j]);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = b2[s * d + k];
      for (std::size_t j = 0; j < d; ++j) x[k] += u[j] * W2[(s * d + j) * d + k];
    }
    auto gate_in = [&](std::size_t col) {
      double xp = bx[s * 3 * m + col], hp = bh[s * 3 * m + col];
      for (std::size_t k = 0; k < d; ++k) xp += x[k] * Wx[(s * d + k) * 3 * m + col];
      for (std::size_t k = 0; k < m; ++k) hp += h[k] * Wh[(s * m + k) * 3 * m + col];
      return std::pair{xp, hp};
    };
    std::vector<double> next(m);
    for (std::size_t q = 0; q < m; ++q) {
      auto [xr, hr] = gate_in(q);
      auto [xz, hz] = gate_in(m + q);
      auto [xn, hn] = gate_in(2 * m + q);
      const double r = sigm(xr + hr), z = sigm(xz + hz);
      const double n = std::tanh(xn + r * hn);
      next[q] = (1 - z) * h[q] + z * n;
    }
    h = next;
    states.push_back(h);
  }
  return states;
}

}  // namespace

TEST_CASE("lift with zero weights is zero") {
  ParameterStore store;
  std::mt19937_64 rng(1);
  TemporalEncoder enc({2, 4, 4}, store, rng);
  for (auto& p : store.items()) std::fill(p.tensor.mutable_data().begin(), p.tensor.mutable_data().end(), 0.0);
  const Tensor y = enc.lift(Tensor::uniform({2, 5, 1}, 3.0, rng));
  CHECK(y.shape() == Shape{2, 5, 4});
  for (double v : y.data()) CHECK(v == 0.0);
  CHECK(enc.lift(Tensor::zeros({2, 1, 1})).shape() == Shape{2, 1, 4});
}

TEST_CASE("GRU matches a step-by-step loop on 3 steps, D=2, M=2") {
  Fixture f(2, 2, 2, 7);
  const std::vector<double> xs0{0.3, -1.2, 0.8}, xs1{1.0, 0.1, -0.4};
  // [S, T*B, 1] with B = 1
  std::vector<double> x{xs0[0], xs0[1], xs0[2], xs1[0], xs1[1], xs1[2]};
  const auto g = f.enc.gru(f.enc.lift(Tensor::from({2, 3, 1}, x)), 3, 1);
  REQUIRE(g.states.size() == 3);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto oracle = loop_gru(f.enc, s, s == 0 ? xs0 : xs1);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t q = 0; q < 2; ++q) CHECK(g.states[t].at({s, 0, q}) == doctest::Approx(oracle[t][q]).epsilon(1e-10));
  }
}

TEST_CASE("closed update gate keeps the hidden state at zero") {
  Fixture f(1, 3, 2, 9);
  auto bx = f.enc.b_x.mutable_data();
  for (std::size_t q = 2; q < 4; ++q) bx[q] = -1000.0;  // update block
  std::mt19937_64 rng(2);
  const auto g = f.enc.gru(f.enc.lift(Tensor::uniform({1, 6, 1}, 2.0, rng)), 6, 1);
  for (const auto& h : g.states)
    for (double v : h.data()) CHECK(v == 0.0);
}

TEST_CASE("single-step window") {
  Fixture f(3, 4, 4, 11);
  std::mt19937_64 rng(3);
  const auto out = f.enc.encode(random_windows(2, 3, 1, rng));
  REQUIRE(out.gru.states.size() == 1);
  for (std::size_t i = 0; i < out.gru.last.numel(); ++i) {
    CHECK(out.gru.states[0].data()[i] == out.gru.last.data()[i]);
    CHECK(out.attention.pre_norm.data()[i] == doctest::Approx(2.0 * out.gru.last.data()[i]).epsilon(1e-14));
  }
  for (double a : out.attention.weights.data()) CHECK(a == doctest::Approx(1.0));
}

TEST_CASE("identical hidden states summarize to themselves") {
  Fixture f(2, 3, 4, 13);
  std::mt19937_64 rng(4);
  GruStates g;
  g.last = Tensor::uniform({2, 3, 4}, 1.0, rng);
  g.states.assign(5, g.last);
  const auto a = f.enc.attend(g);
  for (std::size_t i = 0; i < g.last.numel(); ++i)
    CHECK(a.pre_norm.data()[i] == doctest::Approx(2.0 * g.last.data()[i]).epsilon(1e-12));
}

TEST_CASE("attention weights are distributions over steps (property)") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Fixture f(3, 4, 6, 100 + seed);
    std::mt19937_64 rng(seed);
    const auto out = f.enc.encode(random_windows(4, 3, 9, rng));
    const auto w = out.attention.weights.data();
    for (std::size_t r = 0; r < 12; ++r) {
      double total = 0;
      for (std::size_t t = 0; t < 9; ++t) {
        CHECK(w[r * 9 + t] >= 0.0);
        total += w[r * 9 + t];
      }
      CHECK(std::fabs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("batched encoding equals single-series loop") {
  const std::size_t S = 3, D = 4, M = 6, T = 7, B = 2;
  Fixture f(S, D, M, 21);
  std::mt19937_64 rng(5);
  const Tensor w = random_windows(B, S, T, rng);
  const Tensor c = f.enc.encode(w).embeddings;
  REQUIRE(c.shape() == Shape{B, S, M});
  for (std::size_t s = 0; s < S; ++s) {
    ParameterStore one;
    std::mt19937_64 r2(0);
    TemporalEncoder single({1, D, M}, one, r2);
    // copy series s's slice of every stacked parameter, shared ones whole
    for (std::size_t p = 0; p < one.size(); ++p) {
      auto dst = one.items()[p].tensor.mutable_data();
      const auto src = f.store.items()[p].tensor.data();
      const bool stacked = f.store.items()[p].tensor.shape()[0] == S && p < 8;
      const std::size_t off = stacked ? s * dst.size() : 0;
      std::copy(src.begin() + off, src.begin() + off + dst.size(), dst.begin());
    }
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<double> xs(T);
      for (std::size_t t = 0; t < T; ++t) xs[t] = w.at({b, s, t});
      const Tensor cs = single.encode(Tensor::from({1, 1, T}, xs)).embeddings;
      for (std::size_t q = 0; q < M; ++q) CHECK(c.at({b, s, q}) == doctest::Approx(cs.at({0, 0, q})).epsilon(1e-12));
    }
  }
}

TEST_CASE("perturbing one series leaves other rows unchanged") {
  Fixture f(4, 3, 4, 31);
  std::mt19937_64 rng(6);
  const Tensor w = random_windows(2, 4, 6, rng);
  std::vector<double> pert(w.data().begin(), w.data().end());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 6; ++t) pert[(b * 4 + 2) * 6 + t] += 0.7;
  const Tensor c0 = f.enc.encode(w).embeddings;
  const Tensor c1 = f.enc.encode(Tensor::from({2, 4, 6}, pert)).embeddings;
  bool changed = false;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t q = 0; q < 4; ++q) {
        if (s == 2) changed |= c0.at({b, s, q}) != c1.at({b, s, q});
        else CHECK(c0.at({b, s, q}) == c1.at({b, s, q}));
      }
  CHECK(changed);
}

TEST_CASE("swapping two series and their parameters swaps rows of C") {
  const std::size_t S = 3, M = 4;
  Fixture f(S, 3, M, 41);
  std::mt19937_64 rng(7);
  const Tensor w = random_windows(1, S, 5, rng);
  const Tensor c = f.enc.encode(w).embeddings;
  for (std::size_t p = 0; p < 8; ++p) {
    auto v = f.store.items()[p].tensor.mutable_data();
    const std::size_t block = v.size() / S;
    std::swap_ranges(v.begin(), v.begin() + block, v.begin() + 2 * block);
  }
  std::vector<double> x(w.data().begin(), w.data().end());
  std::swap_ranges(x.begin(), x.begin() + 5, x.begin() + 10);
  const Tensor c2 = f.enc.encode(Tensor::from({1, S, 5}, x)).embeddings;
  for (std::size_t q = 0; q < M; ++q) {
    CHECK(c2.at({0, 0, q}) == doctest::Approx(c.at({0, 2, q})).epsilon(1e-12));
    CHECK(c2.at({0, 2, q}) == doctest::Approx(c.at({0, 0, q})).epsilon(1e-12));
    CHECK(c2.at({0, 1, q}) == doctest::Approx(c.at({0, 1, q})).epsilon(1e-12));
  }
}

TEST_CASE("encoder input validation") {
  Fixture f(3, 2, 4, 1);
  CHECK_THROWS_AS(f.enc.encode(Tensor::zeros({1, 2, 4})), ConfigError);
  ParameterStore s;
  std::mt19937_64 rng(1);
  TemporalEncoder e({3, 2, 128}, s, rng);
  CHECK(e.encode(Tensor::zeros({1, 3, 4})).embeddings.shape() == Shape{1, 3, 128});
}

TEST_CASE("encoder gradients match finite differences") {
  for (bool attention : {true, false}) {
    CAPTURE(attention);
    Fixture f(2, 3, 4, 51, attention);
    std::mt19937_64 rng(8);
    const Tensor w = random_windows(2, 2, 5, rng);
    const Tensor target = Tensor::uniform({2, 2, 4}, 1.0, rng);
    testing::check_both_backends(f.store.items(),
                                 [&] { return o::mse_loss(f.enc.encode(w).embeddings, target); });
  }
}

TEST_CASE("lift gradients on a 24-step series") {
  Fixture f(1, 5, 2, 61);
  std::mt19937_64 rng(9);
  const Tensor x = Tensor::uniform({1, 24, 1}, 2.0, rng);
  std::vector<Parameter> lift(f.store.items().begin(), f.store.items().begin() + 4);
  testing::check_both_backends(lift, [&] { return o::sum(o::square(f.enc.lift(x))); });
}
