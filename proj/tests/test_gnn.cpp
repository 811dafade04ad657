#include <cmath>
#include <random>

#include "bysgnn/gnn.hpp"
#include "bysgnn/ops.hpp"
#include "doctest.h"
#include "support/backends.hpp"

using namespace bysgnn;
namespace o = bysgnn::ops;

namespace {

struct Fixture {
  ParameterStore store;
  GnnBlock gnn;
  Fixture(std::size_t in, std::size_t hidden, std::size_t out, std::size_t horizon, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    gnn = GnnBlock({in, hidden, out, horizon}, store, rng);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    for (auto& p : store.items())
      for (double& v : p.tensor.mutable_data()) v = u(rng);
  }
};

std::vector<double> dense(const Tensor& x, std::size_t row, std::size_t width) {
  return {x.data().begin() + row * width, x.data().begin() + (row + 1) * width};
}

// y = x W + b for one row.
std::vector<double> affine(const std::vector<double>& x, const Tensor& W, const Tensor& b) {
  const std::size_t n = W.dim(1);
  std::vector<double> y(b.data().begin(), b.data().end());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) y[j] += x[i] * W.data()[i * n + j];
  return y;
}

}  // namespace

TEST_CASE("normalized adjacency on 2-node hand instances") {
  // symmetric: A = [[1, .5], [.5, 1]], degrees 1.5
  const Tensor a = normalized_adjacency(Tensor::from({2, 2}, {0, 0.5, 0.5, 0}));
  CHECK(a.at({0, 0}) == doctest::Approx(1 / 1.5));
  CHECK(a.at({0, 1}) == doctest::Approx(0.5 / 1.5));
  // asymmetric, with a negative entry clamped away
  const Tensor b = normalized_adjacency(Tensor::from({2, 2}, {-0.4, 0.8, 0.2, 0}));
  CHECK(b.at({0, 0}) == doctest::Approx(1 / 1.8));
  CHECK(b.at({0, 1}) == doctest::Approx(0.8 / std::sqrt(1.8 * 1.2)));
  CHECK(b.at({1, 0}) == doctest::Approx(0.2 / std::sqrt(1.8 * 1.2)));
  CHECK(b.at({1, 1}) == doctest::Approx(1 / 1.2));
}

TEST_CASE("one propagation step matches a scalar evaluation") {
  Fixture f(3, 2, 2, 1, 1);
  const Tensor V = Tensor::from({2, 3}, {0.5, -1, 2, 1.5, 0.25, -0.5});
  const Tensor S = Tensor::from({2, 2}, {0, 0.8, 0.2, 0});
  const double d0 = 1.8, d1 = 1.2;
  const double ahat[2][2] = {{1 / d0, 0.8 / std::sqrt(d0 * d1)}, {0.2 / std::sqrt(d0 * d1), 1 / d1}};
  const Tensor HW = o::matmul(V, f.gnn.W[0]);
  const Tensor layer1 = o::tanh(add_bias(o::matmul(normalized_adjacency(S), HW), f.gnn.b[0]));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = f.gnn.b[0].data()[j];
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t q = 0; q < 3; ++q) acc += ahat[i][k] * V.at({k, q}) * f.gnn.W[0].at({q, j});
      CHECK(layer1.at({i, j}) == doctest::Approx(std::tanh(acc)).epsilon(1e-12));
    }
}

TEST_CASE("empty adjacency reduces to a per-node MLP") {
  Fixture f(4, 3, 2, 2, 2);
  std::mt19937_64 rng(3);
  const Tensor V = Tensor::uniform({5, 4}, 1.0, rng);
  const Tensor out = f.gnn.propagate(build_graph(V, Tensor::zeros({5, 5})));
  for (std::size_t i = 0; i < 5; ++i) {
    auto h = affine(dense(V, i, 4), f.gnn.W[0], f.gnn.b[0]);
    for (double& x : h) x = std::tanh(x);
    h = affine(h, f.gnn.W[1], f.gnn.b[1]);
    for (double& x : h) x = std::tanh(x);
    h = affine(h, f.gnn.W[2], f.gnn.b[2]);
    for (std::size_t j = 0; j < 2; ++j) CHECK(out.at({i, j}) == doctest::Approx(h[j]).epsilon(1e-12));
  }
}

TEST_CASE("three-hop locality on a chain and disconnected components") {
  Fixture f(3, 4, 2, 1, 4);
  std::mt19937_64 rng(5);
  const std::size_t n = 7;
  std::vector<double> s(n * n, 0.0);
  // chain 0-1-2-3-4, separate pair 5-6
  for (std::size_t i = 0; i + 1 < 5; ++i) s[i * n + i + 1] = s[(i + 1) * n + i] = 0.6;
  s[5 * n + 6] = s[6 * n + 5] = 0.9;
  const Tensor S = Tensor::from({n, n}, s);
  const Tensor V = Tensor::uniform({n, 3}, 1.0, rng);
  std::vector<double> pert(V.data().begin(), V.data().end());
  for (std::size_t q = 0; q < 3; ++q) pert[4 * 3 + q] += 1.0;  // node 4
  const Tensor a = f.gnn.propagate(build_graph(V, S));
  const Tensor b = f.gnn.propagate(build_graph(Tensor::from({n, 3}, pert), S));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(a.at({0, j}) == b.at({0, j}));  // 4 hops away
    CHECK(a.at({5, j}) == b.at({5, j}));
    CHECK(a.at({6, j}) == b.at({6, j}));
  }
  CHECK(a.at({1, 0}) != b.at({1, 0}));  // 3 hops away
}

TEST_CASE("permutation equivariance") {
  Fixture f(3, 4, 2, 2, 6);
  std::mt19937_64 rng(7);
  const std::size_t n = 5;
  const Tensor S = Tensor::uniform({n, n}, 1.0, rng);
  const Tensor V = Tensor::uniform({n, 3}, 1.0, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<double> sp(n * n), vp(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sp[i * n + j] = S.at({perm[i], perm[j]});
    for (std::size_t q = 0; q < 3; ++q) vp[i * 3 + q] = V.at({perm[i], q});
  }
  const Tensor y = f.gnn.head(f.gnn.propagate(build_graph(V, S)), V);
  const Tensor Vp = Tensor::from({n, 3}, vp);
  const Tensor yp = f.gnn.head(f.gnn.propagate(build_graph(Vp, Tensor::from({n, n}, sp))), Vp);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < 2; ++h) CHECK(yp.at({i, h}) == doctest::Approx(y.at({perm[i], h})).epsilon(1e-12));
}

TEST_CASE("forecast head") {
  ParameterStore store;
  std::mt19937_64 rng(8);
  GnnBlock g({296, 64, 32, 6}, store, rng);
  const Tensor V = Tensor::uniform({2, 50, 296}, 1.0, rng);
  const Tensor S = Tensor::uniform({2, 50, 50}, 1.0, rng);
  const Tensor y = g.head(g.propagate(build_graph(V, S)), V);
  CHECK(y.shape() == Shape{2, 50, 6});
  std::fill(g.W_head.mutable_data().begin(), g.W_head.mutable_data().end(), 0.0);
  for (std::size_t h = 0; h < 6; ++h) g.b_head.mutable_data()[h] = 0.1 * static_cast<double>(h);
  const Tensor y0 = g.head(g.propagate(build_graph(V, S)), V);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t h = 0; h < 6; ++h) CHECK(y0.at({b, i, h}) == 0.1 * static_cast<double>(h));
}

TEST_CASE("GNN gradients match finite differences, including through the adjacency") {
  Fixture f(3, 4, 2, 2, 9);
  std::mt19937_64 rng(10);
  const Tensor S = Tensor::uniform({2, 4, 4}, 1.0, rng, true);
  const Tensor V = Tensor::uniform({2, 4, 3}, 1.0, rng, true);
  const Tensor target = Tensor::uniform({2, 4, 2}, 1.0, rng);
  auto params = f.store.items();
  params.push_back({"S", S});
  params.push_back({"V", V});
  testing::check_both_backends(params, [&] {
    const auto g = build_graph(V, S);
    return o::mse_loss(f.gnn.head(f.gnn.propagate(g), V), target);
  });
}
