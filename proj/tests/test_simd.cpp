#include <cmath>
#include <random>
#include <vector>

#include "bysgnn/simd.hpp"
#include "doctest.h"

using bysgnn::simd::KernelTable;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::fabs(a[i] - b[i]) <= tol * std::max(1.0, std::fabs(b[i])));
  }
}

// Shapes chosen to hit full 4×8 tiles, row tails, column tails and k = 1.
const std::size_t kShapes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 16}, {9, 17, 3}, {32, 96, 48}, {5, 3, 1}, {12, 13, 129}};

void check_table_against_scalar(const KernelTable& t) {
  const KernelTable& ref = bysgnn::simd::scalar_kernels();
  std::mt19937_64 rng(7);
  for (const auto& s : kShapes) {
    const std::size_t m = s[0], n = s[1], k = s[2];
    CAPTURE(m);
    CAPTURE(n);
    CAPTURE(k);
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    const auto bt = random_vec(n * k, rng);
    const auto at = random_vec(k * m, rng);
    auto c0 = random_vec(m * n, rng);
    auto c1 = c0;
    ref.gemm_nn(m, n, k, a.data(), b.data(), c0.data());
    t.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
    expect_close(c1, c0, 1e-12);

    c1 = c0;
    auto c2 = c0;
    ref.gemm_nt(m, n, k, a.data(), bt.data(), c1.data());
    t.gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
    expect_close(c2, c1, 1e-12);

    c1 = c0;
    c2 = c0;
    ref.gemm_tn(m, n, k, at.data(), b.data(), c1.data());
    t.gemm_tn(m, n, k, at.data(), b.data(), c2.data());
    expect_close(c2, c1, 1e-12);
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 33u, 1000u}) {
    CAPTURE(n);
    const auto x = random_vec(n, rng);
    const auto y = random_vec(n, rng);
    CHECK(std::fabs(t.dot(n, x.data(), y.data()) - ref.dot(n, x.data(), y.data())) <= 1e-12 * std::max<double>(1, n));
    CHECK(std::fabs(t.sum(n, x.data()) - ref.sum(n, x.data())) <= 1e-12 * std::max<double>(1, n));
    std::vector<double> o0(n), o1(n);
    ref.mul(n, x.data(), y.data(), o0.data());
    t.mul(n, x.data(), y.data(), o1.data());
    expect_close(o1, o0, 0.0);
    ref.add(n, x.data(), y.data(), o0.data());
    t.add(n, x.data(), y.data(), o1.data());
    expect_close(o1, o0, 0.0);
    ref.axpy(n, 0.5, x.data(), o0.data());
    t.axpy(n, 0.5, x.data(), o1.data());
    expect_close(o1, o0, 1e-15);
    ref.mul_acc(n, x.data(), y.data(), o0.data());
    t.mul_acc(n, x.data(), y.data(), o1.data());
    expect_close(o1, o0, 1e-15);
  }
}

void check_activations(const KernelTable& t) {
  const KernelTable& ref = bysgnn::simd::scalar_kernels();
  std::vector<double> x;
  for (double v = -40.0; v <= 40.0; v += 0.0137) x.push_back(v);
  for (double v : {0.0, -0.0, 1e-300, -1e-12, 1e-8, 0.1749, 0.175, 0.1751, -0.175, 354.0, 800.0, -800.0, 1e308, -1e308})
    x.push_back(v);
  const std::size_t n = x.size();
  std::vector<double> a(n), b(n);
  ref.sigmoid(n, x.data(), a.data());
  t.sigmoid(n, x.data(), b.data());
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) REQUIRE_FALSE(std::isnan(b[i]));
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::fabs(a[i] - b[i]) / std::max(std::fabs(a[i]), 1e-290));
  CHECK(worst <= 1e-14);
  ref.tanh(n, x.data(), a.data());
  t.tanh(n, x.data(), b.data());
  worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) REQUIRE_FALSE(std::isnan(b[i]));
  for (std::size_t i = 0; i < n; ++i)
    if (a[i] != 0.0) worst = std::max(worst, std::fabs(a[i] - b[i]) / std::fabs(a[i]));
  CHECK(worst <= 1e-14);
  CHECK(b[n - 14] == 0.0);

  const double nan = std::nan("");
  const std::vector<double> bad{nan, 0.5, -nan, 2.0};
  std::vector<double> o(4);
  t.sigmoid(4, bad.data(), o.data());
  CHECK(std::isnan(o[0]));
  CHECK(std::isnan(o[2]));
  t.tanh(4, bad.data(), o.data());
  CHECK(std::isnan(o[0]));
  CHECK(o[3] == doctest::Approx(std::tanh(2.0)).epsilon(1e-15));
}

}  // namespace

TEST_CASE("scalar activations") {
  const KernelTable& ref = bysgnn::simd::scalar_kernels();
  const double x[] = {0.0, 2.0, -2.0, -800.0};
  double s[4], th[4];
  ref.sigmoid(4, x, s);
  ref.tanh(4, x, th);
  CHECK(s[0] == 0.5);
  CHECK(s[1] == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  CHECK(s[1] + s[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s[3] == 0.0);
  CHECK(th[0] == 0.0);
  CHECK(th[1] == doctest::Approx(0.9640275800758169).epsilon(1e-15));
  CHECK(th[2] == -th[1]);
}

TEST_CASE("scalar gemm reference on a hand instance") {
  const KernelTable& ref = bysgnn::simd::scalar_kernels();
  const double a[] = {1, 2, 3, 4};  // 2×2
  const double b[] = {5, 6, 7, 8};
  double c[4] = {0, 0, 0, 0};
  ref.gemm_nn(2, 2, 2, a, b, c);
  CHECK(c[0] == 19);
  CHECK(c[1] == 22);
  CHECK(c[2] == 43);
  CHECK(c[3] == 50);
  double ct[4] = {0, 0, 0, 0};
  ref.gemm_nt(2, 2, 2, a, b, ct);  // a · bᵀ
  CHECK(ct[0] == 17);
  CHECK(ct[1] == 23);
  CHECK(ct[2] == 39);
  CHECK(ct[3] == 53);
}

TEST_CASE("avx2 kernels match the scalar reference") {
  const KernelTable* avx = bysgnn::simd::avx2_kernels();
  if (avx == nullptr) {
    MESSAGE("AVX2 kernels unavailable on this host; skipping");
    return;
  }
  check_table_against_scalar(*avx);
  check_activations(*avx);
}

TEST_CASE("backend selection") {
  using bysgnn::simd::Backend;
  const Backend before = bysgnn::simd::active_backend();
  bysgnn::simd::select_backend(Backend::scalar);
  CHECK(bysgnn::simd::active_backend() == Backend::scalar);
  CHECK(std::string(bysgnn::simd::kernels().name) == "scalar");
  if (bysgnn::simd::avx2_kernels()) {
    bysgnn::simd::select_backend(Backend::avx2);
    CHECK(bysgnn::simd::active_backend() == Backend::avx2);
  } else {
    CHECK_THROWS(bysgnn::simd::select_backend(Backend::avx2));
  }
  bysgnn::simd::select_backend(before);
}
