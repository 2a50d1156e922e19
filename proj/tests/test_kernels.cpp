#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "arvrm/kernels.hpp"
#include "arvrm/rng.hpp"

using namespace arvrm;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-30});
  return std::abs(a - b) / denom;
}

}  // namespace

TEST_CASE("scalar dot matches plain loop") {
  Rng rng(7);
  const auto a = random_vec(rng, 103);
  const auto b = random_vec(rng, 103);
  double expected = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) expected += a[i] * b[i];
  CHECK(kernels::scalar_ops().dot(a.data(), b.data(), a.size()) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("scalar matmul_nn matches triple loop") {
  Rng rng(11);
  const std::size_t m = 5, k = 7, n = 9;
  const auto a = random_vec(rng, m * k);
  const auto b = random_vec(rng, k * n);
  std::vector<double> c(m * n, 0.0), ref(m * n, 0.0);
  kernels::scalar_ops().matmul_nn(a.data(), b.data(), c.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) ref[i * n + j] += a[i * k + p] * b[p * n + j];
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(rel_err(c[i], ref[i]) < 1e-14);
}

TEST_CASE("matmul transposed variants agree with explicit transposition") {
  Rng rng(13);
  const std::size_t m = 4, k = 6, n = 5;
  const auto a = random_vec(rng, m * k);
  const auto b = random_vec(rng, k * n);

  // B as [n,k] for matmul_nt
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];

  std::vector<double> via_nn(m * n, 0.0), via_nt(m * n, 0.0);
  kernels::scalar_ops().matmul_nn(a.data(), b.data(), via_nn.data(), m, k, n);
  kernels::scalar_ops().matmul_nt(a.data(), bt.data(), via_nt.data(), m, k, n);
  for (std::size_t i = 0; i < via_nn.size(); ++i) CHECK(rel_err(via_nn[i], via_nt[i]) < 1e-13);

  // A as [m,k]; matmul_tn(A, C) computes A^T*C
  std::vector<double> c(m * n);
  for (auto& x : c) x = rng.normal();
  std::vector<double> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  std::vector<double> via_tn(k * n, 0.0), ref(k * n, 0.0);
  kernels::scalar_ops().matmul_tn(a.data(), c.data(), via_tn.data(), m, k, n);
  kernels::scalar_ops().matmul_nn(at.data(), c.data(), ref.data(), k, m, n);
  for (std::size_t i = 0; i < via_tn.size(); ++i) CHECK(rel_err(via_tn[i], ref[i]) < 1e-13);
}

TEST_CASE("avx2 kernels are equivalent to scalar reference") {
  const kernels::Ops* simd = kernels::avx2_ops();
  if (simd == nullptr) {
    MESSAGE("AVX2 not available on this machine; skipping equivalence checks");
    return;
  }
  const auto& ref = kernels::scalar_ops();
  Rng rng(17);

  SUBCASE("dot / axpy / elementwise across sizes incl. tails") {
    for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 17u, 64u, 129u}) {
      const auto a = random_vec(rng, n);
      const auto b = random_vec(rng, n);
      CHECK(rel_err(simd->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n)) < 1e-13);

      auto y1 = b, y2 = b;
      simd->axpy(0.37, a.data(), y1.data(), n);
      ref.axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(y1[i], y2[i]) < 1e-13);

      std::vector<double> o1(n), o2(n);
      simd->vadd(a.data(), b.data(), o1.data(), n);
      ref.vadd(a.data(), b.data(), o2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == o2[i]);
      simd->vsub(a.data(), b.data(), o1.data(), n);
      ref.vsub(a.data(), b.data(), o2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == o2[i]);
      simd->vmul(a.data(), b.data(), o1.data(), n);
      ref.vmul(a.data(), b.data(), o2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == o2[i]);

      auto s1 = a, s2 = a;
      simd->scale(-1.91, s1.data(), n);
      ref.scale(-1.91, s2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(s1[i] == s2[i]);
    }
  }

  SUBCASE("matmul variants across odd shapes") {
    for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{
             {1, 1, 1}, {2, 3, 4}, {5, 7, 3}, {8, 16, 8}, {13, 21, 17}, {40, 64, 192}}) {
      const auto a = random_vec(rng, m * k);
      const auto b_nn = random_vec(rng, k * n);
      const auto b_nt = random_vec(rng, n * k);
      const auto b_tn = random_vec(rng, m * n);
      std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
      simd->matmul_nn(a.data(), b_nn.data(), c1.data(), m, k, n);
      ref.matmul_nn(a.data(), b_nn.data(), c2.data(), m, k, n);
      for (std::size_t i = 0; i < c1.size(); ++i) CHECK(rel_err(c1[i], c2[i]) < 1e-12);

      std::vector<double> d1(m * n, -0.25), d2(m * n, -0.25);
      simd->matmul_nt(a.data(), b_nt.data(), d1.data(), m, k, n);
      ref.matmul_nt(a.data(), b_nt.data(), d2.data(), m, k, n);
      for (std::size_t i = 0; i < d1.size(); ++i) CHECK(rel_err(d1[i], d2[i]) < 1e-12);

      std::vector<double> e1(k * n, 0.0), e2(k * n, 0.0);
      simd->matmul_tn(a.data(), b_tn.data(), e1.data(), m, k, n);
      ref.matmul_tn(a.data(), b_tn.data(), e2.data(), m, k, n);
      for (std::size_t i = 0; i < e1.size(); ++i) CHECK(rel_err(e1[i], e2[i]) < 1e-12);
    }
  }
}

TEST_CASE("backend selection") {
  kernels::set_backend(kernels::Backend::kScalar);
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::set_backend(kernels::Backend::kAuto);
  if (kernels::avx2_ops() != nullptr) {
    CHECK(std::string(kernels::active().name) == "avx2");
  } else {
    CHECK(std::string(kernels::active().name) == "scalar");
  }
}
