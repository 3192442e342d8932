#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mtir/kernels.hpp"
#include "mtir/rng.hpp"

using namespace mtir;

namespace {

std::vector<float> random_vec(Rng& rng, int64_t n, double lo = -1.0,
                              double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.uniform(lo, hi));
  return v;
}

// plain triple loop in double, independent of the gemm kernels
std::vector<double> gemm_oracle(const std::vector<float>& a,
                                const std::vector<float>& b, int m, int n,
                                int k, bool ta, bool tb) {
  std::vector<double> c(size_t(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) {
        double av = ta ? a[size_t(p) * m + i] : a[size_t(i) * k + p];
        double bv = tb ? b[size_t(j) * k + p] : b[size_t(p) * n + j];
        s += av * bv;
      }
      c[size_t(i) * n + j] = s;
    }
  return c;
}

}  // namespace

TEST_CASE("gemm matches a plain triple loop in all transpose variants") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    int m = 3 + int(rng.below(20));
    int n = 3 + int(rng.below(20));
    int k = 3 + int(rng.below(20));
    for (int ta = 0; ta < 2; ++ta)
      for (int tb = 0; tb < 2; ++tb) {
        auto a = random_vec(rng, int64_t(m) * k);
        auto b = random_vec(rng, int64_t(k) * n);
        std::vector<float> c(size_t(m) * n, -7.0f);
        kernels::gemm(a.data(), b.data(), c.data(), m, n, k, ta, tb, false);
        auto want = gemm_oracle(a, b, m, n, k, ta, tb);
        for (size_t i = 0; i < c.size(); ++i)
          CHECK(std::fabs(double(c[i]) - want[i]) < 1e-5);
      }
  }
}

TEST_CASE("gemm accumulate adds onto existing output") {
  Rng rng(11);
  int m = 7, n = 5, k = 9;
  auto a = random_vec(rng, int64_t(m) * k);
  auto b = random_vec(rng, int64_t(k) * n);
  std::vector<float> c(size_t(m) * n, 2.5f);
  kernels::gemm(a.data(), b.data(), c.data(), m, n, k, false, false, true);
  auto want = gemm_oracle(a, b, m, n, k, false, false);
  for (size_t i = 0; i < c.size(); ++i)
    CHECK(std::fabs(double(c[i]) - (want[i] + 2.5)) < 1e-5);
}

TEST_CASE("elementwise kernels on pinned values") {
  const float x[3] = {-1.0f, 0.0f, 2.0f};
  float y[3];
  kernels::relu(x, y, 3);
  CHECK(y[0] == 0.0f);
  CHECK(y[1] == 0.0f);
  CHECK(y[2] == 2.0f);

  const float z[1] = {0.0f};
  float s[1];
  kernels::sigmoid(z, s, 1);
  CHECK(s[0] == doctest::Approx(0.5));

  // gradient only flows through strictly positive inputs
  const float dy[3] = {10.0f, 10.0f, 10.0f};
  float dx[3] = {1.0f, 1.0f, 1.0f};
  kernels::relu_backward(x, dy, dx, 3);
  CHECK(dx[0] == 1.0f);
  CHECK(dx[1] == 1.0f);
  CHECK(dx[2] == 11.0f);
}

TEST_CASE("colwise_mean_var is exact on a small pinned matrix") {
  // columns: {1,3} and {2,6}
  const float x[4] = {1.0f, 2.0f, 3.0f, 6.0f};
  double mean[2], var[2];
  kernels::colwise_mean_var(x, 2, 2, mean, var);
  CHECK(mean[0] == doctest::Approx(2.0));
  CHECK(mean[1] == doctest::Approx(4.0));
  CHECK(var[0] == doctest::Approx(1.0));
  CHECK(var[1] == doctest::Approx(4.0));
}

TEST_CASE("colwise_max breaks ties toward the lowest row") {
  const float x[6] = {5.0f, 1.0f, 5.0f, 2.0f, 4.0f, 2.0f};  // 3x2
  float y[2];
  int arg[2];
  kernels::colwise_max(x, 3, 2, y, arg);
  CHECK(y[0] == 5.0f);
  CHECK(arg[0] == 0);
  CHECK(y[1] == 2.0f);
  CHECK(arg[1] == 1);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  // Sizes past the parallelism cutoff so the OpenMP paths actually engage,
  // checked at several thread counts.
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    for (uint64_t seed = 21; seed <= 23; ++seed) {
      Rng rng(seed);
      int m = 120 + int(rng.below(40));
      int n = 130 + int(rng.below(40));
      int k = 140 + int(rng.below(40));

      for (int ta = 0; ta < 2; ++ta)
        for (int tb = 0; tb < 2; ++tb) {
          auto a = random_vec(rng, int64_t(m) * k);
          auto b = random_vec(rng, int64_t(k) * n);
          std::vector<float> c_par(size_t(m) * n), c_ref(size_t(m) * n);
          kernels::gemm(a.data(), b.data(), c_par.data(), m, n, k, ta, tb,
                        false);
          kernels::ref::gemm(a.data(), b.data(), c_ref.data(), m, n, k, ta, tb,
                             false);
          CHECK(std::memcmp(c_par.data(), c_ref.data(),
                            c_par.size() * sizeof(float)) == 0);
        }

      int64_t len = 40000 + int64_t(rng.below(5000));
      auto x = random_vec(rng, len, -3.0, 3.0);
      std::vector<float> y_par(len), y_ref(len);
      kernels::relu(x.data(), y_par.data(), len);
      kernels::ref::relu(x.data(), y_ref.data(), len);
      CHECK(std::memcmp(y_par.data(), y_ref.data(), len * sizeof(float)) == 0);
      kernels::sigmoid(x.data(), y_par.data(), len);
      kernels::ref::sigmoid(x.data(), y_ref.data(), len);
      CHECK(std::memcmp(y_par.data(), y_ref.data(), len * sizeof(float)) == 0);

      int rows = 300, cols = 160;
      auto mat = random_vec(rng, int64_t(rows) * cols);
      auto bias = random_vec(rng, cols);
      std::vector<float> o_par(size_t(rows) * cols), o_ref(size_t(rows) * cols);
      kernels::bias_add(mat.data(), bias.data(), o_par.data(), rows, cols);
      kernels::ref::bias_add(mat.data(), bias.data(), o_ref.data(), rows, cols);
      CHECK(std::memcmp(o_par.data(), o_ref.data(),
                        o_par.size() * sizeof(float)) == 0);

      std::vector<double> m_par(cols), v_par(cols), m_ref(cols), v_ref(cols);
      kernels::colwise_mean_var(mat.data(), rows, cols, m_par.data(),
                                v_par.data());
      kernels::ref::colwise_mean_var(mat.data(), rows, cols, m_ref.data(),
                                     v_ref.data());
      CHECK(std::memcmp(m_par.data(), m_ref.data(), cols * sizeof(double)) == 0);
      CHECK(std::memcmp(v_par.data(), v_ref.data(), cols * sizeof(double)) == 0);

      std::vector<float> mx_par(cols), mx_ref(cols);
      std::vector<int> am_par(cols), am_ref(cols);
      kernels::colwise_max(mat.data(), rows, cols, mx_par.data(),
                           am_par.data());
      kernels::ref::colwise_max(mat.data(), rows, cols, mx_ref.data(),
                                am_ref.data());
      CHECK(std::memcmp(mx_par.data(), mx_ref.data(), cols * sizeof(float)) ==
            0);
      CHECK(am_par == am_ref);
    }
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("rng streams are pinned") {
  // The generator is part of the on-disk determinism contract, so its output
  // for a known seed is frozen here.
  Rng rng(42);
  CHECK(rng.next_u64() == 0xbdd732262feb6e95ULL);
  Rng r2(42);
  double u = r2.uniform();
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
  Rng r3(42);
  CHECK(r3.uniform() == u);

  // child streams with different salts diverge, same salt agrees
  Rng a = Rng(7).child(1), b = Rng(7).child(1), c = Rng(7).child(2);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() != c.next_u64());

  // Box-Muller consumes exactly two uniforms per draw
  Rng g1(99), g2(99);
  (void)g1.gaussian();
  (void)g2.uniform();
  (void)g2.uniform();
  CHECK(g1.next_u64() == g2.next_u64());
}
