// Times the OpenMP kernels against their serial reference twins and checks
// the outputs stay bit-identical while doing so.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "mtir/kernels.hpp"
#include "mtir/rng.hpp"

using namespace mtir;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    fn();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  Rng rng(1234);

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-26s %12s %12s %9s  %s\n", "kernel", "serial(ms)",
              "parallel(ms)", "speedup", "bit-equal");

  auto report = [](const char* name, double ts, double tp, bool same) {
    std::printf("%-26s %12.3f %12.3f %8.2fx  %s\n", name, ts, tp, ts / tp,
                same ? "yes" : "NO");
  };

  {
    int m = 256, n = 256, k = 256;
    std::vector<float> a(size_t(m) * k), b(size_t(k) * n);
    for (auto& x : a) x = float(rng.uniform(-1, 1));
    for (auto& x : b) x = float(rng.uniform(-1, 1));
    std::vector<float> cs(size_t(m) * n), cp(size_t(m) * n);
    for (int ta = 0; ta < 2; ++ta)
      for (int tb = 0; tb < 2; ++tb) {
        double ts = time_best_of(reps, [&] {
          kernels::ref::gemm(a.data(), b.data(), cs.data(), m, n, k, ta, tb,
                             false);
        });
        double tp = time_best_of(reps, [&] {
          kernels::gemm(a.data(), b.data(), cp.data(), m, n, k, ta, tb, false);
        });
        char name[64];
        std::snprintf(name, sizeof name, "gemm 256^3 %c%c", ta ? 't' : 'n',
                      tb ? 't' : 'n');
        report(name, ts, tp,
               std::memcmp(cs.data(), cp.data(), cs.size() * sizeof(float)) ==
                   0);
      }
  }

  {
    int64_t n = 4 << 20;
    std::vector<float> x(n), ys(n), yp(n);
    for (auto& v : x) v = float(rng.uniform(-4, 4));
    double ts = time_best_of(
        reps, [&] { kernels::ref::sigmoid(x.data(), ys.data(), n); });
    double tp =
        time_best_of(reps, [&] { kernels::sigmoid(x.data(), yp.data(), n); });
    report("sigmoid 4M", ts, tp,
           std::memcmp(ys.data(), yp.data(), size_t(n) * sizeof(float)) == 0);

    ts = time_best_of(reps,
                      [&] { kernels::ref::relu(x.data(), ys.data(), n); });
    tp = time_best_of(reps, [&] { kernels::relu(x.data(), yp.data(), n); });
    report("relu 4M", ts, tp,
           std::memcmp(ys.data(), yp.data(), size_t(n) * sizeof(float)) == 0);
  }

  {
    int rows = 4096, cols = 256;
    std::vector<float> x(size_t(rows) * cols), b(cols);
    for (auto& v : x) v = float(rng.uniform(-1, 1));
    for (auto& v : b) v = float(rng.uniform(-1, 1));
    std::vector<float> os(x.size()), op(x.size());
    double ts = time_best_of(reps, [&] {
      kernels::ref::bias_add(x.data(), b.data(), os.data(), rows, cols);
    });
    double tp = time_best_of(reps, [&] {
      kernels::bias_add(x.data(), b.data(), op.data(), rows, cols);
    });
    report("bias_add 4096x256", ts, tp,
           std::memcmp(os.data(), op.data(), os.size() * sizeof(float)) == 0);

    std::vector<double> ms(cols), vs(cols), mp(cols), vp(cols);
    ts = time_best_of(reps, [&] {
      kernels::ref::colwise_mean_var(x.data(), rows, cols, ms.data(),
                                     vs.data());
    });
    tp = time_best_of(reps, [&] {
      kernels::colwise_mean_var(x.data(), rows, cols, mp.data(), vp.data());
    });
    report("colwise_mean_var", ts, tp,
           std::memcmp(ms.data(), mp.data(), cols * sizeof(double)) == 0 &&
               std::memcmp(vs.data(), vp.data(), cols * sizeof(double)) == 0);

    std::vector<float> mxs(cols), mxp(cols);
    std::vector<int> as(cols), ap(cols);
    ts = time_best_of(reps, [&] {
      kernels::ref::colwise_max(x.data(), rows, cols, mxs.data(), as.data());
    });
    tp = time_best_of(reps, [&] {
      kernels::colwise_max(x.data(), rows, cols, mxp.data(), ap.data());
    });
    report("colwise_max", ts, tp,
           std::memcmp(mxs.data(), mxp.data(), cols * sizeof(float)) == 0 &&
               as == ap);
  }

  return 0;
}
