#ifndef MTIR_KERNELS_HPP
#define MTIR_KERNELS_HPP

#include <cmath>
#include <cstdint>
#include <vector>

// Dense numeric kernels shared by the differentiation core and the
// evaluation pipeline. Every kernel is parallelised over independent
// output elements; accumulation inside one element is always the same
// serial order, so results are bit-identical for any thread count and
// bit-identical to the serial mirrors in kernels::ref (which the tests
// and the bench tool compare against).
//
// Reductions accumulate in double regardless of the storage type T.

namespace mtir::kernels {

inline constexpr int kParallelCutoff = 16 * 1024;  // elements

// C(MxN) = op(A) * op(B) (+ C when accumulate).
// ta: A stored KxM, use A^T.  tb: B stored NxK, use B^T.
template <class T>
void gemm(const T* A, const T* B, T* C, int M, int N, int K, bool ta, bool tb,
          bool accumulate) {
  if (!ta && !tb) {
#pragma omp parallel for schedule(static) if (int64_t(M) * N * K > kParallelCutoff)
    for (int i = 0; i < M; ++i) {
      std::vector<double> acc(N, 0.0);
      const T* arow = A + int64_t(i) * K;
      for (int k = 0; k < K; ++k) {
        double a = double(arow[k]);
        const T* brow = B + int64_t(k) * N;
        for (int j = 0; j < N; ++j) acc[j] += a * double(brow[j]);
      }
      T* crow = C + int64_t(i) * N;
      for (int j = 0; j < N; ++j)
        crow[j] = accumulate ? T(double(crow[j]) + acc[j]) : T(acc[j]);
    }
  } else if (!ta && tb) {
#pragma omp parallel for schedule(static) if (int64_t(M) * N * K > kParallelCutoff)
    for (int i = 0; i < M; ++i) {
      const T* arow = A + int64_t(i) * K;
      T* crow = C + int64_t(i) * N;
      for (int j = 0; j < N; ++j) {
        const T* brow = B + int64_t(j) * K;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) acc += double(arow[k]) * double(brow[k]);
        crow[j] = accumulate ? T(double(crow[j]) + acc) : T(acc);
      }
    }
  } else if (ta && !tb) {
#pragma omp parallel for schedule(static) if (int64_t(M) * N * K > kParallelCutoff)
    for (int i = 0; i < M; ++i) {
      std::vector<double> acc(N, 0.0);
      for (int k = 0; k < K; ++k) {
        double a = double(A[int64_t(k) * M + i]);
        const T* brow = B + int64_t(k) * N;
        for (int j = 0; j < N; ++j) acc[j] += a * double(brow[j]);
      }
      T* crow = C + int64_t(i) * N;
      for (int j = 0; j < N; ++j)
        crow[j] = accumulate ? T(double(crow[j]) + acc[j]) : T(acc[j]);
    }
  } else {
#pragma omp parallel for schedule(static) if (int64_t(M) * N * K > kParallelCutoff)
    for (int i = 0; i < M; ++i) {
      T* crow = C + int64_t(i) * N;
      for (int j = 0; j < N; ++j) {
        const T* brow = B + int64_t(j) * K;
        double acc = 0.0;
        for (int k = 0; k < K; ++k)
          acc += double(A[int64_t(k) * M + i]) * double(brow[k]);
        crow[j] = accumulate ? T(double(crow[j]) + acc) : T(acc);
      }
    }
  }
}

template <class T>
void relu(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward(const T* x, const T* dy, T* dx, int64_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > T(0)) dx[i] += dy[i];
}

template <class T>
void sigmoid(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (int64_t i = 0; i < n; ++i) {
    double v = double(x[i]);
    y[i] = T(v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v)));
  }
}

// y = x + broadcast row b (x: MxN, b: N)
template <class T>
void bias_add(const T* x, const T* b, T* y, int M, int N) {
#pragma omp parallel for schedule(static) if (int64_t(M) * N > kParallelCutoff)
  for (int i = 0; i < M; ++i) {
    const T* xr = x + int64_t(i) * N;
    T* yr = y + int64_t(i) * N;
    for (int j = 0; j < N; ++j) yr[j] = xr[j] + b[j];
  }
}

// Per-column mean and biased variance of x (MxN), double accumulation.
template <class T>
void colwise_mean_var(const T* x, int M, int N, double* mean, double* var) {
#pragma omp parallel for schedule(static) if (int64_t(M) * N > kParallelCutoff)
  for (int j = 0; j < N; ++j) {
    double s = 0.0;
    for (int i = 0; i < M; ++i) s += double(x[int64_t(i) * N + j]);
    double m = s / M;
    double v = 0.0;
    for (int i = 0; i < M; ++i) {
      double d = double(x[int64_t(i) * N + j]) - m;
      v += d * d;
    }
    mean[j] = m;
    var[j] = v / M;
  }
}

// Column-wise max of x (MxN) with the smallest winning row index.
template <class T>
void colwise_max(const T* x, int M, int N, T* y, int* argrow) {
#pragma omp parallel for schedule(static) if (int64_t(M) * N > kParallelCutoff)
  for (int j = 0; j < N; ++j) {
    T best = x[j];
    int arg = 0;
    for (int i = 1; i < M; ++i) {
      T v = x[int64_t(i) * N + j];
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    y[j] = best;
    if (argrow) argrow[j] = arg;
  }
}

// Serial mirrors, kept as the reference the parallel kernels are tested
// against (bit-exact, see tests/test_kernels.cpp) and benchmarked against.
namespace ref {

template <class T>
void gemm(const T* A, const T* B, T* C, int M, int N, int K, bool ta, bool tb,
          bool accumulate) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k) {
        double a = double(ta ? A[int64_t(k) * M + i] : A[int64_t(i) * K + k]);
        double b = double(tb ? B[int64_t(j) * K + k] : B[int64_t(k) * N + j]);
        acc += a * b;
      }
      T* c = C + int64_t(i) * N + j;
      *c = accumulate ? T(double(*c) + acc) : T(acc);
    }
  }
}

template <class T>
void relu(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void sigmoid(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    double v = double(x[i]);
    y[i] = T(v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v)));
  }
}

template <class T>
void bias_add(const T* x, const T* b, T* y, int M, int N) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) y[int64_t(i) * N + j] = x[int64_t(i) * N + j] + b[j];
}

template <class T>
void colwise_mean_var(const T* x, int M, int N, double* mean, double* var) {
  for (int j = 0; j < N; ++j) {
    double s = 0.0;
    for (int i = 0; i < M; ++i) s += double(x[int64_t(i) * N + j]);
    double m = s / M;
    double v = 0.0;
    for (int i = 0; i < M; ++i) {
      double d = double(x[int64_t(i) * N + j]) - m;
      v += d * d;
    }
    mean[j] = m;
    var[j] = v / M;
  }
}

template <class T>
void colwise_max(const T* x, int M, int N, T* y, int* argrow) {
  for (int j = 0; j < N; ++j) {
    T best = x[j];
    int arg = 0;
    for (int i = 1; i < M; ++i) {
      T v = x[int64_t(i) * N + j];
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    y[j] = best;
    if (argrow) argrow[j] = arg;
  }
}

}  // namespace ref

}  // namespace mtir::kernels

#endif
