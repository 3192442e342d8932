#ifndef MTIR_OPS_HPP
#define MTIR_OPS_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "mtir/kernels.hpp"
#include "mtir/tape.hpp"
#include "mtir/tensor.hpp"

// Forward primitives with reverse-mode backward rules. Reductions
// accumulate in double. Backward lambdas only touch operands that
// require gradients.

namespace mtir::ops {

// calibrate normalizes exactly like train but pins the running statistics
// to this batch's statistics instead of blending them in, which lets an
// evaluator measure shape-specific normalization on a reference batch
enum class BNMode { train, eval, calibrate };

struct AxisSplit {
  int64_t outer, n, inner;
};

template <class T>
AxisSplit split_axis(const TensorT<T>& t, int axis) {
  if (axis < 0 || axis >= int(t.shape.size()))
    throw std::invalid_argument("axis " + std::to_string(axis) +
                                " out of range for " + shape_str(t.shape));
  AxisSplit s{1, t.shape[axis], 1};
  for (int i = 0; i < axis; ++i) s.outer *= t.shape[i];
  for (size_t i = axis + 1; i < t.shape.size(); ++i) s.inner *= t.shape[i];
  return s;
}

template <class T>
bool track(TapeT<T>& tape, std::initializer_list<const TensorPtr<T>*> ins) {
  if (!tape.enabled()) return false;
  for (auto* p : ins)
    if ((*p)->requires_grad) return true;
  return false;
}

template <class T>
TensorPtr<T> matmul(TapeT<T>& tape, const TensorPtr<T>& a,
                    const TensorPtr<T>& b) {
  check_shapes(a->shape.size() == 2 && b->shape.size() == 2 &&
                   a->shape[1] == b->shape[0],
               "matmul", a->shape, b->shape);
  int M = a->shape[0], K = a->shape[1], N = b->shape[1];
  auto out = make_tensor<T>({M, N});
  kernels::gemm(a->v.data(), b->v.data(), out->v.data(), M, N, K, false, false,
                false);
  if (track(tape, {&a, &b})) {
    out->requires_grad = true;
    tape.record([a, b, out, M, K, N] {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        kernels::gemm(out->g.data(), b->v.data(), a->g.data(), M, K, N, false,
                      true, true);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        kernels::gemm(a->v.data(), out->g.data(), b->g.data(), K, N, M, true,
                      false, true);
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> add(TapeT<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  check_shapes(a->shape == b->shape, "add", a->shape, b->shape);
  auto out = make_tensor<T>(a->shape);
  int64_t n = out->numel();
#pragma omp parallel for schedule(static) if (n > kernels::kParallelCutoff)
  for (int64_t i = 0; i < n; ++i) out->v[i] = a->v[i] + b->v[i];
  if (track(tape, {&a, &b})) {
    out->requires_grad = true;
    tape.record([a, b, out, n] {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < n; ++i) a->g[i] += out->g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < n; ++i) b->g[i] += out->g[i];
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> mul(TapeT<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  check_shapes(a->shape == b->shape, "mul", a->shape, b->shape);
  auto out = make_tensor<T>(a->shape);
  int64_t n = out->numel();
  for (int64_t i = 0; i < n; ++i) out->v[i] = a->v[i] * b->v[i];
  if (track(tape, {&a, &b})) {
    out->requires_grad = true;
    tape.record([a, b, out, n] {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < n; ++i) a->g[i] += out->g[i] * b->v[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < n; ++i) b->g[i] += out->g[i] * a->v[i];
      }
    });
  }
  return out;
}

// x (MxN) plus a broadcast row vector (numel N)
template <class T>
TensorPtr<T> bias_add(TapeT<T>& tape, const TensorPtr<T>& x,
                      const TensorPtr<T>& b) {
  check_shapes(x->shape.size() == 2 && b->numel() == x->shape[1], "bias_add",
               x->shape, b->shape);
  int M = x->shape[0], N = x->shape[1];
  auto out = make_tensor<T>(x->shape);
  kernels::bias_add(x->v.data(), b->v.data(), out->v.data(), M, N);
  if (track(tape, {&x, &b})) {
    out->requires_grad = true;
    tape.record([x, b, out, M, N] {
      out->ensure_grad();
      if (x->requires_grad) {
        x->ensure_grad();
        for (int64_t i = 0; i < int64_t(M) * N; ++i) x->g[i] += out->g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int j = 0; j < N; ++j) {
          double s = 0.0;
          for (int i = 0; i < M; ++i) s += double(out->g[int64_t(i) * N + j]);
          b->g[j] += T(s);
        }
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> scale(TapeT<T>& tape, const TensorPtr<T>& x, double c) {
  auto out = make_tensor<T>(x->shape);
  int64_t n = out->numel();
  for (int64_t i = 0; i < n; ++i) out->v[i] = T(double(x->v[i]) * c);
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out, c, n] {
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t i = 0; i < n; ++i) x->g[i] += T(double(out->g[i]) * c);
    });
  }
  return out;
}

template <class T>
TensorPtr<T> relu(TapeT<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>(x->shape);
  int64_t n = out->numel();
  kernels::relu(x->v.data(), out->v.data(), n);
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out, n] {
      out->ensure_grad();
      x->ensure_grad();
      kernels::relu_backward(x->v.data(), out->g.data(), x->g.data(), n);
    });
  }
  return out;
}

template <class T>
TensorPtr<T> sigmoid(TapeT<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>(x->shape);
  int64_t n = out->numel();
  kernels::sigmoid(x->v.data(), out->v.data(), n);
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out, n] {
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        double s = double(out->v[i]);
        x->g[i] += T(double(out->g[i]) * s * (1.0 - s));
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> softmax(TapeT<T>& tape, const TensorPtr<T>& x, int axis) {
  auto sp = split_axis(*x, axis);
  auto out = make_tensor<T>(x->shape);
  int64_t outer = sp.outer, n = sp.n, inner = sp.inner;
#pragma omp parallel for schedule(static) if (outer * inner > 256)
  for (int64_t oi = 0; oi < outer * inner; ++oi) {
    int64_t o = oi / inner, i = oi % inner;
    const T* xs = x->v.data() + (o * n) * inner + i;
    T* ys = out->v.data() + (o * n) * inner + i;
    double mx = double(xs[0]);
    for (int64_t a = 1; a < n; ++a) mx = std::max(mx, double(xs[a * inner]));
    double sum = 0.0;
    for (int64_t a = 0; a < n; ++a) sum += std::exp(double(xs[a * inner]) - mx);
    for (int64_t a = 0; a < n; ++a)
      ys[a * inner] = T(std::exp(double(xs[a * inner]) - mx) / sum);
  }
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out, outer, n, inner] {
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t oi = 0; oi < outer * inner; ++oi) {
        int64_t o = oi / inner, i = oi % inner;
        const T* ys = out->v.data() + (o * n) * inner + i;
        const T* gs = out->g.data() + (o * n) * inner + i;
        T* xs = x->g.data() + (o * n) * inner + i;
        double dot = 0.0;
        for (int64_t a = 0; a < n; ++a)
          dot += double(gs[a * inner]) * double(ys[a * inner]);
        for (int64_t a = 0; a < n; ++a)
          xs[a * inner] +=
              T(double(ys[a * inner]) * (double(gs[a * inner]) - dot));
      }
    });
  }
  return out;
}

// max over an axis; the axis stays with size 1. Ties go to the lowest index.
template <class T>
TensorPtr<T> maxpool(TapeT<T>& tape, const TensorPtr<T>& x, int axis) {
  auto sp = split_axis(*x, axis);
  auto shape = x->shape;
  shape[axis] = 1;
  auto out = make_tensor<T>(shape);
  int64_t outer = sp.outer, n = sp.n, inner = sp.inner;
  auto arg = std::make_shared<std::vector<int>>(outer * inner);
  for (int64_t oi = 0; oi < outer * inner; ++oi) {
    int64_t o = oi / inner, i = oi % inner;
    const T* xs = x->v.data() + (o * n) * inner + i;
    T best = xs[0];
    int a_best = 0;
    for (int64_t a = 1; a < n; ++a)
      if (xs[a * inner] > best) {
        best = xs[a * inner];
        a_best = int(a);
      }
    out->v[o * inner + i] = best;
    (*arg)[oi] = a_best;
  }
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out, arg, outer, n, inner] {
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t oi = 0; oi < outer * inner; ++oi) {
        int64_t o = oi / inner, i = oi % inner;
        x->g[(o * n + (*arg)[oi]) * inner + i] += out->g[o * inner + i];
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> mean(TapeT<T>& tape, const TensorPtr<T>& x, int axis) {
  auto sp = split_axis(*x, axis);
  auto shape = x->shape;
  shape[axis] = 1;
  auto out = make_tensor<T>(shape);
  int64_t outer = sp.outer, n = sp.n, inner = sp.inner;
  for (int64_t oi = 0; oi < outer * inner; ++oi) {
    int64_t o = oi / inner, i = oi % inner;
    const T* xs = x->v.data() + (o * n) * inner + i;
    double s = 0.0;
    for (int64_t a = 0; a < n; ++a) s += double(xs[a * inner]);
    out->v[o * inner + i] = T(s / double(n));
  }
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out, outer, n, inner] {
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t oi = 0; oi < outer * inner; ++oi) {
        int64_t o = oi / inner, i = oi % inner;
        T g = T(double(out->g[o * inner + i]) / double(n));
        for (int64_t a = 0; a < n; ++a) x->g[(o * n + a) * inner + i] += g;
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> concat(TapeT<T>& tape, const TensorPtr<T>& a,
                    const TensorPtr<T>& b, int axis) {
  if (a->shape.size() != b->shape.size())
    check_shapes(false, "concat", a->shape, b->shape);
  for (int i = 0; i < int(a->shape.size()); ++i)
    if (i != axis)
      check_shapes(a->shape[i] == b->shape[i], "concat", a->shape, b->shape);
  auto spa = split_axis(*a, axis);
  auto spb = split_axis(*b, axis);
  auto shape = a->shape;
  shape[axis] += b->shape[axis];
  auto out = make_tensor<T>(shape);
  int64_t outer = spa.outer, na = spa.n, nb = spb.n, inner = spa.inner;
  for (int64_t o = 0; o < outer; ++o) {
    T* dst = out->v.data() + o * (na + nb) * inner;
    std::copy_n(a->v.data() + o * na * inner, na * inner, dst);
    std::copy_n(b->v.data() + o * nb * inner, nb * inner, dst + na * inner);
  }
  if (track(tape, {&a, &b})) {
    out->requires_grad = true;
    tape.record([a, b, out, outer, na, nb, inner] {
      out->ensure_grad();
      for (int64_t o = 0; o < outer; ++o) {
        const T* src = out->g.data() + o * (na + nb) * inner;
        if (a->requires_grad) {
          a->ensure_grad();
          T* ga = a->g.data() + o * na * inner;
          for (int64_t i = 0; i < na * inner; ++i) ga[i] += src[i];
        }
        if (b->requires_grad) {
          b->ensure_grad();
          T* gb = b->g.data() + o * nb * inner;
          for (int64_t i = 0; i < nb * inner; ++i) gb[i] += src[na * inner + i];
        }
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> slice(TapeT<T>& tape, const TensorPtr<T>& x, int axis, int start,
                   int len) {
  auto sp = split_axis(*x, axis);
  if (start < 0 || len < 1 || start + len > sp.n)
    throw std::invalid_argument("slice: range [" + std::to_string(start) +
                                "," + std::to_string(start + len) +
                                ") out of bounds for " + shape_str(x->shape));
  auto shape = x->shape;
  shape[axis] = len;
  auto out = make_tensor<T>(shape);
  int64_t outer = sp.outer, n = sp.n, inner = sp.inner;
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(x->v.data() + (o * n + start) * inner, int64_t(len) * inner,
                out->v.data() + o * len * inner);
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out, outer, n, inner, start, len] {
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t o = 0; o < outer; ++o) {
        const T* src = out->g.data() + o * len * inner;
        T* dst = x->g.data() + (o * n + start) * inner;
        for (int64_t i = 0; i < int64_t(len) * inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> sum_all(TapeT<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>({1});
  double s = 0.0;
  for (int64_t i = 0; i < x->numel(); ++i) s += double(x->v[i]);
  out->v[0] = T(s);
  if (track(tape, {&x})) {
    out->requires_grad = true;
    tape.record([x, out] {
      out->ensure_grad();
      x->ensure_grad();
      for (int64_t i = 0; i < x->numel(); ++i) x->g[i] += out->g[0];
    });
  }
  return out;
}

// Batch normalization over the batch (row) axis of x (NxF), with affine
// tensors gamma/beta (numel F) that may themselves be tape outputs — this
// is how conditional batchnorm injects the latent code. Running statistics
// live in the caller's state tensors and are only read in eval mode.
template <class T>
struct BNStateT {
  TensorPtr<T> running_mean;  // {F}
  TensorPtr<T> running_var;   // {F}
};

template <class T>
TensorPtr<T> batchnorm(TapeT<T>& tape, const TensorPtr<T>& x,
                       const TensorPtr<T>& gamma, const TensorPtr<T>& beta,
                       BNStateT<T>& state, BNMode mode, double eps = 1e-5,
                       double momentum = 0.9) {
  check_shapes(x->shape.size() == 2, "batchnorm", x->shape, x->shape);
  int M = x->shape[0], F = x->shape[1];
  check_shapes(gamma->numel() == F, "batchnorm", x->shape, gamma->shape);
  check_shapes(beta->numel() == F, "batchnorm", x->shape, beta->shape);
  auto out = make_tensor<T>(x->shape);
  auto xhat = std::make_shared<std::vector<T>>(size_t(M) * F);
  auto inv = std::make_shared<std::vector<double>>(F);

  if (mode != BNMode::eval) {
    std::vector<double> mu(F), var(F);
    kernels::colwise_mean_var(x->v.data(), M, F, mu.data(), var.data());
    for (int j = 0; j < F; ++j) (*inv)[j] = 1.0 / std::sqrt(var[j] + eps);
#pragma omp parallel for schedule(static) if (int64_t(M) * F > kernels::kParallelCutoff)
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < F; ++j) {
        double h = (double(x->at(i, j)) - mu[j]) * (*inv)[j];
        (*xhat)[size_t(i) * F + j] = T(h);
        out->at(i, j) = T(double(gamma->v[j]) * h + double(beta->v[j]));
      }
    if (mode == BNMode::calibrate) {
      for (int j = 0; j < F; ++j) {
        state.running_mean->v[j] = T(mu[j]);
        state.running_var->v[j] = T(var[j]);
      }
    } else {
      for (int j = 0; j < F; ++j) {
        state.running_mean->v[j] = T(momentum * double(state.running_mean->v[j]) +
                                     (1 - momentum) * mu[j]);
        state.running_var->v[j] = T(momentum * double(state.running_var->v[j]) +
                                    (1 - momentum) * var[j]);
      }
    }
  } else {
    for (int j = 0; j < F; ++j)
      (*inv)[j] = 1.0 / std::sqrt(double(state.running_var->v[j]) + eps);
#pragma omp parallel for schedule(static) if (int64_t(M) * F > kernels::kParallelCutoff)
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < F; ++j) {
        double h =
            (double(x->at(i, j)) - double(state.running_mean->v[j])) * (*inv)[j];
        (*xhat)[size_t(i) * F + j] = T(h);
        out->at(i, j) = T(double(gamma->v[j]) * h + double(beta->v[j]));
      }
  }

  if (track(tape, {&x, &gamma, &beta})) {
    out->requires_grad = true;
    tape.record([x, gamma, beta, out, xhat, inv, M, F, mode] {
      out->ensure_grad();
      if (gamma->requires_grad) {
        gamma->ensure_grad();
        for (int j = 0; j < F; ++j) {
          double s = 0.0;
          for (int i = 0; i < M; ++i)
            s += double(out->g[int64_t(i) * F + j]) *
                 double((*xhat)[size_t(i) * F + j]);
          gamma->g[j] += T(s);
        }
      }
      if (beta->requires_grad) {
        beta->ensure_grad();
        for (int j = 0; j < F; ++j) {
          double s = 0.0;
          for (int i = 0; i < M; ++i) s += double(out->g[int64_t(i) * F + j]);
          beta->g[j] += T(s);
        }
      }
      if (!x->requires_grad) return;
      x->ensure_grad();
      if (mode == BNMode::eval) {
        // pure per-element affine map
        for (int i = 0; i < M; ++i)
          for (int j = 0; j < F; ++j)
            x->g[int64_t(i) * F + j] += T(double(out->g[int64_t(i) * F + j]) *
                                          double(gamma->v[j]) * (*inv)[j]);
        return;
      }
      for (int j = 0; j < F; ++j) {
        double s1 = 0.0, s2 = 0.0;
        double g = double(gamma->v[j]);
        for (int i = 0; i < M; ++i) {
          double dxh = double(out->g[int64_t(i) * F + j]) * g;
          s1 += dxh;
          s2 += dxh * double((*xhat)[size_t(i) * F + j]);
        }
        double k = (*inv)[j] / double(M);
        for (int i = 0; i < M; ++i) {
          double dxh = double(out->g[int64_t(i) * F + j]) * g;
          double h = double((*xhat)[size_t(i) * F + j]);
          x->g[int64_t(i) * F + j] += T(k * (double(M) * dxh - s1 - h * s2));
        }
      }
    });
  }
  return out;
}

// Mean binary cross entropy on sigmoid(logit), stable logit form.
template <class T>
TensorPtr<T> bce_with_logits_mean(TapeT<T>& tape, const TensorPtr<T>& logits,
                                  const std::vector<uint8_t>& targets) {
  int64_t n = logits->numel();
  if (int64_t(targets.size()) != n)
    throw std::invalid_argument("bce_with_logits_mean: " + std::to_string(n) +
                                " logits vs " + std::to_string(targets.size()) +
                                " targets");
  auto out = make_tensor<T>({1});
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double x = double(logits->v[i]);
    double y = targets[i] ? 1.0 : 0.0;
    s += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::fabs(x)));
  }
  out->v[0] = T(s / double(n));
  if (track(tape, {&logits})) {
    out->requires_grad = true;
    auto targets_copy = std::make_shared<std::vector<uint8_t>>(targets);
    tape.record([logits, out, targets_copy, n] {
      out->ensure_grad();
      logits->ensure_grad();
      double g = double(out->g[0]) / double(n);
      for (int64_t i = 0; i < n; ++i) {
        double x = double(logits->v[i]);
        double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        logits->g[i] += T(g * (sig - ((*targets_copy)[i] ? 1.0 : 0.0)));
      }
    });
  }
  return out;
}

// Mean cross entropy with log-softmax over rows of logits (NxK). When a
// mask is given, only rows with mask!=0 contribute; with no active rows the
// result is an exact zero (callers count that case). Returns the scalar.
template <class T>
TensorPtr<T> softmax_xent_mean(TapeT<T>& tape, const TensorPtr<T>& logits,
                               const std::vector<int>& labels,
                               const std::vector<uint8_t>& mask = {}) {
  check_shapes(logits->shape.size() == 2, "softmax_xent_mean", logits->shape,
               logits->shape);
  int N = logits->shape[0], K = logits->shape[1];
  if (int(labels.size()) != N)
    throw std::invalid_argument("softmax_xent_mean: " + std::to_string(N) +
                                " rows vs " + std::to_string(labels.size()) +
                                " labels");
  if (!mask.empty() && int(mask.size()) != N)
    throw std::invalid_argument("softmax_xent_mean: bad mask length");
  int64_t count = 0;
  for (int i = 0; i < N; ++i)
    if (mask.empty() || mask[i]) ++count;
  auto out = make_tensor<T>({1});
  if (count == 0) return out;  // exact zero
  double s = 0.0;
  for (int i = 0; i < N; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    int y = labels[i];
    if (y < 0 || y >= K)
      throw std::invalid_argument("softmax_xent_mean: label " +
                                  std::to_string(y) + " out of range K=" +
                                  std::to_string(K));
    const T* row = logits->v.data() + int64_t(i) * K;
    double mx = double(row[0]);
    for (int j = 1; j < K; ++j) mx = std::max(mx, double(row[j]));
    double lse = 0.0;
    for (int j = 0; j < K; ++j) lse += std::exp(double(row[j]) - mx);
    s += std::log(lse) + mx - double(row[y]);
  }
  out->v[0] = T(s / double(count));
  if (track(tape, {&logits})) {
    out->requires_grad = true;
    auto mask_copy = std::make_shared<std::vector<uint8_t>>(mask);
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    tape.record([logits, out, mask_copy, labels_copy, N, K, count] {
      out->ensure_grad();
      logits->ensure_grad();
      double g = double(out->g[0]) / double(count);
      for (int i = 0; i < N; ++i) {
        if (!mask_copy->empty() && !(*mask_copy)[i]) continue;
        const T* row = logits->v.data() + int64_t(i) * K;
        T* grow = logits->g.data() + int64_t(i) * K;
        double mx = double(row[0]);
        for (int j = 1; j < K; ++j) mx = std::max(mx, double(row[j]));
        double lse = 0.0;
        for (int j = 0; j < K; ++j) lse += std::exp(double(row[j]) - mx);
        for (int j = 0; j < K; ++j) {
          double p = std::exp(double(row[j]) - mx) / lse;
          grow[j] += T(g * (p - ((*labels_copy)[i] == j ? 1.0 : 0.0)));
        }
      }
    });
  }
  return out;
}

}  // namespace mtir::ops

#endif
