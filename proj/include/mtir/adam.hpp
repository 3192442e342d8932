#ifndef MTIR_ADAM_HPP
#define MTIR_ADAM_HPP

#include <cmath>
#include <vector>

#include "mtir/tensor.hpp"

namespace mtir {

// ADAM with bias correction. Moment buffers and all update arithmetic are
// double precision regardless of the parameter scalar type, which keeps
// long runs bit-reproducible and step-order independent of T's rounding.
template <class T>
class AdamT {
 public:
  explicit AdamT(std::vector<TensorPtr<T>> params, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& p : params) {
      p->ensure_grad();
      Slot s;
      s.p = std::move(p);
      s.m.assign(size_t(s.p->numel()), 0.0);
      s.v.assign(size_t(s.p->numel()), 0.0);
      slots_.push_back(std::move(s));
    }
  }

  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, double(t_));
    double bc2 = 1.0 - std::pow(b2_, double(t_));
    for (auto& s : slots_) {
      if (int64_t(s.m.size()) != s.p->numel())
        throw std::invalid_argument("adam: parameter changed shape");
      s.p->ensure_grad();
      for (size_t i = 0; i < s.m.size(); ++i) {
        double g = double(s.p->g[i]);
        s.m[i] = b1_ * s.m[i] + (1.0 - b1_) * g;
        s.v[i] = b2_ * s.v[i] + (1.0 - b2_) * g * g;
        double mhat = s.m[i] / bc1;
        double vhat = s.v[i] / bc2;
        s.p->v[i] =
            T(double(s.p->v[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void zero_grad() {
    for (auto& s : slots_) s.p->zero_grad();
  }

  int64_t t() const { return t_; }

 private:
  struct Slot {
    TensorPtr<T> p;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
};

}  // namespace mtir

#endif
