#ifndef MTIR_TENSOR_HPP
#define MTIR_TENSOR_HPP

#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtir {

// n-d numeric array, row-major, with an optional gradient buffer of the
// same shape. T is float on the production path; the gradient-check
// oracle instantiates the whole stack with double.
template <class T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> v;
  std::vector<T> g;
  bool requires_grad = false;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    v.assign(numel(), T(0));
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const {
    int64_t n = 1;
    for (size_t i = 1; i < shape.size(); ++i) n *= shape[i];
    return int(n);
  }
  T& at(int i, int j) { return v[int64_t(i) * cols() + j]; }
  T at(int i, int j) const { return v[int64_t(i) * cols() + j]; }

  bool is_scalar() const { return numel() == 1; }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), T(0));
  }
  void zero_grad() {
    if (!g.empty()) std::fill(g.begin(), g.end(), T(0));
  }
};

template <class T>
using TensorPtr = std::shared_ptr<TensorT<T>>;

template <class T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
  auto t = std::make_shared<TensorT<T>>(std::move(shape));
  t->requires_grad = requires_grad;
  return t;
}

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline void check_shapes(bool ok, const char* op, const std::vector<int>& a,
                         const std::vector<int>& b) {
  if (!ok)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
}

}  // namespace mtir

#endif
