#ifndef MTIR_PARAM_STORE_HPP
#define MTIR_PARAM_STORE_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtir/rng.hpp"
#include "mtir/tensor.hpp"

namespace mtir {

// Named tensor registry with a stable insertion order: checkpoints, the
// optimizer and freeze masks all walk the same sequence.
template <class T>
class ParamStoreT {
 public:
  TensorPtr<T> add(const std::string& name, std::vector<int> shape,
                   bool trainable = true) {
    if (index_.count(name))
      throw std::invalid_argument("param store: duplicate name " + name);
    auto t = make_tensor<T>(std::move(shape), trainable);
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
  }

  TensorPtr<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("param store: no tensor named " + name);
    return items_[it->second].second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, TensorPtr<T>>>& items() const {
    return items_;
  }

 private:
  std::vector<std::pair<std::string, TensorPtr<T>>> items_;
  std::map<std::string, size_t> index_;
};

// Glorot-uniform fill in +/- gain*sqrt(6/(fan_in+fan_out)).
template <class T>
void init_glorot(TensorT<T>& w, int fan_in, int fan_out, Rng& rng,
                 double gain = 1.0) {
  double a = gain * std::sqrt(6.0 / double(fan_in + fan_out));
  for (auto& x : w.v) x = T(rng.uniform(-a, a));
}

template <class T>
void fill_value(TensorT<T>& t, double c) {
  for (auto& x : t.v) x = T(c);
}

}  // namespace mtir

#endif
