#ifndef MTIR_TAPE_HPP
#define MTIR_TAPE_HPP

#include <functional>
#include <stdexcept>
#include <vector>

#include "mtir/tensor.hpp"

namespace mtir {

// Record of the forward pass in execution (topological) order. backward()
// visits the records exactly once, in reverse, accumulating into the
// operand gradient buffers. A tape and its tensors belong to one thread.
template <class T>
class TapeT {
 public:
  void record(std::function<void()> back) {
    if (enabled_) nodes_.push_back(std::move(back));
  }

  bool enabled() const { return enabled_; }
  void set_enabled(bool e) { enabled_ = e; }

  void backward(const TensorPtr<T>& loss) {
    if (!loss->is_scalar())
      throw std::invalid_argument("backward: loss must be scalar, got " +
                                  shape_str(loss->shape));
    loss->ensure_grad();
    loss->g[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::function<void()>> nodes_;
  bool enabled_ = true;
};

using Tape = TapeT<float>;

}  // namespace mtir

#endif
