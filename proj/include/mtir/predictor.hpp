#ifndef MTIR_PREDICTOR_HPP
#define MTIR_PREDICTOR_HPP

#include <functional>
#include <memory>
#include <vector>

#include "mtir/shape.hpp"

namespace mtir {

// A model bound to one shape (the latent code is baked in at bind time).
// Everything the metrics need goes through this interface, so oracles and
// trained networks are interchangeable.
class ShapeModel {
 public:
  virtual ~ShapeModel() = default;
  // occupancy probability per query point, each in [0,1]
  virtual std::vector<float> occupancy_prob(const std::vector<Vec3f>& pts) = 0;
  // argmax part label per query point
  virtual std::vector<int> part_labels(const std::vector<Vec3f>& pts) = 0;
  // argmax class prediction for the bound shape
  virtual int classify() = 0;
};

// binds a model to a shape; `seed` pins any sampling the binding needs
// (e.g. drawing the input cloud the encoder consumes)
using ModelBinder = std::function<std::unique_ptr<ShapeModel>(
    const LabeledShape& shape, uint64_t seed)>;

// Ground-truth oracle: answers from the analytic shape itself. `invert`
// flips occupancy, which gives the exact-complement predictor used to pin
// IOU = 0.
class OracleModel : public ShapeModel {
 public:
  explicit OracleModel(const LabeledShape& shape, bool invert = false)
      : shape_(shape), invert_(invert) {}

  std::vector<float> occupancy_prob(const std::vector<Vec3f>& pts) override {
    std::vector<float> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      bool occ = occupancy(shape_, to_vec3(pts[i]));
      out[i] = (occ != invert_) ? 1.0f : 0.0f;
    }
    return out;
  }

  std::vector<int> part_labels(const std::vector<Vec3f>& pts) override {
    std::vector<int> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i)
      out[i] = nearest_vertex_label(shape_, to_vec3(pts[i]));
    return out;
  }

  int classify() override { return shape_.class_label; }

 private:
  const LabeledShape& shape_;
  bool invert_;
};

inline ModelBinder oracle_binder(bool invert = false) {
  return [invert](const LabeledShape& shape, uint64_t) {
    return std::make_unique<OracleModel>(shape, invert);
  };
}

}  // namespace mtir

#endif
