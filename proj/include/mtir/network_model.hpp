#ifndef MTIR_NETWORK_MODEL_HPP
#define MTIR_NETWORK_MODEL_HPP

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mtir/networks.hpp"
#include "mtir/predictor.hpp"
#include "mtir/sample.hpp"

namespace mtir {

// queries are decoded in chunks so memory stays flat on dense grids
constexpr int kEvalChunk = 8192;
// reference batch used to measure a shape's normalization statistics
constexpr int kCalibrationPoints = 2048;

// A trained network bound to one shape. The input cloud is drawn once at
// bind time (pinned by the seed) and encoded. Because training normalizes
// each shape's query batch on its own, the decoders' batch statistics are
// shape-specific; binding measures them on a pinned uniform batch and
// every query then runs in eval mode under those statistics, so repeated
// calls are deterministic and independent of the query set. The network's
// own running statistics are put back after every call, leaving the model
// exactly as loaded.
class NetworkModel : public ShapeModel {
 public:
  NetworkModel(MultiTaskModelT<float>& net, const LabeledShape& shape,
               uint64_t seed, double noise_sigma)
      : net_(net) {
    SampleBatch batch = sample_batch(shape, 1, default_pad(shape), noise_sigma,
                                     seed, net.cfg.cloud_points);
    auto cloud = make_tensor<float>({net.cfg.cloud_points, 3});
    for (int i = 0; i < net.cfg.cloud_points; ++i)
      for (int j = 0; j < 3; ++j)
        cloud->at(i, j) = batch.input_cloud[size_t(i)][size_t(j)];
    TapeT<float> tape;
    tape.set_enabled(false);
    z_ = net_.encoder.encode(tape, cloud);

    checkpoint_stats_ = snapshot_stats();
    calibrate(shape, mix_seed(seed, 0xCA11B8ull));
    shape_stats_ = snapshot_stats();
    restore_stats(checkpoint_stats_);
  }

  std::vector<float> occupancy_prob(const std::vector<Vec3f>& pts) override {
    if (!net_.tasks.rec)
      throw std::logic_error("model has no occupancy head");
    std::vector<float> out(pts.size());
    for_chunks(pts, [&](size_t base, const TensorPtr<float>& logits_occ,
                        const TensorPtr<float>&) {
      for (int64_t i = 0; i < logits_occ->numel(); ++i) {
        double x = double(logits_occ->v[size_t(i)]);
        double p = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                          : std::exp(x) / (1.0 + std::exp(x));
        out[base + size_t(i)] = float(p);
      }
    });
    return out;
  }

  std::vector<int> part_labels(const std::vector<Vec3f>& pts) override {
    if (!net_.tasks.seg)
      throw std::logic_error("model has no segmentation head");
    std::vector<int> out(pts.size());
    const int K = net_.cfg.n_parts;
    for_chunks(pts, [&](size_t base, const TensorPtr<float>&,
                        const TensorPtr<float>& logits_seg) {
      int rows = logits_seg->shape[0];
      for (int i = 0; i < rows; ++i) {
        int best = 0;
        for (int j = 1; j < K; ++j)
          if (logits_seg->at(i, j) > logits_seg->at(i, best)) best = j;
        out[base + size_t(i)] = best;
      }
    });
    return out;
  }

  int classify() override {
    if (!net_.classifier)
      throw std::logic_error("model has no classification head");
    TapeT<float> tape;
    tape.set_enabled(false);
    auto logits = net_.classifier->forward(tape, z_);
    int best = 0;
    for (int j = 1; j < net_.cfg.n_classes; ++j)
      if (logits->at(0, j) > logits->at(0, best)) best = j;
    return best;
  }

 private:
  using StatSnapshot =
      std::vector<std::pair<TensorPtr<float>, std::vector<float>>>;

  StatSnapshot snapshot_stats() const {
    StatSnapshot snap;
    for (const auto& [name, tensor] : net_.store.items())
      if (name.ends_with(".running_mean") || name.ends_with(".running_var"))
        snap.emplace_back(tensor, tensor->v);
    return snap;
  }

  static void restore_stats(const StatSnapshot& snap) {
    for (const auto& [tensor, values] : snap) tensor->v = values;
  }

  // a calibrate-mode decode of pinned uniform points writes this shape's
  // batch statistics into the network's stat tensors
  void calibrate(const LabeledShape& shape, uint64_t seed) {
    Rng rng(seed);
    double pad = default_pad(shape);
    Vec3 lo = shape.bbox_min - Vec3{pad, pad, pad};
    Vec3 hi = shape.bbox_max + Vec3{pad, pad, pad};
    auto q = make_tensor<float>({kCalibrationPoints, 3});
    for (int i = 0; i < kCalibrationPoints; ++i) {
      q->at(i, 0) = float(rng.uniform(lo.x, hi.x));
      q->at(i, 1) = float(rng.uniform(lo.y, hi.y));
      q->at(i, 2) = float(rng.uniform(lo.z, hi.z));
    }
    TapeT<float> tape;
    tape.set_enabled(false);
    net_.decode(tape, z_, q, ops::BNMode::calibrate);
  }

  template <class Fn>
  void for_chunks(const std::vector<Vec3f>& pts, Fn&& fn) {
    restore_stats(shape_stats_);
    TapeT<float> tape;
    tape.set_enabled(false);
    for (size_t base = 0; base < pts.size(); base += kEvalChunk) {
      size_t n = std::min(size_t(kEvalChunk), pts.size() - base);
      auto q = make_tensor<float>({int(n), 3});
      for (size_t i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) q->at(int(i), j) = pts[base + i][size_t(j)];
      auto heads = net_.decode(tape, z_, q, ops::BNMode::eval);
      fn(base, heads.occ_logits, heads.seg_logits);
    }
    restore_stats(checkpoint_stats_);
  }

  MultiTaskModelT<float>& net_;
  TensorPtr<float> z_;
  StatSnapshot checkpoint_stats_;  // as loaded, put back after every call
  StatSnapshot shape_stats_;       // measured on this shape's pinned batch
};

// evaluation-time binder: one eval cloud per (shape, seed) pair
inline ModelBinder network_binder(MultiTaskModelT<float>& net,
                                  double noise_sigma = 0.05) {
  return [&net, noise_sigma](const LabeledShape& shape, uint64_t seed) {
    return std::make_unique<NetworkModel>(net, shape, seed, noise_sigma);
  };
}

}  // namespace mtir

#endif
