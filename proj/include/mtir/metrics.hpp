#ifndef MTIR_METRICS_HPP
#define MTIR_METRICS_HPP

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "mtir/kdtree.hpp"
#include "mtir/mesh.hpp"
#include "mtir/predictor.hpp"
#include "mtir/sample.hpp"

namespace mtir {

constexpr double kOccupancyTau = 0.5;

// Monte-Carlo intersection-over-union of predicted vs ground-truth occupied
// volume, sampled uniformly in the padded bbox. An empty union means both
// volumes are empty and scores 1.
inline double volumetric_iou(ShapeModel& model, const LabeledShape& shape,
                             int n_samples, uint64_t seed,
                             double tau = kOccupancyTau) {
  if (n_samples < 1)
    throw std::invalid_argument("volumetric_iou: n_samples must be >= 1");
  Rng rng(seed);
  double pad = default_pad(shape);
  Vec3 lo = shape.bbox_min - Vec3{pad, pad, pad};
  Vec3 hi = shape.bbox_max + Vec3{pad, pad, pad};

  std::vector<Vec3f> pts(n_samples);
  for (auto& p : pts)
    p = Vec3f{float(rng.uniform(lo.x, hi.x)), float(rng.uniform(lo.y, hi.y)),
              float(rng.uniform(lo.z, hi.z))};
  auto prob = model.occupancy_prob(pts);

  int64_t inter = 0, uni = 0;
  for (int i = 0; i < n_samples; ++i) {
    bool pred = double(prob[i]) > tau;
    bool gt = occupancy(shape, to_vec3(pts[i]));
    inter += pred && gt;
    uni += pred || gt;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

// symmetric mean nearest-neighbour distance between two sample sets
inline double chamfer_l1_points(const std::vector<Vec3>& a,
                                const std::vector<Vec3>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("chamfer_l1: empty sample set");
  KdTree ta(a), tb(b);
  double d2;
  double sum_ab = 0.0;
  for (const auto& p : a) {
    tb.nearest(p, &d2);
    sum_ab += std::sqrt(d2);
  }
  double sum_ba = 0.0;
  for (const auto& p : b) {
    ta.nearest(p, &d2);
    sum_ba += std::sqrt(d2);
  }
  return 0.5 * (sum_ab / a.size() + sum_ba / b.size());
}

inline double chamfer_l1(const Mesh& mesh_a, const Mesh& mesh_b,
                         int n_surface_samples, uint64_t seed) {
  if (mesh_a.empty() || mesh_b.empty())
    throw std::invalid_argument("chamfer_l1: empty mesh");
  auto sa = sample_mesh_surface(mesh_a, n_surface_samples, seed);
  auto sb = sample_mesh_surface(mesh_b, n_surface_samples, seed);
  return chamfer_l1_points(sa, sb);
}

struct MiouResult {
  double miou = 0.0;
  std::map<int, double> per_class;
  std::vector<double> per_shape;       // -1 marks a skipped shape
  int skipped = 0;                     // shapes with no interior samples
};

// Part mIOU over ground-truth interior points only. Each shape scores the
// mean per-part IOU over its class's part schema:
//   part has GT points or predictions -> |inter| / |union|
//   part absent from both             -> 1
// (so a never-present part cannot drag the score, but spurious predictions
// of an absent part are union-penalized). Shape scores average into the
// mIOU; per-class means are over shapes of that class.
inline MiouResult part_miou(const ModelBinder& binder,
                            const std::vector<LabeledShape>& shapes,
                            int n_interior = 10000, uint64_t seed = 0) {
  MiouResult result;
  std::map<int, std::pair<double, int>> class_sums;
  double total = 0.0;
  int counted = 0;

  for (size_t si = 0; si < shapes.size(); ++si) {
    const LabeledShape& shape = shapes[si];
    auto model = binder(shape, mix_seed(seed, si));

    // rejection-sample ground-truth interior points from the padded bbox
    Rng rng(mix_seed(seed, si * 2 + 1));
    double pad = default_pad(shape);
    Vec3 lo = shape.bbox_min - Vec3{pad, pad, pad};
    Vec3 hi = shape.bbox_max + Vec3{pad, pad, pad};
    std::vector<Vec3f> pts;
    std::vector<int> gt;
    int attempts = 0, cap = n_interior * 1000;
    while (int(pts.size()) < n_interior && attempts < cap) {
      ++attempts;
      Vec3f pf{float(rng.uniform(lo.x, hi.x)), float(rng.uniform(lo.y, hi.y)),
               float(rng.uniform(lo.z, hi.z))};
      Vec3 p = to_vec3(pf);
      if (!occupancy(shape, p)) continue;
      pts.push_back(pf);
      gt.push_back(nearest_vertex_label(shape, p));
    }
    if (pts.empty()) {
      ++result.skipped;
      result.per_shape.push_back(-1.0);
      continue;
    }

    auto pred = model->part_labels(pts);
    double shape_iou = 0.0;
    for (int part = 0; part < shape.n_parts; ++part) {
      int64_t inter = 0, uni = 0;
      for (size_t i = 0; i < pts.size(); ++i) {
        bool g = gt[i] == part, pr = pred[i] == part;
        inter += g && pr;
        uni += g || pr;
      }
      shape_iou += uni == 0 ? 1.0 : double(inter) / double(uni);
    }
    shape_iou /= shape.n_parts;

    result.per_shape.push_back(shape_iou);
    total += shape_iou;
    ++counted;
    auto& cs = class_sums[shape.class_label];
    cs.first += shape_iou;
    cs.second += 1;
  }

  result.miou = counted ? total / counted : 0.0;
  for (const auto& [cls, sums] : class_sums)
    result.per_class[cls] = sums.first / sums.second;
  return result;
}

inline double cls_accuracy(const ModelBinder& binder,
                           const std::vector<LabeledShape>& shapes,
                           uint64_t seed = 0) {
  if (shapes.empty()) return 0.0;
  int correct = 0;
  for (size_t si = 0; si < shapes.size(); ++si) {
    auto model = binder(shapes[si], mix_seed(seed, si));
    correct += model->classify() == shapes[si].class_label;
  }
  return double(correct) / double(shapes.size());
}

// Per-shape evaluation record; absent optionals mean the metric was not
// requested for this run.
struct ShapeRecord {
  uint32_t id = 0;
  int class_label = 0;
  std::optional<double> iou;
  std::optional<double> chamfer_l1;
  std::optional<double> miou;  // negative -> skipped (no interior samples)
  std::optional<bool> cls_correct;
};

struct MetricsReport {
  std::optional<double> iou;
  std::optional<double> chamfer_l1;
  std::optional<double> cls_accuracy;
  std::optional<double> miou;
  std::map<int, double> per_class_miou;  // populated only alongside miou
  int miou_skipped = 0;
  std::vector<ShapeRecord> shapes;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    if (iou) j["iou"] = *iou;
    if (chamfer_l1) j["chamfer_l1"] = *chamfer_l1;
    if (cls_accuracy) j["cls_accuracy"] = *cls_accuracy;
    if (miou) {
      j["miou"] = *miou;
      nlohmann::ordered_json pc;
      for (const auto& [cls, v] : per_class_miou)
        pc[std::to_string(cls)] = v;
      j["per_class_miou"] = pc;
      j["miou_skipped_shapes"] = miou_skipped;
    }
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : shapes) {
      nlohmann::ordered_json s;
      s["id"] = r.id;
      s["class_label"] = r.class_label;
      if (r.iou) s["iou"] = *r.iou;
      if (r.chamfer_l1) s["chamfer_l1"] = *r.chamfer_l1;
      if (r.miou) s["miou"] = *r.miou;
      if (r.cls_correct) s["cls_correct"] = *r.cls_correct;
      arr.push_back(s);
    }
    j["shapes"] = arr;
    return j;
  }
};

}  // namespace mtir

#endif
