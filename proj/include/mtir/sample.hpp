#ifndef MTIR_SAMPLE_HPP
#define MTIR_SAMPLE_HPP

#include <cstdint>
#include <vector>

#include "mtir/shape.hpp"

namespace mtir {

constexpr int kCloudSize = 300;
constexpr uint16_t kBackgroundLabel = 0;

// One training/eval view of a shape: labeled occupancy queries plus the
// noisy surface cloud the encoder sees.
struct SampleBatch {
  std::vector<Vec3f> query_points;        // N x 3
  std::vector<uint8_t> gt_occupancy;      // N
  std::vector<uint16_t> gt_part_label;    // N; background outside
  std::vector<Vec3f> input_cloud;         // n_cloud x 3 (default kCloudSize)
  uint32_t class_label = 0;
};

// Queries are uniform in the bbox grown by `pad` on every side. Points are
// rounded to f32 before ground truth is evaluated, so the stored labels
// are exactly the labels of the stored coordinates.
inline SampleBatch sample_batch(const LabeledShape& shape, int n_query,
                                double pad, double noise_sigma, uint64_t seed,
                                int n_cloud = kCloudSize) {
  if (n_query < 1)
    throw std::invalid_argument("sample_batch: n_query must be >= 1");
  if (pad < 0.0) throw std::invalid_argument("sample_batch: pad must be >= 0");
  if (n_cloud < 1)
    throw std::invalid_argument("sample_batch: n_cloud must be >= 1");

  SampleBatch batch;
  batch.class_label = uint32_t(shape.class_label);
  batch.query_points.resize(n_query);
  batch.gt_occupancy.resize(n_query);
  batch.gt_part_label.resize(n_query);
  batch.input_cloud.resize(n_cloud);

  Rng rng(seed);
  Vec3 lo = shape.bbox_min - Vec3{pad, pad, pad};
  Vec3 hi = shape.bbox_max + Vec3{pad, pad, pad};

  for (int i = 0; i < n_query; ++i) {
    Vec3f pf{float(rng.uniform(lo.x, hi.x)), float(rng.uniform(lo.y, hi.y)),
             float(rng.uniform(lo.z, hi.z))};
    Vec3 p = to_vec3(pf);
    bool occ = occupancy(shape, p);
    batch.query_points[i] = pf;
    batch.gt_occupancy[i] = occ ? 1 : 0;
    batch.gt_part_label[i] =
        occ ? uint16_t(nearest_vertex_label(shape, p)) : kBackgroundLabel;
  }

  std::vector<double> cum_area;
  double total = 0.0;
  for (const auto& prim : shape.primitives)
    cum_area.push_back(total += surface_area(prim));

  for (int i = 0; i < n_cloud; ++i) {
    Vec3 p;
    for (;;) {
      double u = rng.uniform() * total;
      size_t k = std::lower_bound(cum_area.begin(), cum_area.end(), u) -
                 cum_area.begin();
      p = surface_sample(shape.primitives[std::min(
                             k, shape.primitives.size() - 1)],
                         rng);
      if (sdf(shape, p) > -1e-9) break;
    }
    p.x += noise_sigma * rng.gaussian();
    p.y += noise_sigma * rng.gaussian();
    p.z += noise_sigma * rng.gaussian();
    batch.input_cloud[i] = to_vec3f(p);
  }
  return batch;
}

}  // namespace mtir

#endif
