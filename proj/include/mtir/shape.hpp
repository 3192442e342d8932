#ifndef MTIR_SHAPE_HPP
#define MTIR_SHAPE_HPP

#include <stdexcept>
#include <vector>

#include "mtir/kdtree.hpp"
#include "mtir/primitive.hpp"

namespace mtir {

constexpr double kSurfaceEps = 1e-4;

// Union of labeled primitives plus a sampled, labeled surface point set.
// The surface vertices drive nearest-vertex semantic labeling, which
// partitions the interior into per-part Voronoi cells.
struct LabeledShape {
  int class_label = 0;
  int n_parts = 1;  // size of this family's part schema
  std::vector<Primitive> primitives;
  std::vector<Vec3> surface_vertices;
  std::vector<int> vertex_labels;
  Vec3 bbox_min{0, 0, 0}, bbox_max{0, 0, 0};
  KdTree tree;  // over surface_vertices
};

inline double sdf(const LabeledShape& shape, const Vec3& p) {
  double best = sdf(shape.primitives.at(0), p);
  for (size_t i = 1; i < shape.primitives.size(); ++i)
    best = std::min(best, sdf(shape.primitives[i], p));
  return best;
}

// interior test; equals sigma(-sdf) > 0.5 wherever sdf != 0
inline bool occupancy(const LabeledShape& shape, const Vec3& p) {
  return sdf(shape, p) < 0.0;
}

inline Vec3 sdf_gradient(const LabeledShape& shape, const Vec3& p,
                         double h = 1e-5) {
  Vec3 g;
  for (int d = 0; d < 3; ++d) {
    Vec3 lo = p, hi = p;
    lo[d] -= h;
    hi[d] += h;
    g[d] = (sdf(shape, hi) - sdf(shape, lo)) / (2.0 * h);
  }
  return g;
}

// semantic label of the nearest surface vertex (lowest index on ties);
// callers treat exterior points as background themselves
inline int nearest_vertex_label(const LabeledShape& shape, const Vec3& p) {
  if (shape.surface_vertices.empty())
    throw std::invalid_argument("nearest_vertex_label: shape has no vertices");
  return shape.vertex_labels[shape.tree.nearest(p)];
}

inline double bbox_diagonal(const LabeledShape& shape) {
  return norm(shape.bbox_max - shape.bbox_min);
}

// default padding for query sampling: a tenth of the bbox diagonal
inline double default_pad(const LabeledShape& shape) {
  return 0.1 * bbox_diagonal(shape);
}

// Assembles a shape: bbox from primitive bounds, then `n_surface`
// area-weighted surface samples rejected while strictly inside the union,
// then a guaranteed sample for any part the first pass missed.
inline LabeledShape make_shape(int class_label, int n_parts,
                               std::vector<Primitive> primitives, Rng& rng,
                               int n_surface = 2048) {
  if (primitives.empty())
    throw std::invalid_argument("make_shape: no primitives");
  LabeledShape shape;
  shape.class_label = class_label;
  shape.n_parts = n_parts;
  shape.primitives = std::move(primitives);

  for (const auto& prim : shape.primitives) {
    validate(prim);
    if (prim.part_label >= n_parts)
      throw std::invalid_argument("make_shape: part_label " +
                                  std::to_string(prim.part_label) +
                                  " outside schema of " +
                                  std::to_string(n_parts) + " parts");
  }

  Vec3 lo, hi;
  bbox(shape.primitives[0], shape.bbox_min, shape.bbox_max);
  for (size_t i = 1; i < shape.primitives.size(); ++i) {
    bbox(shape.primitives[i], lo, hi);
    shape.bbox_min = vmin(shape.bbox_min, lo);
    shape.bbox_max = vmax(shape.bbox_max, hi);
  }

  std::vector<double> cum_area;
  double total = 0.0;
  for (const auto& prim : shape.primitives)
    cum_area.push_back(total += surface_area(prim));

  // a sample on one primitive's surface counts only if no other primitive
  // swallows it, i.e. the union SDF is (numerically) zero there
  auto try_sample = [&](const Primitive& prim, Vec3& out) {
    Vec3 p = surface_sample(prim, rng);
    if (sdf(shape, p) <= -1e-9) return false;
    out = p;
    return true;
  };

  auto pick_primitive = [&]() -> const Primitive& {
    double u = rng.uniform() * total;
    size_t k = std::lower_bound(cum_area.begin(), cum_area.end(), u) -
               cum_area.begin();
    return shape.primitives[std::min(k, shape.primitives.size() - 1)];
  };

  shape.surface_vertices.reserve(n_surface);
  shape.vertex_labels.reserve(n_surface);
  int guard = 0;
  while (int(shape.surface_vertices.size()) < n_surface) {
    if (++guard > 1000 * n_surface)
      throw std::runtime_error("make_shape: surface sampling stalled");
    const Primitive& prim = pick_primitive();
    Vec3 p;
    if (!try_sample(prim, p)) continue;
    shape.surface_vertices.push_back(p);
    shape.vertex_labels.push_back(prim.part_label);
  }

  // every part present in the primitive list must appear at least once
  for (int part = 0; part < n_parts; ++part) {
    bool in_schema = false;
    for (const auto& prim : shape.primitives)
      in_schema |= prim.part_label == part;
    if (!in_schema) continue;
    bool sampled = false;
    for (int l : shape.vertex_labels) sampled |= l == part;
    if (sampled) continue;
    guard = 0;
    for (;;) {
      if (++guard > 100000)
        throw std::runtime_error("make_shape: part " + std::to_string(part) +
                                 " has no exposed surface");
      const Primitive& prim = pick_primitive();
      if (prim.part_label != part) continue;
      Vec3 p;
      if (!try_sample(prim, p)) continue;
      shape.surface_vertices.push_back(p);
      shape.vertex_labels.push_back(prim.part_label);
      break;
    }
  }

  shape.tree = KdTree(shape.surface_vertices);
  return shape;
}

}  // namespace mtir

#endif
