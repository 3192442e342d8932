#ifndef MTIR_FAMILIES_HPP
#define MTIR_FAMILIES_HPP

#include <functional>
#include <string>
#include <vector>

#include "mtir/shape.hpp"

namespace mtir {

// A family is a part schema plus a randomized constructor. class_label is
// assigned by position in the family list passed to make_dataset.
struct Family {
  std::string name;
  int n_parts;
  std::function<std::vector<Primitive>(Rng&)> build;
};

// Dumbbell whose bar thickness is a fixed fraction of the smaller end
// weight. Used by the stout/slender family pair below: both share every
// gross dimension range and differ only in that ratio band, so telling
// them apart means reading a fine relative proportion rather than any
// absolute size.
inline std::vector<Primitive> proportioned_dumbbell(Rng& rng,
                                                    double bar_ratio) {
  double half_span = rng.uniform(0.55, 0.95);
  double ra = rng.uniform(0.28, 0.5);
  double rb = rng.uniform(0.28, 0.5);
  double rbar = bar_ratio * std::min(ra, rb);
  Primitive a, bar, b;
  a.kind = PrimKind::sphere;
  a.center = {-half_span, 0, 0};
  a.size.x = ra;
  a.part_label = 0;
  bar.kind = PrimKind::cylinder;
  bar.axis = 0;
  bar.size = {rbar, half_span, 0};
  bar.part_label = 1;
  b.kind = PrimKind::sphere;
  b.center = {half_span, 0, 0};
  b.size.x = rb;
  b.part_label = 2;
  return {a, bar, b};
}

// Disc top (part 0) on `legs` thin legs (part 1) spaced evenly around a
// ring at a random phase. Every dimension range is shared between leg
// counts, so the count itself is the only family difference.
inline std::vector<Primitive> legged_disc(Rng& rng, int legs) {
  constexpr double pi = 3.14159265358979323846;
  double top_r = rng.uniform(0.55, 0.8);
  double top_h = rng.uniform(0.14, 0.20);
  double top_y = rng.uniform(0.26, 0.36);
  double leg_r = rng.uniform(0.05, 0.08);
  double phase = rng.uniform(0.0, 2.0 * pi);
  double ring = top_r - leg_r - 0.05;
  std::vector<Primitive> prims;
  Primitive top;
  top.kind = PrimKind::cylinder;
  top.axis = 1;
  top.center = {0, top_y, 0};
  top.size = {top_r, top_h, 0};
  top.part_label = 0;
  prims.push_back(top);
  for (int k = 0; k < legs; ++k) {
    double a = phase + k * 2.0 * pi / legs;
    Primitive leg;
    leg.kind = PrimKind::cylinder;
    leg.axis = 1;
    leg.center = {ring * std::cos(a), 0, ring * std::sin(a)};
    leg.size = {leg_r, top_y, 0};
    leg.part_label = 1;
    prims.push_back(leg);
  }
  return prims;
}

inline const std::vector<Family>& builtin_families() {
  static const std::vector<Family> families = {
      {"spheres", 1,
       [](Rng& rng) {
         Primitive ball;
         ball.kind = PrimKind::sphere;
         ball.size.x = rng.uniform(0.45, 0.85);
         ball.part_label = 0;
         return std::vector<Primitive>{ball};
       }},
      // two end weights (parts 0 and 2) joined by a thinner bar (part 1)
      {"dumbbell", 3,
       [](Rng& rng) {
         double half_span = rng.uniform(0.55, 0.95);
         double ra = rng.uniform(0.28, 0.5);
         double rb = rng.uniform(0.28, 0.5);
         double rbar = rng.uniform(0.1, 0.2);
         Primitive a, bar, b;
         a.kind = PrimKind::sphere;
         a.center = {-half_span, 0, 0};
         a.size.x = ra;
         a.part_label = 0;
         bar.kind = PrimKind::cylinder;
         bar.axis = 0;
         bar.size = {rbar, half_span, 0};
         bar.part_label = 1;
         b.kind = PrimKind::sphere;
         b.center = {half_span, 0, 0};
         b.size.x = rb;
         b.part_label = 2;
         return std::vector<Primitive>{a, bar, b};
       }},
      // slab top (part 0) on four corner legs (part 1)
      {"table", 2,
       [](Rng& rng) {
         double hx = rng.uniform(0.5, 0.9);
         double hz = rng.uniform(0.4, 0.75);
         double hy = rng.uniform(0.06, 0.14);
         double top_y = rng.uniform(0.3, 0.6);
         double leg_r = rng.uniform(0.05, 0.12);
         std::vector<Primitive> prims;
         Primitive top;
         top.kind = PrimKind::box;
         top.center = {0, top_y, 0};
         top.size = {hx, hy, hz};
         top.part_label = 0;
         prims.push_back(top);
         double leg_x = hx - leg_r - 0.03;
         double leg_z = hz - leg_r - 0.03;
         for (double sx : {-1.0, 1.0})
           for (double sz : {-1.0, 1.0}) {
             Primitive leg;
             leg.kind = PrimKind::cylinder;
             leg.axis = 1;
             leg.center = {sx * leg_x, 0, sz * leg_z};
             leg.size = {leg_r, top_y, 0};
             leg.part_label = 1;
             prims.push_back(leg);
           }
         return prims;
       }},
      // the confusable pair: same construction, ratio bands 0.42..0.50
      // versus 0.32..0.40 of the smaller end weight
      {"stout", 3,
       [](Rng& rng) {
         double ratio = rng.uniform(0.42, 0.50);
         return proportioned_dumbbell(rng, ratio);
       }},
      {"slender", 3,
       [](Rng& rng) {
         double ratio = rng.uniform(0.32, 0.40);
         return proportioned_dumbbell(rng, ratio);
       }},
      // the countable pair: a disc top on 3 versus 4 thin legs spread
      // evenly around a ring at a random phase; leg count is obvious in a
      // surface cloud but nearly free in occupied volume
      {"tripod", 2, [](Rng& rng) { return legged_disc(rng, 3); }},
      {"tetrapod", 2, [](Rng& rng) { return legged_disc(rng, 4); }},
      // two perpendicular capsules crossing at the origin
      {"cross", 2,
       [](Rng& rng) {
         Primitive horiz, vert;
         horiz.kind = PrimKind::capsule;
         horiz.axis = 0;
         horiz.size = {rng.uniform(0.12, 0.25), rng.uniform(0.5, 0.9), 0};
         horiz.part_label = 0;
         vert.kind = PrimKind::capsule;
         vert.axis = 1;
         vert.size = {rng.uniform(0.12, 0.25), rng.uniform(0.5, 0.9), 0};
         vert.part_label = 1;
         return std::vector<Primitive>{horiz, vert};
       }},
  };
  return families;
}

inline const Family& find_family(const std::string& name) {
  for (const auto& fam : builtin_families())
    if (fam.name == name) return fam;
  throw std::invalid_argument("unknown shape family: " + name);
}

// Shapes cycle through the family slots round-robin (shape i gets slot
// i mod F and that slot's class label). Shape i's geometry depends only on
// (seed, i), so generation order cannot change the result.
inline std::vector<LabeledShape> make_dataset(
    const std::vector<std::string>& family_names,
    const std::vector<int>& class_labels, int n_shapes, uint64_t seed,
    int n_surface = 2048) {
  if (family_names.size() < 2)
    throw std::invalid_argument("make_dataset: need at least 2 family slots");
  if (class_labels.size() != family_names.size())
    throw std::invalid_argument(
        "make_dataset: one class label per family slot");
  std::vector<const Family*> families;
  for (const auto& name : family_names) families.push_back(&find_family(name));

  std::vector<LabeledShape> shapes(n_shapes);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_shapes; ++i) {
    size_t slot = size_t(i) % families.size();
    const Family& fam = *families[slot];
    Rng rng(mix_seed(seed, uint64_t(i)));
    shapes[i] = make_shape(class_labels[slot], fam.n_parts, fam.build(rng),
                           rng, n_surface);
  }
  return shapes;
}

// distinct families: slot index doubles as the class label
inline std::vector<LabeledShape> make_dataset(
    const std::vector<std::string>& family_names, int n_shapes, uint64_t seed,
    int n_surface = 2048) {
  std::vector<int> classes(family_names.size());
  for (size_t i = 0; i < classes.size(); ++i) classes[i] = int(i);
  return make_dataset(family_names, classes, n_shapes, seed, n_surface);
}

}  // namespace mtir

#endif
