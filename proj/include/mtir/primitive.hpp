#ifndef MTIR_PRIMITIVE_HPP
#define MTIR_PRIMITIVE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mtir/rng.hpp"
#include "mtir/vec3.hpp"

namespace mtir {

enum class PrimKind { sphere, box, cylinder, capsule };

// Axis-aligned solid primitive with an exact signed distance function.
// size encodes, per kind:
//   sphere   x = radius
//   box      x,y,z = half extents
//   cylinder x = radius, y = half height (along `axis`)
//   capsule  x = radius, y = half length between cap centers (along `axis`)
struct Primitive {
  PrimKind kind = PrimKind::sphere;
  Vec3 center{0, 0, 0};
  int axis = 0;  // cylinder/capsule orientation: 0=x 1=y 2=z
  Vec3 size{1, 0, 0};
  int part_label = 0;
};

inline void validate(const Primitive& prim) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0))
      throw std::invalid_argument(std::string("primitive: ") + what +
                                  " must be positive, got " +
                                  std::to_string(v));
  };
  switch (prim.kind) {
    case PrimKind::sphere:
      positive(prim.size.x, "radius");
      break;
    case PrimKind::box:
      positive(prim.size.x, "half extent x");
      positive(prim.size.y, "half extent y");
      positive(prim.size.z, "half extent z");
      break;
    case PrimKind::cylinder:
    case PrimKind::capsule:
      positive(prim.size.x, "radius");
      positive(prim.size.y, "half length");
      if (prim.axis < 0 || prim.axis > 2)
        throw std::invalid_argument("primitive: axis must be 0, 1 or 2");
      break;
  }
  if (prim.part_label < 0)
    throw std::invalid_argument("primitive: part_label must be >= 0");
}

// splits q into the component along `axis` and the two perpendicular ones
inline void axial_split(const Vec3& q, int axis, double& along, double& perp) {
  along = q[axis];
  double a = q[(axis + 1) % 3], b = q[(axis + 2) % 3];
  perp = std::sqrt(a * a + b * b);
}

inline double sdf(const Primitive& prim, const Vec3& p) {
  Vec3 q = p - prim.center;
  switch (prim.kind) {
    case PrimKind::sphere:
      return norm(q) - prim.size.x;
    case PrimKind::box: {
      Vec3 d = vabs(q) - prim.size;
      Vec3 outside = vmax(d, Vec3{0, 0, 0});
      double inside = std::min(std::max(d.x, std::max(d.y, d.z)), 0.0);
      return norm(outside) + inside;
    }
    case PrimKind::cylinder: {
      double along, perp;
      axial_split(q, prim.axis, along, perp);
      double dr = perp - prim.size.x;
      double dh = std::fabs(along) - prim.size.y;
      double ox = std::max(dr, 0.0), oy = std::max(dh, 0.0);
      return std::sqrt(ox * ox + oy * oy) + std::min(std::max(dr, dh), 0.0);
    }
    case PrimKind::capsule: {
      double along, perp;
      axial_split(q, prim.axis, along, perp);
      double t = std::clamp(along, -prim.size.y, prim.size.y);
      double da = along - t;
      return std::sqrt(perp * perp + da * da) - prim.size.x;
    }
  }
  return 0.0;  // unreachable
}

inline bool inside(const Primitive& prim, const Vec3& p) {
  return sdf(prim, p) < 0.0;
}

inline double volume(const Primitive& prim) {
  constexpr double pi = 3.14159265358979323846;
  const Vec3& s = prim.size;
  switch (prim.kind) {
    case PrimKind::sphere:
      return 4.0 / 3.0 * pi * s.x * s.x * s.x;
    case PrimKind::box:
      return 8.0 * s.x * s.y * s.z;
    case PrimKind::cylinder:
      return pi * s.x * s.x * 2.0 * s.y;
    case PrimKind::capsule:
      return pi * s.x * s.x * 2.0 * s.y + 4.0 / 3.0 * pi * s.x * s.x * s.x;
  }
  return 0.0;
}

inline double surface_area(const Primitive& prim) {
  constexpr double pi = 3.14159265358979323846;
  const Vec3& s = prim.size;
  switch (prim.kind) {
    case PrimKind::sphere:
      return 4.0 * pi * s.x * s.x;
    case PrimKind::box:
      return 8.0 * (s.x * s.y + s.y * s.z + s.z * s.x);
    case PrimKind::cylinder:
      return 2.0 * pi * s.x * (2.0 * s.y) + 2.0 * pi * s.x * s.x;
    case PrimKind::capsule:
      return 2.0 * pi * s.x * (2.0 * s.y) + 4.0 * pi * s.x * s.x;
  }
  return 0.0;
}

inline void bbox(const Primitive& prim, Vec3& lo, Vec3& hi) {
  Vec3 ext;
  switch (prim.kind) {
    case PrimKind::sphere:
      ext = {prim.size.x, prim.size.x, prim.size.x};
      break;
    case PrimKind::box:
      ext = prim.size;
      break;
    case PrimKind::cylinder:
    case PrimKind::capsule: {
      double r = prim.size.x;
      double half = prim.size.y + (prim.kind == PrimKind::capsule ? r : 0.0);
      ext = {r, r, r};
      ext[prim.axis] = half;
      break;
    }
  }
  lo = prim.center - ext;
  hi = prim.center + ext;
}

namespace detail {

inline Vec3 unit_sphere_dir(Rng& rng) {
  // normalized Gaussian triple; exactly three draws per call
  Vec3 d{rng.gaussian(), rng.gaussian(), rng.gaussian()};
  double n = norm(d);
  if (n < 1e-12) return {1, 0, 0};
  return d * (1.0 / n);
}

}  // namespace detail

// uniform point on the primitive's own surface (union overlap handled by
// the caller via rejection)
inline Vec3 surface_sample(const Primitive& prim, Rng& rng) {
  constexpr double pi = 3.14159265358979323846;
  const Vec3& s = prim.size;
  switch (prim.kind) {
    case PrimKind::sphere:
      return prim.center + detail::unit_sphere_dir(rng) * s.x;
    case PrimKind::box: {
      // pick a face pair weighted by area, then a sign, then a point on it
      double ax = s.y * s.z, ay = s.x * s.z, az = s.x * s.y;
      double u = rng.uniform() * (ax + ay + az);
      int face = u < ax ? 0 : (u < ax + ay ? 1 : 2);
      double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      Vec3 q;
      q[face] = sign * s[face];
      q[(face + 1) % 3] = rng.uniform(-s[(face + 1) % 3], s[(face + 1) % 3]);
      q[(face + 2) % 3] = rng.uniform(-s[(face + 2) % 3], s[(face + 2) % 3]);
      return prim.center + q;
    }
    case PrimKind::cylinder: {
      double side = 2.0 * pi * s.x * (2.0 * s.y);
      double caps = 2.0 * pi * s.x * s.x;
      double u = rng.uniform() * (side + caps);
      Vec3 q;
      double theta = rng.uniform(0.0, 2.0 * pi);
      if (u < side) {
        q[prim.axis] = rng.uniform(-s.y, s.y);
        q[(prim.axis + 1) % 3] = s.x * std::cos(theta);
        q[(prim.axis + 2) % 3] = s.x * std::sin(theta);
      } else {
        double r = s.x * std::sqrt(rng.uniform());
        q[prim.axis] = rng.uniform() < 0.5 ? -s.y : s.y;
        q[(prim.axis + 1) % 3] = r * std::cos(theta);
        q[(prim.axis + 2) % 3] = r * std::sin(theta);
      }
      return prim.center + q;
    }
    case PrimKind::capsule: {
      double side = 2.0 * pi * s.x * (2.0 * s.y);
      double caps = 4.0 * pi * s.x * s.x;
      double u = rng.uniform() * (side + caps);
      Vec3 q;
      if (u < side) {
        double theta = rng.uniform(0.0, 2.0 * pi);
        q[prim.axis] = rng.uniform(-s.y, s.y);
        q[(prim.axis + 1) % 3] = s.x * std::cos(theta);
        q[(prim.axis + 2) % 3] = s.x * std::sin(theta);
      } else {
        // the two hemispherical caps together make one full sphere
        Vec3 d = detail::unit_sphere_dir(rng);
        double tip = d[prim.axis] >= 0.0 ? s.y : -s.y;
        q = d * s.x;
        q[prim.axis] += tip;
      }
      return prim.center + q;
    }
  }
  return prim.center;  // unreachable
}

}  // namespace mtir

#endif
