#ifndef MTIR_MARCHING_CUBES_HPP
#define MTIR_MARCHING_CUBES_HPP

#include <algorithm>
#include <cstdint>
#include <unordered_map>

#include "mtir/mc_tables.hpp"
#include "mtir/mesh.hpp"
#include "mtir/predictor.hpp"

namespace mtir {

struct ExtractedMesh {
  Mesh mesh;
  int resolution = 0;
  double tau = 0.5;
};

namespace detail {

// cube corner offsets in the classic table ordering (x,y loop in the
// bottom z plane, then the top plane)
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
// the 12 edges as corner pairs
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                              {4, 5}, {5, 6}, {6, 7}, {7, 4},
                              {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace detail

// Marching cubes over probability values on an R^3 grid spanning [lo, hi].
// The mesh is the tau level set with linear interpolation along edges;
// vertices on shared edges are emitted once, so closed level sets away from
// the boundary come out watertight.
inline ExtractedMesh extract_mesh_from_grid(const std::vector<float>& field,
                                            int R, Vec3 lo, Vec3 hi,
                                            double tau) {
  if (R < 8) throw std::invalid_argument("extract_mesh: resolution must be >= 8");
  if (int64_t(field.size()) != int64_t(R) * R * R)
    throw std::invalid_argument("extract_mesh: field size != R^3");

  ExtractedMesh out;
  out.resolution = R;
  out.tau = tau;
  Vec3 step{(hi.x - lo.x) / (R - 1), (hi.y - lo.y) / (R - 1),
            (hi.z - lo.z) / (R - 1)};

  auto value = [&](int x, int y, int z) -> double {
    return field[(int64_t(z) * R + y) * R + x];
  };
  auto point = [&](int x, int y, int z) -> Vec3 {
    return {lo.x + step.x * x, lo.y + step.y * y, lo.z + step.z * z};
  };

  // canonical edge key: owning grid point plus axis (0=x 1=y 2=z)
  auto edge_key = [R](int x, int y, int z, int axis) -> uint64_t {
    return ((uint64_t(z) * R + y) * R + x) * 4 + axis;
  };
  std::unordered_map<uint64_t, int> edge_vertex;

  for (int z = 0; z + 1 < R; ++z)
    for (int y = 0; y + 1 < R; ++y)
      for (int x = 0; x + 1 < R; ++x) {
        double corner_val[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          corner_val[c] = value(x + detail::kCorner[c][0],
                                y + detail::kCorner[c][1],
                                z + detail::kCorner[c][2]);
          if (corner_val[c] > tau) cube |= 1 << c;
        }
        if (mc::kEdgeTable[cube] == 0) continue;

        int edge_to_vertex[12];
        for (int e = 0; e < 12; ++e) {
          if (!(mc::kEdgeTable[cube] & (1 << e))) continue;
          int ca = detail::kEdge[e][0], cb = detail::kEdge[e][1];
          int ax = x + detail::kCorner[ca][0], ay = y + detail::kCorner[ca][1],
              az = z + detail::kCorner[ca][2];
          int bx = x + detail::kCorner[cb][0], by = y + detail::kCorner[cb][1],
              bz = z + detail::kCorner[cb][2];
          // orient the key along the positive axis direction
          int axis = bx != ax ? 0 : (by != ay ? 1 : 2);
          bool flipped = bx < ax || by < ay || bz < az;
          uint64_t key = flipped ? edge_key(bx, by, bz, axis)
                                 : edge_key(ax, ay, az, axis);
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            double va = corner_val[ca], vb = corner_val[cb];
            double t = (vb - va) == 0.0 ? 0.5 : (tau - va) / (vb - va);
            t = std::min(1.0, std::max(0.0, t));
            Vec3 pa = point(ax, ay, az), pb = point(bx, by, bz);
            it = edge_vertex.emplace(key, int(out.mesh.vertices.size())).first;
            out.mesh.vertices.push_back(pa + (pb - pa) * t);
          }
          edge_to_vertex[e] = it->second;
        }

        const int* tri = mc::kTriTable[cube];
        for (int i = 0; tri[i] != -1; i += 3)
          out.mesh.triangles.push_back({edge_to_vertex[tri[i]],
                                        edge_to_vertex[tri[i + 1]],
                                        edge_to_vertex[tri[i + 2]]});
      }
  return out;
}

inline ExtractedMesh extract_mesh(ShapeModel& model, Vec3 lo, Vec3 hi, int R,
                                  double tau) {
  if (R < 8) throw std::invalid_argument("extract_mesh: resolution must be >= 8");
  std::vector<Vec3f> grid;
  grid.reserve(size_t(R) * R * R);
  Vec3 step{(hi.x - lo.x) / (R - 1), (hi.y - lo.y) / (R - 1),
            (hi.z - lo.z) / (R - 1)};
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x)
        grid.push_back(to_vec3f(
            Vec3{lo.x + step.x * x, lo.y + step.y * y, lo.z + step.z * z}));
  std::vector<float> field = model.occupancy_prob(grid);
  return extract_mesh_from_grid(field, R, lo, hi, tau);
}

// Per-vertex part labels for an extracted mesh: each vertex is nudged half
// a cell toward the higher-occupancy side of its normal (the interior) and
// the segmentation head is queried there.
inline std::vector<int> segment_mesh(ShapeModel& model,
                                     const ExtractedMesh& extracted, Vec3 lo,
                                     Vec3 hi) {
  const Mesh& mesh = extracted.mesh;
  if (mesh.empty()) throw std::invalid_argument("segment_mesh: empty mesh");
  int R = extracted.resolution;
  double cell = std::max({(hi.x - lo.x) / (R - 1), (hi.y - lo.y) / (R - 1),
                          (hi.z - lo.z) / (R - 1)});

  std::vector<Vec3> normals(mesh.vertices.size(), {0, 0, 0});
  for (const auto& tri : mesh.triangles) {
    Vec3 n = cross(mesh.vertices[tri[1]] - mesh.vertices[tri[0]],
                   mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
    for (int c = 0; c < 3; ++c) normals[tri[c]] = normals[tri[c]] + n;
  }

  std::vector<Vec3f> plus(mesh.vertices.size()), minus(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    Vec3 n = normalized(normals[i]) * (0.5 * cell);
    plus[i] = to_vec3f(mesh.vertices[i] + n);
    minus[i] = to_vec3f(mesh.vertices[i] - n);
  }
  auto prob_plus = model.occupancy_prob(plus);
  auto prob_minus = model.occupancy_prob(minus);
  std::vector<Vec3f> inward(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i)
    inward[i] = prob_plus[i] >= prob_minus[i] ? plus[i] : minus[i];
  return model.part_labels(inward);
}

}  // namespace mtir

#endif
