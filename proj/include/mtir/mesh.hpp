#ifndef MTIR_MESH_HPP
#define MTIR_MESH_HPP

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtir/rng.hpp"
#include "mtir/vec3.hpp"

namespace mtir {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

inline double triangle_area(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  Vec3 e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
  Vec3 e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
  return 0.5 * norm(cross(e1, e2));
}

// every undirected edge in exactly two triangles
inline bool is_watertight(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      edge_count[{std::min(a, b), std::max(a, b)}]++;
    }
  for (const auto& [edge, count] : edge_count)
    if (count != 2) return false;
  return !mesh.triangles.empty();
}

// neighbouring triangles traverse their shared edge in opposite directions
inline bool is_consistently_oriented(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& tri : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      if (++directed[{a, b}] > 1) return false;
    }
  return true;
}

// divergence-theorem volume; meaningful for closed consistently oriented
// meshes (absolute value taken so either orientation works)
inline double mesh_volume(const Mesh& mesh) {
  double v6 = 0.0;
  for (const auto& tri : mesh.triangles)
    v6 += dot(mesh.vertices[tri[0]],
              cross(mesh.vertices[tri[1]], mesh.vertices[tri[2]]));
  return std::fabs(v6) / 6.0;
}

// uniform area-weighted surface samples
inline std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, int n,
                                             uint64_t seed) {
  if (mesh.empty())
    throw std::invalid_argument("sample_mesh_surface: empty mesh");
  std::vector<double> cum(mesh.triangles.size());
  double total = 0.0;
  for (size_t t = 0; t < mesh.triangles.size(); ++t)
    cum[t] = total += triangle_area(mesh, int(t));
  if (total <= 0.0)
    throw std::invalid_argument("sample_mesh_surface: degenerate mesh");

  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform() * total;
    size_t t = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
    t = std::min(t, mesh.triangles.size() - 1);
    const auto& tri = mesh.triangles[t];
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    double a = 1.0 - r1, b = r1 * (1.0 - r2), c = r1 * r2;
    out.push_back(mesh.vertices[tri[0]] * a + mesh.vertices[tri[1]] * b +
                  mesh.vertices[tri[2]] * c);
  }
  return out;
}

inline void write_off(const std::string& path, const Mesh& mesh) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  std::fprintf(f, "OFF\n%zu %zu 0\n", mesh.vertices.size(),
               mesh.triangles.size());
  for (const auto& v : mesh.vertices)
    std::fprintf(f, "%.9g %.9g %.9g\n", v.x, v.y, v.z);
  for (const auto& t : mesh.triangles)
    std::fprintf(f, "3 %d %d %d\n", t[0], t[1], t[2]);
  if (std::fclose(f) != 0) throw std::runtime_error(path + ": write failed");
}

inline Mesh read_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  auto next_line = [&](std::string& line) {
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  };
  std::string line;
  if (!next_line(line) || line.substr(0, 3) != "OFF")
    throw std::runtime_error(path + ": missing OFF header");
  if (!next_line(line)) throw std::runtime_error(path + ": missing counts");
  size_t nv = 0, nt = 0, ne = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> nv >> nt >> ne))
      throw std::runtime_error(path + ": bad counts line");
  }
  Mesh mesh;
  mesh.vertices.resize(nv);
  for (size_t i = 0; i < nv; ++i) {
    if (!next_line(line)) throw std::runtime_error(path + ": truncated");
    std::istringstream ss(line);
    if (!(ss >> mesh.vertices[i].x >> mesh.vertices[i].y >> mesh.vertices[i].z))
      throw std::runtime_error(path + ": bad vertex line");
  }
  mesh.triangles.resize(nt);
  for (size_t i = 0; i < nt; ++i) {
    if (!next_line(line)) throw std::runtime_error(path + ": truncated");
    std::istringstream ss(line);
    int k;
    auto& tri = mesh.triangles[i];
    if (!(ss >> k >> tri[0] >> tri[1] >> tri[2]) || k != 3)
      throw std::runtime_error(path + ": only triangle faces are supported");
    for (int c : tri)
      if (c < 0 || c >= int(nv))
        throw std::runtime_error(path + ": face index out of range");
  }
  return mesh;
}

inline void write_labels(const std::string& path,
                         const std::vector<int>& labels) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  for (int l : labels) std::fprintf(f, "%d\n", l);
  if (std::fclose(f) != 0) throw std::runtime_error(path + ": write failed");
}

inline std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<int> labels;
  int l;
  while (in >> l) labels.push_back(l);
  return labels;
}

}  // namespace mtir

#endif
