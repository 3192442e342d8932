#ifndef MTIR_DATASET_HPP
#define MTIR_DATASET_HPP

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtir/families.hpp"
#include "mtir/marching_cubes.hpp"
#include "mtir/mesh.hpp"
#include "mtir/occs_io.hpp"
#include "mtir/predictor.hpp"
#include "mtir/sample.hpp"

namespace mtir {

// A parsed family spec: comma-separated `name` or `name:count` items.
// Each item contributes `count` consecutive slots to the round-robin
// rotation; slots of the same item share one class label (the item's
// position), so repeating a family skews the mix without inventing
// classes.
struct FamilySpec {
  std::vector<std::string> items;  // as written, e.g. "table:2"
  std::vector<std::string> slots;  // expanded family name per slot
  std::vector<int> classes;        // class label per slot
  int n_classes = 0;
  int max_parts = 1;  // widest part schema across the families
};

inline FamilySpec parse_family_spec(const std::string& spec) {
  FamilySpec out;
  std::string item;
  std::set<std::string> seen;
  auto flush = [&] {
    if (item.empty())
      throw std::invalid_argument("family spec: empty item in '" + spec + "'");
    std::string name = item;
    int count = 1;
    if (auto colon = item.find(':'); colon != std::string::npos) {
      name = item.substr(0, colon);
      std::string num = item.substr(colon + 1);
      size_t used = 0;
      try {
        count = std::stoi(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (num.empty() || used != num.size() || count < 1)
        throw std::invalid_argument("family spec: bad count in '" + item +
                                    "'");
    }
    const Family& fam = find_family(name);
    if (!seen.insert(name).second)
      throw std::invalid_argument("family spec: '" + name +
                                  "' listed more than once");
    int cls = int(out.items.size());
    out.items.push_back(item);
    for (int i = 0; i < count; ++i) {
      out.slots.push_back(name);
      out.classes.push_back(cls);
    }
    out.max_parts = std::max(out.max_parts, fam.n_parts);
    item.clear();
  };
  for (char c : spec) {
    if (c == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      item += c;
  }
  flush();
  out.n_classes = int(out.items.size());
  if (out.n_classes < 2)
    throw std::invalid_argument("family spec: need at least 2 families");
  return out;
}

struct DatasetManifest {
  struct Entry {
    uint32_t id = 0;
    int class_label = 0;
    std::string sample_file;
  };
  std::vector<std::string> families;  // spec items, e.g. ["spheres","table:2"]
  uint64_t seed = 0;
  std::vector<Entry> shapes;

  std::string spec_string() const {
    std::string out;
    for (size_t i = 0; i < families.size(); ++i) {
      if (i) out += ',';
      out += families[i];
    }
    return out;
  }
};

inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["families"] = m.families;
  j["seed"] = m.seed;
  j["shapes"] = nlohmann::ordered_json::array();
  for (const auto& e : m.shapes) {
    nlohmann::ordered_json entry;
    entry["id"] = e.id;
    entry["class_label"] = e.class_label;
    entry["sample_file"] = e.sample_file;
    j["shapes"].push_back(std::move(entry));
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  for (const auto& [key, _] : j.items())
    if (key != "families" && key != "seed" && key != "shapes")
      throw std::invalid_argument("manifest: unknown key '" + key + "'");
  DatasetManifest m;
  m.families = j.at("families").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<uint64_t>();
  for (const auto& entry : j.at("shapes")) {
    for (const auto& [key, _] : entry.items())
      if (key != "id" && key != "class_label" && key != "sample_file")
        throw std::invalid_argument("manifest: unknown shape key '" + key +
                                    "'");
    DatasetManifest::Entry e;
    e.id = entry.at("id").get<uint32_t>();
    e.class_label = entry.at("class_label").get<int>();
    e.sample_file = entry.at("sample_file").get<std::string>();
    m.shapes.push_back(std::move(e));
  }
  return m;
}

inline void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::io_fail(path, "cannot open for writing");
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) detail::io_fail(path, "write failed");
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::io_fail(path, "cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    detail::io_fail(path, "not valid JSON");
  }
  try {
    return manifest_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    detail::io_fail(path, (std::string("bad manifest: ") + e.what()).c_str());
  }
  return {};  // unreachable
}

// σ(−sdf) oracle over the analytic shape: a smooth field whose 0.5 level
// set is the exact surface, so ground-truth meshes interpolate cleanly.
class SmoothOracleModel : public ShapeModel {
 public:
  explicit SmoothOracleModel(const LabeledShape& shape) : shape_(shape) {}

  std::vector<float> occupancy_prob(const std::vector<Vec3f>& pts) override {
    std::vector<float> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      double s = sdf(shape_, to_vec3(pts[i]));
      out[i] = float(1.0 / (1.0 + std::exp(s)));
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
};

struct GenConfig {
  std::string families = "spheres,dumbbell,table";
  int count = 30;
  uint64_t seed = 0;
  int n_query = 1024;      // query samples per OCCS file
  double noise_sigma = 0.05;
  int n_surface = 2048;    // labeled surface vertices per shape
  int mesh_res = 64;       // marching cubes resolution for the OFF export
};

inline std::string shape_basename(uint32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shape_%04u", id);
  return buf;
}

inline std::vector<LabeledShape> build_shapes(const FamilySpec& spec,
                                              int count, uint64_t seed,
                                              int n_surface = 2048) {
  return make_dataset(spec.slots, spec.classes, count, seed, n_surface);
}

// Writes DIR/manifest.json plus one OCCS sample file and one ground-truth
// OFF mesh per shape. Deterministic in the config, so a rerun with the
// same arguments reproduces every file byte for byte.
inline DatasetManifest generate_dataset(const std::string& dir,
                                        const GenConfig& cfg) {
  if (cfg.count < 1)
    throw std::invalid_argument("gen-data: count must be >= 1");
  if (cfg.n_query < 1)
    throw std::invalid_argument("gen-data: n-query must be >= 1");
  if (cfg.noise_sigma < 0)
    throw std::invalid_argument("gen-data: noise-sigma must be >= 0");
  FamilySpec spec = parse_family_spec(cfg.families);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) detail::io_fail(dir, "cannot create directory");

  std::vector<LabeledShape> shapes =
      build_shapes(spec, cfg.count, cfg.seed, cfg.n_surface);

  DatasetManifest manifest;
  manifest.families = spec.items;
  manifest.seed = cfg.seed;
  for (uint32_t id = 0; id < uint32_t(shapes.size()); ++id) {
    const LabeledShape& shape = shapes[id];
    std::string base = shape_basename(id);

    SampleBatch batch =
        sample_batch(shape, cfg.n_query, default_pad(shape), cfg.noise_sigma,
                     mix_seed(cfg.seed, 0xD47A0000ull + id));
    write_occs(dir + "/" + base + ".occs", batch);

    SmoothOracleModel oracle(shape);
    double pad = default_pad(shape);
    ExtractedMesh extracted = extract_mesh(
        oracle, shape.bbox_min - Vec3{pad, pad, pad},
        shape.bbox_max + Vec3{pad, pad, pad}, cfg.mesh_res, 0.5);
    write_off(dir + "/" + base + ".off", extracted.mesh);

    DatasetManifest::Entry e;
    e.id = id;
    e.class_label = shape.class_label;
    e.sample_file = base + ".occs";
    manifest.shapes.push_back(std::move(e));
  }
  write_manifest(dir + "/manifest.json", manifest);
  return manifest;
}

struct LoadedDataset {
  DatasetManifest manifest;
  FamilySpec spec;
  std::vector<LabeledShape> shapes;
};

// Rebuilds the analytic shapes from (families, seed, count); the manifest's
// recorded class labels double as an integrity check.
inline LoadedDataset load_dataset(const std::string& dir,
                                  int n_surface = 2048) {
  LoadedDataset out;
  out.manifest = read_manifest(dir + "/manifest.json");
  out.spec = parse_family_spec(out.manifest.spec_string());
  out.shapes = build_shapes(out.spec, int(out.manifest.shapes.size()),
                            out.manifest.seed, n_surface);
  for (size_t i = 0; i < out.shapes.size(); ++i) {
    if (out.manifest.shapes[i].id != i)
      detail::io_fail(dir + "/manifest.json",
                      "shape ids must be 0..n-1 in order");
    if (out.manifest.shapes[i].class_label != out.shapes[i].class_label)
      detail::io_fail(dir + "/manifest.json",
                      "class labels disagree with the generator");
  }
  return out;
}

}  // namespace mtir

#endif
