#ifndef MTIR_MODEL_CONFIG_HPP
#define MTIR_MODEL_CONFIG_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mtir {

// Layer sizes for the encoder/decoder/classifier stack. The latent code is
// shared by every head; decoder channel counts follow n_parts/n_classes.
struct ModelConfig {
  int latent = 128;
  int encoder_hidden = 128;
  int encoder_blocks = 2;
  int decoder_hidden = 256;
  int decoder_blocks = 5;
  int classifier_hidden = 128;
  int cloud_points = 300;
  int n_classes = 2;
  int n_parts = 2;

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1)
        throw std::invalid_argument(std::string("model config: ") + name +
                                    " must be >= 1");
    };
    positive(latent, "latent");
    positive(encoder_hidden, "encoder_hidden");
    positive(encoder_blocks, "encoder_blocks");
    positive(decoder_hidden, "decoder_hidden");
    positive(decoder_blocks, "decoder_blocks");
    positive(classifier_hidden, "classifier_hidden");
    positive(cloud_points, "cloud_points");
    positive(n_classes, "n_classes");
    positive(n_parts, "n_parts");
  }
};

inline nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["latent"] = c.latent;
  j["encoder_hidden"] = c.encoder_hidden;
  j["encoder_blocks"] = c.encoder_blocks;
  j["decoder_hidden"] = c.decoder_hidden;
  j["decoder_blocks"] = c.decoder_blocks;
  j["classifier_hidden"] = c.classifier_hidden;
  j["cloud_points"] = c.cloud_points;
  j["n_classes"] = c.n_classes;
  j["n_parts"] = c.n_parts;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  std::vector<std::string> known = {
      "latent",           "encoder_hidden", "encoder_blocks",
      "decoder_hidden",   "decoder_blocks", "classifier_hidden",
      "cloud_points",     "n_classes",      "n_parts"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) ok |= it.key() == k;
    if (!ok)
      throw std::invalid_argument("model config: unknown key \"" + it.key() +
                                  "\"");
  }
  auto get = [&](const char* key, int fallback) {
    return j.contains(key) ? j.at(key).get<int>() : fallback;
  };
  c.latent = get("latent", c.latent);
  c.encoder_hidden = get("encoder_hidden", c.encoder_hidden);
  c.encoder_blocks = get("encoder_blocks", c.encoder_blocks);
  c.decoder_hidden = get("decoder_hidden", c.decoder_hidden);
  c.decoder_blocks = get("decoder_blocks", c.decoder_blocks);
  c.classifier_hidden = get("classifier_hidden", c.classifier_hidden);
  c.cloud_points = get("cloud_points", c.cloud_points);
  c.n_classes = get("n_classes", c.n_classes);
  c.n_parts = get("n_parts", c.n_parts);
  c.validate();
  return c;
}

// Which heads are trained/evaluated.
struct TaskSet {
  bool rec = false;
  bool cls = false;
  bool seg = false;

  bool any() const { return rec || cls || seg; }
};

enum class Topology { parallel, joint };

inline TaskSet tasks_from_strings(const std::vector<std::string>& names) {
  TaskSet t;
  for (const auto& n : names) {
    if (n == "rec")
      t.rec = true;
    else if (n == "cls")
      t.cls = true;
    else if (n == "seg")
      t.seg = true;
    else
      throw std::invalid_argument("unknown task \"" + n +
                                  "\" (expected rec, cls or seg)");
  }
  return t;
}

inline std::vector<std::string> tasks_to_strings(const TaskSet& t) {
  std::vector<std::string> out;
  if (t.rec) out.push_back("rec");
  if (t.cls) out.push_back("cls");
  if (t.seg) out.push_back("seg");
  return out;
}

inline Topology topology_from_string(const std::string& s) {
  if (s == "parallel") return Topology::parallel;
  if (s == "joint") return Topology::joint;
  throw std::invalid_argument("unknown topology \"" + s +
                              "\" (expected parallel or joint)");
}

inline std::string topology_to_string(Topology t) {
  return t == Topology::parallel ? "parallel" : "joint";
}

}  // namespace mtir

#endif
