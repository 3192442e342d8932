#ifndef MTIR_CLI_CONFIG_HPP
#define MTIR_CLI_CONFIG_HPP

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtir/dataset.hpp"
#include "mtir/eval_runner.hpp"
#include "mtir/trainer.hpp"

namespace mtir {

// Every tunable setting a command can consume, with its default. Values are
// merged in precedence order: built-in defaults, then the JSON config file,
// then explicit command-line flags.
struct RunConfig {
  // dataset generation
  std::string families = "spheres,dumbbell,table";
  int count = 30;
  int gen_queries = 1024;  // query samples stored per OCCS file
  int n_surface = 2048;    // labeled surface vertices per shape
  // shared
  uint64_t seed = 0;
  double noise_sigma = 0.05;
  // training
  std::string tasks = "rec";
  std::string topology = "parallel";
  bool freeze_encoder = false;
  int steps = 1000;
  double lr = 1e-4;
  int batch_size = 16;
  int n_query = 1024;
  double lambda_cls = 1.0;
  double lambda_seg = 1.0;
  ModelConfig model;
  // evaluation
  std::string metrics = "iou,chamfer,acc,miou";
  int iou_samples = 10000;
  int miou_points = 10000;
  int chamfer_points = 10000;
  // mesh extraction (reconstruct and the chamfer metric)
  int res = 64;
  double tau = 0.2;           // extraction level set
  double binarize_tau = 0.5;  // occupancy threshold for volumetric IOU
};

// applies a config file on top of `base`; unknown keys are rejected
inline RunConfig run_config_from_json(RunConfig base,
                                      const nlohmann::json& j) {
  auto get_int = [](const nlohmann::json& v, const char* key) {
    if (!v.is_number_integer())
      throw std::invalid_argument(std::string("config: ") + key +
                                  " must be an integer");
    return v.get<int>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "families")
      base.families = value.get<std::string>();
    else if (key == "count")
      base.count = get_int(value, "count");
    else if (key == "gen_queries")
      base.gen_queries = get_int(value, "gen_queries");
    else if (key == "n_surface")
      base.n_surface = get_int(value, "n_surface");
    else if (key == "seed")
      base.seed = value.get<uint64_t>();
    else if (key == "noise_sigma")
      base.noise_sigma = value.get<double>();
    else if (key == "tasks")
      base.tasks = value.get<std::string>();
    else if (key == "topology")
      base.topology = value.get<std::string>();
    else if (key == "freeze_encoder")
      base.freeze_encoder = value.get<bool>();
    else if (key == "steps")
      base.steps = get_int(value, "steps");
    else if (key == "lr")
      base.lr = value.get<double>();
    else if (key == "batch_size")
      base.batch_size = get_int(value, "batch_size");
    else if (key == "n_query")
      base.n_query = get_int(value, "n_query");
    else if (key == "lambda_cls")
      base.lambda_cls = value.get<double>();
    else if (key == "lambda_seg")
      base.lambda_seg = value.get<double>();
    else if (key == "model")
      base.model = model_config_from_json(value);
    else if (key == "metrics")
      base.metrics = value.get<std::string>();
    else if (key == "iou_samples")
      base.iou_samples = get_int(value, "iou_samples");
    else if (key == "miou_points")
      base.miou_points = get_int(value, "miou_points");
    else if (key == "chamfer_points")
      base.chamfer_points = get_int(value, "chamfer_points");
    else if (key == "res")
      base.res = get_int(value, "res");
    else if (key == "tau")
      base.tau = value.get<double>();
    else if (key == "binarize_tau")
      base.binarize_tau = value.get<double>();
    else
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return base;
}

inline RunConfig load_run_config(RunConfig base, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(path + ": not valid JSON");
  }
  try {
    return run_config_from_json(std::move(base), j);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

inline std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(item);
      item.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      item += c;
    }
  }
  out.push_back(item);
  return out;
}

inline GenConfig to_gen_config(const RunConfig& run) {
  GenConfig gen;
  gen.families = run.families;
  gen.count = run.count;
  gen.seed = run.seed;
  gen.n_query = run.gen_queries;
  gen.noise_sigma = run.noise_sigma;
  gen.n_surface = run.n_surface;
  gen.mesh_res = run.res;
  return gen;
}

// The dataset decides the label spaces: its class count and widest part
// schema override whatever the model section carried.
inline TrainConfig to_train_config(const RunConfig& run,
                                   const FamilySpec& spec) {
  TrainConfig cfg;
  cfg.tasks = tasks_from_strings(split_csv(run.tasks));
  cfg.topology = topology_from_string(run.topology);
  cfg.freeze_encoder = run.freeze_encoder;
  cfg.lr = run.lr;
  cfg.batch_size = run.batch_size;
  cfg.n_query = run.n_query;
  cfg.steps = run.steps;
  cfg.seed = run.seed;
  cfg.noise_sigma = run.noise_sigma;
  cfg.weights.lambda_cls = run.lambda_cls;
  cfg.weights.lambda_seg = run.lambda_seg;
  cfg.model = run.model;
  cfg.model.n_classes = spec.n_classes;
  cfg.model.n_parts = spec.max_parts;
  return cfg;
}

inline EvalParams to_eval_params(const RunConfig& run) {
  EvalParams params;
  params.iou_samples = run.iou_samples;
  params.miou_points = run.miou_points;
  params.chamfer_points = run.chamfer_points;
  params.mesh_res = run.res;
  params.extract_tau = run.tau;
  params.binarize_tau = run.binarize_tau;
  return params;
}

}  // namespace mtir

#endif
