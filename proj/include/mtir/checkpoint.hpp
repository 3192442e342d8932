#ifndef MTIR_CHECKPOINT_HPP
#define MTIR_CHECKPOINT_HPP

#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtir/networks.hpp"
#include "mtir/occs_io.hpp"

// Checkpoint file layout:
//   u32 header length (little-endian)
//   ordered JSON header {version, config{model, tasks, topology}, tensors:
//     [{name, shape, byte_offset}]}
//   raw little-endian f32 blob, tensors in header order
// Batchnorm running statistics are stored like any other named tensor, so
// a checkpoint fully reproduces eval-mode behaviour.

namespace mtir {

constexpr uint32_t kCheckpointVersion = 1;

template <class T>
void save_checkpoint(const std::string& path,
                     const MultiTaskModelT<T>& model) {
  nlohmann::ordered_json header;
  header["version"] = kCheckpointVersion;
  nlohmann::ordered_json config;
  config["model"] = model_config_to_json(model.cfg);
  config["tasks"] = tasks_to_strings(model.tasks);
  config["topology"] = topology_to_string(model.topology);
  header["config"] = config;

  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : model.store.items()) {
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t->shape;
    entry["byte_offset"] = offset;
    tensors.push_back(entry);
    offset += uint64_t(t->numel()) * 4;
  }
  header["tensors"] = tensors;
  std::string header_str = header.dump();

  detail::File out(std::fopen(path.c_str(), "wb"));
  if (!out.f) detail::io_fail(path, "cannot open for writing");
  auto put = [&](const void* p, size_t n) {
    if (std::fwrite(p, 1, n, out.f) != n) detail::io_fail(path, "short write");
  };
  uint32_t len = uint32_t(header_str.size());
  put(&len, 4);
  put(header_str.data(), header_str.size());
  std::vector<float> row;
  for (const auto& [name, t] : model.store.items()) {
    (void)name;
    row.resize(size_t(t->numel()));
    for (size_t i = 0; i < row.size(); ++i) row[i] = float(t->v[i]);
    put(row.data(), row.size() * 4);
  }
}

// Parsed but not yet materialized checkpoint: the config block plus every
// named tensor. Useful both for exact reloads and for warm-starting a
// model with a different task set (copy what matches by name).
struct RawCheckpoint {
  ModelConfig config;
  TaskSet tasks;
  Topology topology = Topology::parallel;
  std::vector<std::string> names;  // file order
  std::map<std::string, std::pair<std::vector<int>, std::vector<float>>>
      tensors;
};

inline RawCheckpoint read_checkpoint_raw(const std::string& path) {
  detail::File in(std::fopen(path.c_str(), "rb"));
  if (!in.f) detail::io_fail(path, "cannot open");
  auto get = [&](void* p, size_t n) {
    if (std::fread(p, 1, n, in.f) != n) detail::io_fail(path, "truncated");
  };
  uint32_t len = 0;
  get(&len, 4);
  if (len == 0 || len > (1u << 26)) detail::io_fail(path, "bad header length");
  std::string header_str(len, '\0');
  get(header_str.data(), len);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const std::exception&) {
    detail::io_fail(path, "invalid checkpoint header");
  }
  if (!header.contains("version") ||
      header.at("version").get<uint32_t>() != kCheckpointVersion)
    detail::io_fail(path, "unsupported checkpoint version");

  RawCheckpoint raw;
  try {
    const auto& config = header.at("config");
    raw.config = model_config_from_json(config.at("model"));
    raw.tasks =
        tasks_from_strings(config.at("tasks").get<std::vector<std::string>>());
    raw.topology =
        topology_from_string(config.at("topology").get<std::string>());

    uint64_t expect_offset = 0;
    for (const auto& entry : header.at("tensors")) {
      std::string name = entry.at("name").get<std::string>();
      auto shape = entry.at("shape").get<std::vector<int>>();
      if (entry.at("byte_offset").get<uint64_t>() != expect_offset)
        detail::io_fail(path, ("unexpected byte offset for " + name).c_str());
      int64_t numel = 1;
      for (int d : shape) {
        if (d < 1) detail::io_fail(path, ("bad shape for " + name).c_str());
        numel *= d;
      }
      std::vector<float> vals(static_cast<size_t>(numel));
      get(vals.data(), vals.size() * 4);
      expect_offset += uint64_t(numel) * 4;
      if (raw.tensors.count(name))
        detail::io_fail(path, ("duplicate tensor " + name).c_str());
      raw.names.push_back(name);
      raw.tensors[name] = {std::move(shape), std::move(vals)};
    }
  } catch (const nlohmann::json::exception&) {
    detail::io_fail(path, "malformed checkpoint header");
  }
  char extra;
  if (std::fread(&extra, 1, 1, in.f) == 1)
    detail::io_fail(path, "trailing bytes after tensor blob");
  return raw;
}

template <class T>
MultiTaskModelT<T> load_checkpoint(const std::string& path) {
  RawCheckpoint raw = read_checkpoint_raw(path);
  MultiTaskModelT<T> model(raw.config, raw.tasks, raw.topology, /*seed=*/0);
  if (raw.names.size() != model.store.items().size())
    detail::io_fail(path, "tensor list does not match the model layout");
  for (const auto& name : raw.names) {
    if (!model.store.has(name))
      detail::io_fail(path, ("unknown tensor " + name).c_str());
    auto t = model.store.get(name);
    const auto& [shape, vals] = raw.tensors.at(name);
    if (shape != t->shape)
      detail::io_fail(path, ("shape mismatch for " + name).c_str());
    for (size_t i = 0; i < vals.size(); ++i) t->v[i] = T(vals[i]);
  }
  return model;
}

}  // namespace mtir

#endif
