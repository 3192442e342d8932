#ifndef MTIR_TRAINER_HPP
#define MTIR_TRAINER_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "mtir/losses.hpp"
#include "mtir/model_config.hpp"
#include "mtir/networks.hpp"
#include "mtir/shape.hpp"

namespace mtir {

// thrown when a loss stops being finite; carries the offending step
struct NumericalError : std::runtime_error {
  int step;
  explicit NumericalError(int s)
      : std::runtime_error("non-finite loss at step " + std::to_string(s)),
        step(s) {}
};

struct TrainConfig {
  TaskSet tasks{true, false, false};
  Topology topology = Topology::parallel;
  bool freeze_encoder = false;
  double lr = 1e-4;
  int batch_size = 16;
  int n_query = 1024;
  int steps = 1000;
  uint64_t seed = 0;
  double noise_sigma = 0.05;
  LossWeights weights;
  ModelConfig model;
  std::string init_checkpoint;  // warm start; required when freezing

  void validate() const {
    model.validate();
    weights.validate();
    if (!tasks.any()) throw std::invalid_argument("train: no tasks selected");
    if (topology == Topology::joint && !(tasks.rec && tasks.seg))
      throw std::invalid_argument(
          "train: joint topology requires both rec and seg tasks");
    if (freeze_encoder && init_checkpoint.empty())
      throw std::invalid_argument(
          "train: freeze_encoder requires an initial checkpoint");
    if (lr <= 0) throw std::invalid_argument("train: lr must be > 0");
    if (batch_size < 1)
      throw std::invalid_argument("train: batch_size must be >= 1");
    if (n_query < 1)
      throw std::invalid_argument("train: n_query must be >= 1");
    if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
    if (noise_sigma < 0)
      throw std::invalid_argument("train: noise_sigma must be >= 0");
  }
};

struct TrainResult {
  MultiTaskModelT<float> model;
  std::vector<LossBreakdown> history;  // one entry per step
  int seg_all_outside_warnings = 0;
};

TrainResult train(const std::vector<LabeledShape>& dataset,
                  const TrainConfig& cfg);

void write_loss_csv(const std::string& path,
                    const std::vector<LossBreakdown>& history);

}  // namespace mtir

#endif
