#include "mtir/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>

#include "mtir/adam.hpp"
#include "mtir/checkpoint.hpp"
#include "mtir/occs_io.hpp"
#include "mtir/sample.hpp"

namespace mtir {

namespace {

TensorPtr<float> to_tensor(const std::vector<Vec3f>& pts) {
  auto t = make_tensor<float>({int(pts.size()), 3});
  for (size_t i = 0; i < pts.size(); ++i)
    for (int j = 0; j < 3; ++j) t->at(int(i), j) = pts[i][j];
  return t;
}

uint64_t sample_seed(uint64_t seed, int step, int k) {
  return mix_seed(mix_seed(mix_seed(seed, 0xBA7C4), uint64_t(step)),
                  uint64_t(k));
}

}  // namespace

TrainResult train(const std::vector<LabeledShape>& dataset,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& shape : dataset) {
    if (shape.class_label < 0 || shape.class_label >= cfg.model.n_classes)
      throw std::invalid_argument(
          "train: shape class " + std::to_string(shape.class_label) +
          " outside the configured " + std::to_string(cfg.model.n_classes) +
          " classes");
    if (shape.n_parts > cfg.model.n_parts)
      throw std::invalid_argument(
          "train: shape has " + std::to_string(shape.n_parts) +
          " parts, segmentation head has " +
          std::to_string(cfg.model.n_parts));
  }

  MultiTaskModelT<float> model(cfg.model, cfg.tasks, cfg.topology,
                               mix_seed(cfg.seed, 0x1817));

  if (!cfg.init_checkpoint.empty()) {
    RawCheckpoint raw = read_checkpoint_raw(cfg.init_checkpoint);
    size_t copied = 0;
    for (const auto& [name, t] : model.store.items()) {
      auto it = raw.tensors.find(name);
      if (it == raw.tensors.end()) continue;
      const auto& [shape, vals] = it->second;
      if (shape != t->shape)
        throw std::runtime_error(cfg.init_checkpoint +
                                 ": shape mismatch for " + name);
      for (size_t i = 0; i < vals.size(); ++i) t->v[i] = vals[i];
      ++copied;
    }
    if (copied == 0)
      throw std::runtime_error(cfg.init_checkpoint +
                               ": no tensors match the new model");
    if (cfg.freeze_encoder) {
      for (const auto& [name, t] : model.store.items())
        if (name.rfind("encoder.", 0) == 0 && !raw.tensors.count(name))
          throw std::runtime_error(cfg.init_checkpoint +
                                   ": cannot freeze, encoder tensor " + name +
                                   " missing from checkpoint");
    }
  }

  // Freezing drops requires_grad on the encoder: no encoder gradients are
  // computed or applied, and the tensors stay bit-identical by
  // construction.
  std::vector<TensorPtr<float>> trainable;
  for (const auto& [name, t] : model.store.items()) {
    if (!t->requires_grad) continue;
    if (cfg.freeze_encoder && name.rfind("encoder.", 0) == 0) {
      t->requires_grad = false;
      continue;
    }
    trainable.push_back(t);
  }
  if (trainable.empty())
    throw std::invalid_argument("train: nothing left to optimize");

  AdamT<float> adam(trainable, cfg.lr);

  TrainResult result{std::move(model), {}, 0};
  MultiTaskModelT<float>& net = result.model;
  result.history.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    Rng pick(mix_seed(cfg.seed, uint64_t(step)));

    TapeT<float> tape;
    TensorPtr<float> rec_sum, seg_sum, cls_rows;
    std::vector<int> cls_labels;

    for (int k = 0; k < cfg.batch_size; ++k) {
      const LabeledShape& shape = dataset[size_t(pick.below(dataset.size()))];
      SampleBatch batch = sample_batch(
          shape, cfg.n_query, default_pad(shape), cfg.noise_sigma,
          sample_seed(cfg.seed, step, k), cfg.model.cloud_points);

      auto cloud = to_tensor(batch.input_cloud);
      auto z = net.encoder.encode(tape, cloud);

      if (cfg.tasks.rec || cfg.tasks.seg) {
        auto pts = to_tensor(batch.query_points);
        auto heads = net.decode(tape, z, pts, ops::BNMode::train);
        if (cfg.tasks.rec) {
          auto l = loss_rec(tape, heads.occ_logits, batch.gt_occupancy);
          rec_sum = rec_sum ? ops::add(tape, rec_sum, l) : l;
        }
        if (cfg.tasks.seg) {
          std::vector<int> labels(batch.gt_part_label.begin(),
                                  batch.gt_part_label.end());
          auto l = loss_seg(tape, heads.seg_logits, labels,
                            batch.gt_occupancy,
                            &result.seg_all_outside_warnings);
          seg_sum = seg_sum ? ops::add(tape, seg_sum, l) : l;
        }
      }
      if (cfg.tasks.cls) {
        auto row = net.classifier->forward(tape, z);
        cls_rows = cls_rows ? ops::concat(tape, cls_rows, row, 0) : row;
        cls_labels.push_back(int(batch.class_label));
      }
    }

    double inv_b = 1.0 / double(cfg.batch_size);
    TensorPtr<float> l_rec, l_cls, l_seg;
    if (rec_sum) l_rec = ops::scale(tape, rec_sum, inv_b);
    if (seg_sum) l_seg = ops::scale(tape, seg_sum, inv_b);
    if (cls_rows) l_cls = loss_cls(tape, cls_rows, cls_labels);

    TotalLoss<float> total = total_loss(tape, l_rec, l_cls, l_seg,
                                        cfg.weights);
    if (!std::isfinite(total.breakdown.l_tot)) throw NumericalError(step);

    tape.backward(total.tensor);
    adam.step();
    adam.zero_grad();
    result.history.push_back(total.breakdown);
  }
  return result;
}

void write_loss_csv(const std::string& path,
                    const std::vector<LossBreakdown>& history) {
  detail::File out(std::fopen(path.c_str(), "wb"));
  if (!out.f) detail::io_fail(path, "cannot open for writing");
  if (std::fprintf(out.f, "step,L_rec,L_cls,L_seg,L_tot\n") < 0)
    detail::io_fail(path, "write failed");
  for (size_t i = 0; i < history.size(); ++i) {
    const LossBreakdown& b = history[i];
    if (std::fprintf(out.f, "%zu,%.9g,%.9g,%.9g,%.9g\n", i, b.l_rec, b.l_cls,
                     b.l_seg, b.l_tot) < 0)
      detail::io_fail(path, "write failed");
  }
}

}  // namespace mtir
