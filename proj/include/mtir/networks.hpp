#ifndef MTIR_NETWORKS_HPP
#define MTIR_NETWORKS_HPP

#include <optional>
#include <string>

#include "mtir/model_config.hpp"
#include "mtir/ops.hpp"
#include "mtir/param_store.hpp"

namespace mtir {

// dense layer x -> x W + b with parameters registered under a name prefix
template <class T>
struct DenseT {
  TensorPtr<T> W, b;

  static DenseT create(ParamStoreT<T>& store, const std::string& prefix,
                       int in, int out, Rng& rng, double weight_gain = 1.0,
                       double bias_init = 0.0) {
    DenseT d;
    d.W = store.add(prefix + ".W", {in, out});
    init_glorot(*d.W, in, out, rng, weight_gain);
    d.b = store.add(prefix + ".b", {out});
    fill_value(*d.b, bias_init);
    return d;
  }

  TensorPtr<T> operator()(TapeT<T>& tape, const TensorPtr<T>& x) const {
    return ops::bias_add(tape, ops::matmul(tape, x, W), b);
  }
};

// Conditional batchnorm: batch statistics as usual, but the affine maps
// gamma(z) and beta(z) are dense functions of the latent code. Initialized
// near gamma=1, beta=0 so training starts close to plain normalization.
template <class T>
struct CondBatchNormT {
  DenseT<T> gamma_map, beta_map;
  ops::BNStateT<T> state;

  static CondBatchNormT create(ParamStoreT<T>& store,
                               const std::string& prefix, int latent,
                               int features, Rng& rng) {
    CondBatchNormT c;
    c.gamma_map =
        DenseT<T>::create(store, prefix + ".gamma", latent, features, rng,
                          /*weight_gain=*/0.01, /*bias_init=*/1.0);
    c.beta_map =
        DenseT<T>::create(store, prefix + ".beta", latent, features, rng,
                          /*weight_gain=*/0.01, /*bias_init=*/0.0);
    c.state.running_mean =
        store.add(prefix + ".running_mean", {features}, /*trainable=*/false);
    c.state.running_var =
        store.add(prefix + ".running_var", {features}, /*trainable=*/false);
    fill_value(*c.state.running_var, 1.0);
    return c;
  }

  TensorPtr<T> operator()(TapeT<T>& tape, const TensorPtr<T>& x,
                          const TensorPtr<T>& z, ops::BNMode mode) {
    auto gamma = gamma_map(tape, z);  // [1, features]
    auto beta = beta_map(tape, z);
    return ops::batchnorm(tape, x, gamma, beta, state, mode);
  }
};

// Point-cloud encoder: per-point features through residual FC blocks, a
// max-pool over the point axis, then a projection to the latent code. All
// per-point stages act row-wise, so the encoding is exactly invariant to
// point order and duplication.
template <class T>
struct EncoderT {
  int cloud_points = 0;
  DenseT<T> in;
  std::vector<std::pair<DenseT<T>, DenseT<T>>> blocks;
  DenseT<T> out;

  static EncoderT create(ParamStoreT<T>& store, const ModelConfig& cfg,
                         Rng& rng) {
    EncoderT e;
    e.cloud_points = cfg.cloud_points;
    e.in = DenseT<T>::create(store, "encoder.in", 3, cfg.encoder_hidden, rng);
    for (int i = 0; i < cfg.encoder_blocks; ++i) {
      std::string p = "encoder.block" + std::to_string(i);
      e.blocks.emplace_back(
          DenseT<T>::create(store, p + ".fc1", cfg.encoder_hidden,
                            cfg.encoder_hidden, rng),
          DenseT<T>::create(store, p + ".fc2", cfg.encoder_hidden,
                            cfg.encoder_hidden, rng));
    }
    e.out =
        DenseT<T>::create(store, "encoder.out", cfg.encoder_hidden, cfg.latent,
                          rng);
    return e;
  }

  // cloud [n_points, 3] -> encoding [1, latent]
  TensorPtr<T> encode(TapeT<T>& tape, const TensorPtr<T>& cloud) const {
    if (cloud->shape.size() != 2 || cloud->shape[1] != 3 ||
        cloud->shape[0] != cloud_points)
      throw std::invalid_argument(
          "encode: expected a " + std::to_string(cloud_points) +
          "x3 cloud, got " + shape_str(cloud->shape));
    auto x = in(tape, cloud);
    for (const auto& [fc1, fc2] : blocks) {
      auto t = fc2(tape, ops::relu(tape, fc1(tape, x)));
      x = ops::add(tape, x, t);
    }
    auto pooled = ops::maxpool(tape, x, 0);  // [1, hidden]
    return out(tape, pooled);
  }
};

// Conditional decoder: input projection of the query points, then
// pre-activation residual blocks (CBN -> relu -> dense, twice, plus skip),
// then a linear head to c_out channels. The latent code enters only
// through the conditional batchnorms.
template <class T>
struct DecoderT {
  int c_out = 0;
  int latent = 0;
  DenseT<T> in;
  struct Block {
    CondBatchNormT<T> cbn1;
    DenseT<T> fc1;
    CondBatchNormT<T> cbn2;
    DenseT<T> fc2;
  };
  std::vector<Block> blocks;
  DenseT<T> head;

  static DecoderT create(ParamStoreT<T>& store, const std::string& prefix,
                         const ModelConfig& cfg, int c_out, Rng& rng) {
    DecoderT d;
    d.c_out = c_out;
    d.latent = cfg.latent;
    d.in = DenseT<T>::create(store, prefix + ".in", 3, cfg.decoder_hidden, rng);
    for (int i = 0; i < cfg.decoder_blocks; ++i) {
      std::string p = prefix + ".block" + std::to_string(i);
      Block b;
      b.cbn1 = CondBatchNormT<T>::create(store, p + ".cbn1", cfg.latent,
                                         cfg.decoder_hidden, rng);
      b.fc1 = DenseT<T>::create(store, p + ".fc1", cfg.decoder_hidden,
                                cfg.decoder_hidden, rng);
      b.cbn2 = CondBatchNormT<T>::create(store, p + ".cbn2", cfg.latent,
                                         cfg.decoder_hidden, rng);
      b.fc2 = DenseT<T>::create(store, p + ".fc2", cfg.decoder_hidden,
                                cfg.decoder_hidden, rng);
      d.blocks.push_back(std::move(b));
    }
    d.head = DenseT<T>::create(store, prefix + ".head", cfg.decoder_hidden,
                               c_out, rng);
    return d;
  }

  // z [1, latent], points [N, 3] -> logits [N, c_out]
  TensorPtr<T> forward(TapeT<T>& tape, const TensorPtr<T>& z,
                       const TensorPtr<T>& points, ops::BNMode mode) {
    if (z->shape.size() != 2 || z->shape[0] != 1 || z->shape[1] != latent)
      throw std::invalid_argument("decoder: expected a 1x" +
                                  std::to_string(latent) + " encoding, got " +
                                  shape_str(z->shape));
    if (points->shape.size() != 2 || points->shape[1] != 3)
      throw std::invalid_argument("decoder: expected Nx3 points, got " +
                                  shape_str(points->shape));
    auto x = in(tape, points);
    for (auto& b : blocks) {
      auto t = b.fc1(tape, ops::relu(tape, b.cbn1(tape, x, z, mode)));
      t = b.fc2(tape, ops::relu(tape, b.cbn2(tape, t, z, mode)));
      x = ops::add(tape, x, t);
    }
    return head(tape, x);
  }
};

// two-layer MLP over the latent code
template <class T>
struct ClassifierT {
  DenseT<T> fc1, fc2;

  static ClassifierT create(ParamStoreT<T>& store, const ModelConfig& cfg,
                            Rng& rng) {
    ClassifierT c;
    c.fc1 = DenseT<T>::create(store, "classifier.fc1", cfg.latent,
                              cfg.classifier_hidden, rng);
    c.fc2 = DenseT<T>::create(store, "classifier.fc2", cfg.classifier_hidden,
                              cfg.n_classes, rng);
    return c;
  }

  // z [1, latent] -> logits [1, n_classes]
  TensorPtr<T> forward(TapeT<T>& tape, const TensorPtr<T>& z) const {
    return fc2(tape, ops::relu(tape, fc1(tape, z)));
  }
};

// The full multi-task stack: one encoder feeding whichever heads the task
// set requests. "parallel" builds separate occupancy/segmentation decoders;
// "joint" builds one decoder whose channel 0 is the occupancy logit and
// channels 1..K are the segmentation logits.
template <class T>
struct MultiTaskModelT {
  ModelConfig cfg;
  TaskSet tasks;
  Topology topology = Topology::parallel;
  ParamStoreT<T> store;
  EncoderT<T> encoder;
  std::optional<DecoderT<T>> occ_decoder;
  std::optional<DecoderT<T>> seg_decoder;
  std::optional<DecoderT<T>> joint_decoder;
  std::optional<ClassifierT<T>> classifier;

  MultiTaskModelT(const ModelConfig& config, TaskSet task_set, Topology topo,
                  uint64_t seed)
      : cfg(config), tasks(task_set), topology(topo) {
    cfg.validate();
    if (!tasks.any())
      throw std::invalid_argument("model: task set is empty");
    if (topology == Topology::joint && !(tasks.rec && tasks.seg))
      throw std::invalid_argument(
          "model: joint topology requires both rec and seg tasks");
    Rng rng(seed);
    encoder = EncoderT<T>::create(store, cfg, rng);
    if (topology == Topology::joint) {
      joint_decoder = DecoderT<T>::create(store, "decoder_joint", cfg,
                                          1 + cfg.n_parts, rng);
    } else {
      if (tasks.rec)
        occ_decoder = DecoderT<T>::create(store, "decoder_occ", cfg, 1, rng);
      if (tasks.seg)
        seg_decoder =
            DecoderT<T>::create(store, "decoder_seg", cfg, cfg.n_parts, rng);
    }
    if (tasks.cls) classifier = ClassifierT<T>::create(store, cfg, rng);
  }

  struct DecodeOut {
    TensorPtr<T> occ_logits;  // [N, 1] or null if rec is off
    TensorPtr<T> seg_logits;  // [N, K] or null if seg is off
  };

  DecodeOut decode(TapeT<T>& tape, const TensorPtr<T>& z,
                   const TensorPtr<T>& points, ops::BNMode mode) {
    DecodeOut out;
    if (joint_decoder) {
      auto raw = joint_decoder->forward(tape, z, points, mode);
      out.occ_logits = ops::slice(tape, raw, 1, 0, 1);
      out.seg_logits = ops::slice(tape, raw, 1, 1, cfg.n_parts);
      return out;
    }
    if (occ_decoder) out.occ_logits = occ_decoder->forward(tape, z, points, mode);
    if (seg_decoder) out.seg_logits = seg_decoder->forward(tape, z, points, mode);
    return out;
  }
};

}  // namespace mtir

#endif
