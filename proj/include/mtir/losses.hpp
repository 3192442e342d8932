#ifndef MTIR_LOSSES_HPP
#define MTIR_LOSSES_HPP

#include <stdexcept>

#include "mtir/ops.hpp"

namespace mtir {

struct LossWeights {
  double lambda_cls = 1.0;
  double lambda_seg = 1.0;

  void validate() const {
    if (lambda_cls < 0 || lambda_seg < 0)
      throw std::invalid_argument("loss weights must be >= 0");
  }
};

// Per-step scalar losses. l_tot is assembled from the other three fields
// in double precision, so the linear relation holds exactly.
struct LossBreakdown {
  double l_rec = 0.0;
  double l_cls = 0.0;
  double l_seg = 0.0;
  double l_tot = 0.0;
};

// mean BCE over occupancy logits, stable logit form
template <class T>
TensorPtr<T> loss_rec(TapeT<T>& tape, const TensorPtr<T>& occ_logits,
                      const std::vector<uint8_t>& gt_occupancy) {
  return ops::bce_with_logits_mean(tape, occ_logits, gt_occupancy);
}

// mean cross entropy over class logits
template <class T>
TensorPtr<T> loss_cls(TapeT<T>& tape, const TensorPtr<T>& cls_logits,
                      const std::vector<int>& class_labels) {
  return ops::softmax_xent_mean(tape, cls_logits, class_labels);
}

// Cross entropy over part logits restricted to ground-truth interior
// points. A batch with no interior points contributes an exact zero and
// bumps the caller's warning counter.
template <class T>
TensorPtr<T> loss_seg(TapeT<T>& tape, const TensorPtr<T>& seg_logits,
                      const std::vector<int>& gt_part_labels,
                      const std::vector<uint8_t>& gt_occupancy,
                      int* all_outside_warnings = nullptr) {
  bool any_inside = false;
  for (uint8_t o : gt_occupancy) any_inside |= o != 0;
  if (!any_inside && all_outside_warnings) ++*all_outside_warnings;
  return ops::softmax_xent_mean(tape, seg_logits, gt_part_labels,
                                gt_occupancy);
}

template <class T>
struct TotalLoss {
  TensorPtr<T> tensor;  // scalar, carries the gradient
  LossBreakdown breakdown;
};

// Weighted linear combination of whichever task losses are present (null
// components contribute zero).
template <class T>
TotalLoss<T> total_loss(TapeT<T>& tape, const TensorPtr<T>& l_rec,
                        const TensorPtr<T>& l_cls, const TensorPtr<T>& l_seg,
                        const LossWeights& w) {
  w.validate();
  TotalLoss<T> out;
  out.breakdown.l_rec = l_rec ? double(l_rec->v[0]) : 0.0;
  out.breakdown.l_cls = l_cls ? double(l_cls->v[0]) : 0.0;
  out.breakdown.l_seg = l_seg ? double(l_seg->v[0]) : 0.0;
  out.breakdown.l_tot = out.breakdown.l_rec +
                        w.lambda_cls * out.breakdown.l_cls +
                        w.lambda_seg * out.breakdown.l_seg;

  TensorPtr<T> acc = l_rec;
  if (l_cls) {
    auto term = ops::scale(tape, l_cls, w.lambda_cls);
    acc = acc ? ops::add(tape, acc, term) : term;
  }
  if (l_seg) {
    auto term = ops::scale(tape, l_seg, w.lambda_seg);
    acc = acc ? ops::add(tape, acc, term) : term;
  }
  if (!acc) throw std::invalid_argument("total_loss: no task losses given");
  out.tensor = acc;
  return out;
}

}  // namespace mtir

#endif
