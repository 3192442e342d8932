#ifndef MTIR_EVAL_RUNNER_HPP
#define MTIR_EVAL_RUNNER_HPP

#include <string>
#include <vector>

#include "mtir/marching_cubes.hpp"
#include "mtir/metrics.hpp"

namespace mtir {

struct EvalRequest {
  bool iou = false;
  bool chamfer = false;
  bool acc = false;
  bool miou = false;

  bool any() const { return iou || chamfer || acc || miou; }
};

// comma list drawn from {iou, chamfer, acc, miou}
inline EvalRequest parse_metrics(const std::string& csv) {
  EvalRequest req;
  std::string item;
  auto flush = [&] {
    if (item == "iou")
      req.iou = true;
    else if (item == "chamfer")
      req.chamfer = true;
    else if (item == "acc")
      req.acc = true;
    else if (item == "miou")
      req.miou = true;
    else
      throw std::invalid_argument("unknown metric '" + item +
                                  "' (expected iou, chamfer, acc, miou)");
    item.clear();
  };
  for (char c : csv) {
    if (c == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      item += c;
  }
  flush();
  return req;
}

struct EvalParams {
  int iou_samples = 10000;    // Monte-Carlo points for volumetric IOU
  int miou_points = 10000;    // interior points for part mIOU
  int chamfer_points = 10000; // surface samples on the predicted mesh
  int mesh_res = 64;          // marching cubes resolution for chamfer
  double extract_tau = 0.2;   // level set for mesh extraction
  double binarize_tau = kOccupancyTau;  // threshold for volumetric IOU
};

// Runs the requested metrics over a dataset with one binding per shape
// (seed-derived, so the whole report is deterministic). The ground-truth
// side of the Chamfer distance is the shape's exact surface sample set; a
// shape whose extraction is empty simply has no chamfer entry.
inline MetricsReport evaluate_dataset(const ModelBinder& binder,
                                      const std::vector<LabeledShape>& shapes,
                                      const EvalRequest& req,
                                      const EvalParams& params,
                                      uint64_t seed) {
  if (!req.any()) throw std::invalid_argument("eval: no metrics requested");
  if (shapes.empty()) throw std::invalid_argument("eval: empty dataset");
  MetricsReport report;
  report.shapes.resize(shapes.size());

  double iou_sum = 0.0, chamfer_sum = 0.0;
  int correct = 0, chamfer_count = 0;
  for (size_t si = 0; si < shapes.size(); ++si) {
    const LabeledShape& shape = shapes[si];
    ShapeRecord& rec = report.shapes[si];
    rec.id = uint32_t(si);
    rec.class_label = shape.class_label;
    if (!(req.iou || req.chamfer || req.acc)) continue;

    auto model = binder(shape, mix_seed(seed, uint64_t(si)));
    if (req.iou) {
      rec.iou = volumetric_iou(*model, shape, params.iou_samples,
                               mix_seed(seed, 0x10000ull + si),
                               params.binarize_tau);
      iou_sum += *rec.iou;
    }
    if (req.chamfer) {
      double pad = default_pad(shape);
      ExtractedMesh extracted = extract_mesh(
          *model, shape.bbox_min - Vec3{pad, pad, pad},
          shape.bbox_max + Vec3{pad, pad, pad}, params.mesh_res,
          params.extract_tau);
      if (!extracted.mesh.empty()) {
        auto pred = sample_mesh_surface(extracted.mesh, params.chamfer_points,
                                        mix_seed(seed, 0x20000ull + si));
        rec.chamfer_l1 = chamfer_l1_points(pred, shape.surface_vertices);
        chamfer_sum += *rec.chamfer_l1;
        ++chamfer_count;
      }
    }
    if (req.acc) {
      rec.cls_correct = model->classify() == shape.class_label;
      correct += *rec.cls_correct ? 1 : 0;
    }
  }

  if (req.iou) report.iou = iou_sum / double(shapes.size());
  if (req.chamfer && chamfer_count > 0)
    report.chamfer_l1 = chamfer_sum / double(chamfer_count);
  if (req.acc) report.cls_accuracy = double(correct) / double(shapes.size());

  if (req.miou) {
    MiouResult res = part_miou(binder, shapes, params.miou_points, seed);
    report.miou = res.miou;
    report.per_class_miou = res.per_class;
    report.miou_skipped = res.skipped;
    for (size_t si = 0; si < shapes.size(); ++si)
      report.shapes[si].miou = res.per_shape[si];
  }
  return report;
}

}  // namespace mtir

#endif
