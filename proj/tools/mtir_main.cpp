// Command-line front end: dataset generation, training, evaluation, and
// mesh reconstruction. Every command is deterministic given its full flag
// set. Exit codes: 0 success, 2 configuration error, 3 numerical abort,
// 4 I/O error.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mtir/checkpoint.hpp"
#include "mtir/cli_config.hpp"
#include "mtir/dataset.hpp"
#include "mtir/eval_runner.hpp"
#include "mtir/network_model.hpp"
#include "mtir/trainer.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// flag variables for one subcommand, merged over defaults and config file
struct Args {
  std::string config_path;
  std::string data_dir;
  std::string ckpt;
  std::string from;
  std::string out;
  mtir::RunConfig flags;  // raw flag values; only counted ones are applied
  bool oracle = false;
  bool segment = false;
  int shape_id = 0;
};

// registers the shared tuning flags a command consumes and returns a merge
// function implementing precedence: defaults < config file < flags
std::function<mtir::RunConfig()> setup_common(CLI::App* cmd, Args& args) {
  cmd->add_option("--config", args.config_path,
                  "JSON config file; explicit flags override its values");
  auto& f = args.flags;
  cmd->add_option("--families", f.families,
                  "comma list of `name` or `name:count` shape families");
  cmd->add_option("--count", f.count, "number of shapes to generate");
  cmd->add_option("--gen-queries", f.gen_queries,
                  "query samples stored per generated OCCS file");
  cmd->add_option("--n-surface", f.n_surface,
                  "labeled surface vertices per shape");
  cmd->add_option("--seed", f.seed, "master RNG seed");
  cmd->add_option("--noise-sigma", f.noise_sigma,
                  "gaussian noise added to observed input clouds");
  cmd->add_option("--tasks", f.tasks, "comma list from rec,cls,seg");
  cmd->add_option("--topology", f.topology,
                  "decoder topology: parallel or joint");
  cmd->add_flag("--freeze-encoder", f.freeze_encoder,
                "keep warm-started encoder weights fixed");
  cmd->add_option("--steps", f.steps, "optimization steps");
  cmd->add_option("--lr", f.lr, "ADAM learning rate");
  cmd->add_option("--batch-size", f.batch_size, "shapes per training step");
  cmd->add_option("--n-query", f.n_query,
                  "occupancy query points per shape per step");
  cmd->add_option("--lambda-cls", f.lambda_cls,
                  "classification loss weight");
  cmd->add_option("--lambda-seg", f.lambda_seg, "segmentation loss weight");
  cmd->add_option("--metrics", f.metrics,
                  "comma list from iou,chamfer,acc,miou");
  cmd->add_option("--iou-samples", f.iou_samples,
                  "Monte-Carlo points for volumetric IOU");
  cmd->add_option("--miou-points", f.miou_points,
                  "interior points for part mIOU");
  cmd->add_option("--chamfer-points", f.chamfer_points,
                  "surface samples on the predicted mesh");
  cmd->add_option("--res", f.res, "marching cubes grid resolution");
  cmd->add_option("--tau", f.tau, "level set for mesh extraction");
  cmd->add_option("--binarize-tau", f.binarize_tau,
                  "occupancy threshold for volumetric IOU");

  return [cmd, &args]() {
    mtir::RunConfig run;  // defaults
    if (!args.config_path.empty())
      run = mtir::load_run_config(std::move(run), args.config_path);
    const auto& f = args.flags;
    auto set = [&](const char* flag, auto member) {
      if (cmd->count(flag)) run.*member = f.*member;
    };
    set("--families", &mtir::RunConfig::families);
    set("--count", &mtir::RunConfig::count);
    set("--gen-queries", &mtir::RunConfig::gen_queries);
    set("--n-surface", &mtir::RunConfig::n_surface);
    set("--seed", &mtir::RunConfig::seed);
    set("--noise-sigma", &mtir::RunConfig::noise_sigma);
    set("--tasks", &mtir::RunConfig::tasks);
    set("--topology", &mtir::RunConfig::topology);
    set("--freeze-encoder", &mtir::RunConfig::freeze_encoder);
    set("--steps", &mtir::RunConfig::steps);
    set("--lr", &mtir::RunConfig::lr);
    set("--batch-size", &mtir::RunConfig::batch_size);
    set("--n-query", &mtir::RunConfig::n_query);
    set("--lambda-cls", &mtir::RunConfig::lambda_cls);
    set("--lambda-seg", &mtir::RunConfig::lambda_seg);
    set("--metrics", &mtir::RunConfig::metrics);
    set("--iou-samples", &mtir::RunConfig::iou_samples);
    set("--miou-points", &mtir::RunConfig::miou_points);
    set("--chamfer-points", &mtir::RunConfig::chamfer_points);
    set("--res", &mtir::RunConfig::res);
    set("--tau", &mtir::RunConfig::tau);
    set("--binarize-tau", &mtir::RunConfig::binarize_tau);
    return run;
  };
}

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string labels_path(const std::string& mesh_path) {
  const std::string ext = ".off";
  if (mesh_path.size() > ext.size() &&
      mesh_path.compare(mesh_path.size() - ext.size(), ext.size(), ext) == 0)
    return mesh_path.substr(0, mesh_path.size() - ext.size()) + ".labels";
  return mesh_path + ".labels";
}

int run_gen_data(const mtir::RunConfig& run, const Args& args) {
  mtir::DatasetManifest manifest =
      mtir::generate_dataset(args.out, mtir::to_gen_config(run));
  std::printf("generated %zu shapes (%s) in %s\n", manifest.shapes.size(),
              manifest.spec_string().c_str(), args.out.c_str());
  return 0;
}

int run_train(const mtir::RunConfig& run, const Args& args) {
  mtir::LoadedDataset data = mtir::load_dataset(args.data_dir, run.n_surface);
  mtir::TrainConfig cfg = mtir::to_train_config(run, data.spec);
  cfg.init_checkpoint = args.from;
  cfg.validate();

  mtir::TrainResult result = mtir::train(data.shapes, cfg);
  mtir::save_checkpoint(args.out, result.model);
  mtir::write_loss_csv(args.out + ".loss.csv", result.history);

  const mtir::LossBreakdown& last = result.history.back();
  std::printf("trained %d steps on %zu shapes; final L_tot %.6g\n", cfg.steps,
              data.shapes.size(), last.l_tot);
  if (result.seg_all_outside_warnings > 0)
    std::fprintf(stderr,
                 "warning: %d segmentation batches had no interior points\n",
                 result.seg_all_outside_warnings);
  std::printf("checkpoint: %s\nloss csv: %s.loss.csv\n", args.out.c_str(),
              args.out.c_str());
  return 0;
}

int run_eval(const mtir::RunConfig& run, const Args& args) {
  mtir::LoadedDataset data = mtir::load_dataset(args.data_dir, run.n_surface);
  mtir::EvalRequest req = mtir::parse_metrics(run.metrics);
  mtir::EvalParams params = mtir::to_eval_params(run);

  mtir::MetricsReport report;
  if (args.oracle) {
    report = mtir::evaluate_dataset(mtir::oracle_binder(), data.shapes, req,
                                    params, run.seed);
  } else {
    if (args.ckpt.empty())
      throw std::invalid_argument("eval: --ckpt is required without --oracle");
    auto model = mtir::load_checkpoint<float>(args.ckpt);
    if ((req.iou || req.chamfer) && !model.tasks.rec)
      throw std::invalid_argument(
          "eval: iou/chamfer need a reconstruction head, checkpoint has none");
    if (req.miou && !model.tasks.seg)
      throw std::invalid_argument(
          "eval: miou needs a segmentation head, checkpoint has none");
    if (req.acc && !model.tasks.cls)
      throw std::invalid_argument(
          "eval: acc needs a classification head, checkpoint has none");
    report = mtir::evaluate_dataset(
        mtir::network_binder(model, run.noise_sigma), data.shapes, req,
        params, run.seed);
  }

  write_json_file(args.out, report.to_json());
  std::printf("report: %s\n", args.out.c_str());
  return 0;
}

int run_reconstruct(const mtir::RunConfig& run, const Args& args) {
  mtir::LoadedDataset data = mtir::load_dataset(args.data_dir, run.n_surface);
  if (args.shape_id < 0 || size_t(args.shape_id) >= data.shapes.size())
    throw std::invalid_argument(
        "reconstruct: shape " + std::to_string(args.shape_id) +
        " not in this dataset (holds " + std::to_string(data.shapes.size()) +
        " shapes)");
  const mtir::LabeledShape& shape = data.shapes[size_t(args.shape_id)];

  auto net = mtir::load_checkpoint<float>(args.ckpt);
  if (!net.tasks.rec)
    throw std::invalid_argument(
        "reconstruct: checkpoint has no reconstruction head");
  if (args.segment && !net.tasks.seg)
    throw std::invalid_argument(
        "reconstruct: --segment needs a segmentation head");

  mtir::NetworkModel model(net, shape,
                           mtir::mix_seed(run.seed, uint64_t(args.shape_id)),
                           run.noise_sigma);
  double pad = mtir::default_pad(shape);
  mtir::Vec3 lo = shape.bbox_min - mtir::Vec3{pad, pad, pad};
  mtir::Vec3 hi = shape.bbox_max + mtir::Vec3{pad, pad, pad};
  mtir::ExtractedMesh extracted =
      mtir::extract_mesh(model, lo, hi, run.res, run.tau);
  if (extracted.mesh.empty())
    throw std::runtime_error(
        "reconstruct: level set is empty at this resolution and tau");
  mtir::write_off(args.out, extracted.mesh);
  std::printf("mesh: %s (%zu vertices, %zu triangles)\n", args.out.c_str(),
              extracted.mesh.vertices.size(), extracted.mesh.triangles.size());

  if (args.segment) {
    std::vector<int> labels = mtir::segment_mesh(model, extracted, lo, hi);
    std::string path = labels_path(args.out);
    mtir::write_labels(path, labels);
    std::printf("labels: %s\n", path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "multi-task implicit shape networks: one latent code per shape drives "
      "occupancy reconstruction, interior part segmentation, and "
      "classification"};
  app.require_subcommand(1);

  Args gen_args, train_args, eval_args, rec_args;

  CLI::App* gen = app.add_subcommand(
      "gen-data", "generate a labeled procedural shape dataset");
  auto gen_merge = setup_common(gen, gen_args);
  gen->add_option("--out", gen_args.out, "output dataset directory")
      ->required();

  CLI::App* tr = app.add_subcommand("train", "train a multi-task model");
  auto train_merge = setup_common(tr, train_args);
  tr->add_option("--data", train_args.data_dir, "dataset directory")
      ->required();
  tr->add_option("--from", train_args.from,
                 "checkpoint to warm-start matching tensors from");
  tr->add_option("--out", train_args.out, "output checkpoint path")
      ->required();

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  auto eval_merge = setup_common(ev, eval_args);
  ev->add_option("--data", eval_args.data_dir, "dataset directory")
      ->required();
  ev->add_option("--ckpt", eval_args.ckpt, "checkpoint to evaluate");
  ev->add_flag("--oracle", eval_args.oracle,
               "evaluate the ground-truth oracle instead of a checkpoint");
  ev->add_option("--out", eval_args.out, "output report JSON path")
      ->required();

  CLI::App* rc = app.add_subcommand(
      "reconstruct", "extract a mesh from a trained model");
  auto rec_merge = setup_common(rc, rec_args);
  rc->add_option("--data", rec_args.data_dir, "dataset directory")
      ->required();
  rc->add_option("--ckpt", rec_args.ckpt, "trained checkpoint")->required();
  rc->add_option("--shape", rec_args.shape_id, "shape id within the dataset")
      ->required();
  rc->add_flag("--segment", rec_args.segment,
               "also write per-vertex part labels");
  rc->add_option("--out", rec_args.out, "output OFF mesh path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_merge(), gen_args);
    if (tr->parsed()) return run_train(train_merge(), train_args);
    if (ev->parsed()) return run_eval(eval_merge(), eval_args);
    if (rc->parsed()) return run_reconstruct(rec_merge(), rec_args);
  } catch (const mtir::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::logic_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
