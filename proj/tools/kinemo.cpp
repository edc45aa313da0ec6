#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "kinemo/config.hpp"
#include "kinemo/evalkit.hpp"
#include "kinemo/io.hpp"
#include "kinemo/pipeline.hpp"
#include "kinemo/rng.hpp"
#include "kinemo/threading.hpp"

namespace fs = std::filesystem;
using namespace kinemo;

namespace {

std::string swap_ext(const std::string& path, const std::string& ext) {
  const fs::path p(path);
  fs::path out = p;
  out.replace_extension(ext);
  return out.string();
}

std::vector<std::string> split_ids(const Manifest& m, const std::string& split) {
  if (split == "train") return m.train;
  if (split == "val") return m.val;
  if (split == "test") return m.test;
  if (split == "all") {
    std::vector<std::string> ids = m.train;
    ids.insert(ids.end(), m.val.begin(), m.val.end());
    ids.insert(ids.end(), m.test.begin(), m.test.end());
    return ids;
  }
  throw std::invalid_argument("unknown split: " + split);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct SampleSet {
  // deques would also do; contexts are heavy, so build once and keep
  std::vector<TrainSample> samples;
  std::vector<const TrainSample*> ptrs() const {
    std::vector<const TrainSample*> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(&s);
    return out;
  }
};

SampleSet build_samples(const std::string& dir, const std::vector<std::string>& ids,
                        const Config& cfg, const GnnConfig& gc) {
  SampleSet set;
  set.samples.resize(ids.size());
  std::vector<std::string> errors(ids.size());
  parallel_for(static_cast<int>(ids.size()), [&](int i) {
    try {
      ContextOptions copt = cfg.context_options();
      copt.n_points = gc.n_points;
      Shape shape = load_shape(dir + "/shapes/" + ids[i] + ".json");
      ShapeContext ctx = build_context(std::move(shape), copt);
      const AnnotationSet gt =
          load_annotations(dir + "/annotations/" + ids[i] + ".json");
      set.samples[i] = make_train_sample(std::move(ctx), gt, gc);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& err : errors) {
    if (!err.empty()) throw std::runtime_error(err);
  }
  return set;
}

int run_synth(const std::string& out, const std::vector<std::string>& categories,
              int count, const Config& cfg) {
  std::vector<CategorySpec> specs;
  for (const auto& name : categories) {
    const CategorySpec* spec = find_spec(name);
    if (!spec) throw std::invalid_argument("unknown category: " + name);
    specs.push_back(*spec);
  }
  SynthOptions opt;
  opt.points_per_leaf = cfg.synth_points;
  opt.rot_aug_max_deg = cfg.rot_aug_deg;
  const Manifest m = gen_dataset(specs, count, cfg.seed, out, opt);
  std::cout << "wrote " << specs.size() * count << " shapes to " << out
            << " (train " << m.train.size() << ", val " << m.val.size()
            << ", test " << m.test.size() << ")\n";
  return 0;
}

int run_train_gnn(const std::string& dir, const std::string& out, TypeMode mode,
                  const Config& cfg) {
  const Manifest manifest = load_manifest(dir + "/manifest.json");
  const GnnConfig gc = cfg.gnn_config(mode);
  const SampleSet train = build_samples(dir, manifest.train, cfg, gc);
  const SampleSet val = build_samples(dir, manifest.val, cfg, gc);
  const auto train_ptrs = train.ptrs();
  const auto val_ptrs = val.ptrs();

  GnnTrainer trainer(GnnModel::init(gc, cfg.seed), cfg.adam_options());
  std::cout << "training gnn (" << (mode == TypeMode::Fine ? "fine" : "coarse")
            << ", " << trainer.model().params.parameter_count() << " parameters, "
            << train_ptrs.size() << " shapes)\n";

  std::ofstream csv(swap_ext(out, ".csv"));
  csv << "epoch,train_loss,val_loss\n";
  Rng shuffle_rng(cfg.seed ^ 0x7261696e676e6eULL);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<const TrainSample*> order = train_ptrs;
    shuffle_rng.shuffle(order);
    double sum = 0.0;
    int steps = 0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      const std::vector<const TrainSample*> batch(
          order.begin() + i,
          order.begin() + std::min(order.size(), i + cfg.batch_size));
      sum += trainer.train_step(batch);
      ++steps;
    }
    const double train_loss = steps ? sum / steps : 0.0;
    const double val_loss = trainer.eval_loss(val_ptrs);
    csv << epoch << "," << train_loss << "," << val_loss << "\n";
    if (epoch % 10 == 0 || epoch == cfg.epochs - 1) {
      std::cout << "epoch " << epoch << ": train " << train_loss << " val "
                << val_loss << "\n";
    }
  }
  trainer.model().save(out);
  std::cout << "saved " << out << "\n";
  return 0;
}

int run_train_feas(const std::string& dir, const std::string& out,
                   const Config& cfg) {
  const Manifest manifest = load_manifest(dir + "/manifest.json");
  const FeasConfig fc = cfg.feas_config();

  auto gather_pairs = [&](const std::vector<std::string>& ids) {
    std::vector<std::vector<FeasPair>> per_shape(ids.size());
    std::vector<std::string> errors(ids.size());
    parallel_for(static_cast<int>(ids.size()), [&](int i) {
      try {
        ContextOptions copt = cfg.context_options();
        copt.n_points = 32;  // leaf samples are unused for pair generation
        Shape shape = load_shape(dir + "/shapes/" + ids[i] + ".json");
        const ShapeContext ctx = build_context(std::move(shape), copt);
        const AnnotationSet gt =
            load_annotations(dir + "/annotations/" + ids[i] + ".json");
        per_shape[i] =
            gen_training_pairs(ctx, gt, cfg.n_neg, cfg.seed ^ fnv1a(ids[i]), fc);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (const auto& err : errors) {
      if (!err.empty()) throw std::runtime_error(err);
    }
    std::vector<FeasPair> pairs;
    for (auto& ps : per_shape) {
      for (auto& p : ps) pairs.push_back(std::move(p));
    }
    return pairs;
  };

  const std::vector<FeasPair> train_pairs = gather_pairs(manifest.train);
  const std::vector<FeasPair> val_pairs = gather_pairs(manifest.val);
  std::vector<const FeasPair*> train_ptrs, val_ptrs;
  for (const auto& p : train_pairs) train_ptrs.push_back(&p);
  for (const auto& p : val_pairs) val_ptrs.push_back(&p);

  FeasTrainer trainer(FeasModel::init(fc, cfg.seed), cfg.adam_options());
  std::cout << "training feasibility net ("
            << trainer.model().params.parameter_count() << " parameters, "
            << train_ptrs.size() << " pairs)\n";

  std::ofstream csv(swap_ext(out, ".csv"));
  csv << "epoch,train_loss,val_loss\n";
  Rng shuffle_rng(cfg.seed ^ 0x66656173ULL);
  for (int epoch = 0; epoch < cfg.feas_epochs; ++epoch) {
    std::vector<const FeasPair*> order = train_ptrs;
    shuffle_rng.shuffle(order);
    double sum = 0.0;
    int steps = 0;
    for (std::size_t i = 0; i < order.size(); i += cfg.feas_batch) {
      const std::vector<const FeasPair*> batch(
          order.begin() + i,
          order.begin() + std::min(order.size(), i + cfg.feas_batch));
      sum += trainer.train_step(batch);
      ++steps;
    }
    const double train_loss = steps ? sum / steps : 0.0;
    const double val_loss = trainer.eval_loss(val_ptrs);
    csv << epoch << "," << train_loss << "," << val_loss << "\n";
    if (epoch % 5 == 0 || epoch == cfg.feas_epochs - 1) {
      std::cout << "epoch " << epoch << ": train " << train_loss << " val "
                << val_loss << "\n";
    }
  }
  trainer.model().save(out);
  std::cout << "saved " << out << "\n";
  return 0;
}

int run_predict(const std::string& dir, const std::string& gnn_path,
                const std::string& feas_path, const std::string& out,
                const std::string& refine, const std::string& split,
                const Config& cfg) {
  const Manifest manifest = load_manifest(dir + "/manifest.json");
  const std::vector<std::string> ids = split_ids(manifest, split);
  const GnnModel gnn = GnnModel::load(gnn_path);
  const FeasModel feas = FeasModel::load(feas_path);

  fs::create_directories(fs::path(out) / "preds");
  fs::create_directories(fs::path(out) / "pseudo");

  PipelineOptions popt;
  popt.config = cfg;
  popt.refine_obb = refine == "obb";

  std::vector<char> kept(ids.size(), 0);
  std::vector<std::string> errors(ids.size());
  parallel_for(static_cast<int>(ids.size()), [&](int i) {
    try {
      ContextOptions copt = cfg.context_options();
      copt.n_points = gnn.config.n_points;
      Shape shape = load_shape(dir + "/shapes/" + ids[i] + ".json");
      const ShapeContext ctx = build_context(std::move(shape), copt);
      const FeasScorer scorer = make_model_scorer(feas);
      const ShapeResult result = run_shape_pipeline(ctx, gnn, scorer, popt);
      save_predictions(prediction_dump(result),
                       (fs::path(out) / "preds" / (ids[i] + ".json")).string());
      if (result.kept) {
        save_predictions(pseudo_labels(result),
                         (fs::path(out) / "pseudo" / (ids[i] + ".json")).string());
        kept[i] = 1;
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& err : errors) {
    if (!err.empty()) throw std::runtime_error(err);
  }
  int n_kept = 0;
  for (char k : kept) n_kept += k;
  std::cout << "kept " << n_kept << "/" << ids.size() << "\n";
  return 0;
}

int run_eval(const std::string& dir, const std::string& pred_dir,
             const std::string& out_prefix, const std::string& split) {
  const Manifest manifest = load_manifest(dir + "/manifest.json");
  const std::vector<std::string> ids = split_ids(manifest, split);

  std::vector<EvalRecord> records;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    const std::string pred_path = pred_dir + "/" + id + ".json";
    if (!fs::exists(pred_path)) {
      missing.push_back(id);
      continue;
    }
    const Shape shape = load_shape(dir + "/shapes/" + id + ".json");
    const AnnotationSet gt = load_annotations(dir + "/annotations/" + id + ".json");
    const PredictionSet preds = load_predictions(pred_path);
    const auto recs = evaluate_shape(shape, gt, preds);
    records.insert(records.end(), recs.begin(), recs.end());
  }

  const Report report = aggregate_report(records);
  std::cout << render_text(report);
  {
    std::ofstream txt(out_prefix + ".txt");
    txt << render_text(report);
    std::ofstream js(out_prefix + ".json");
    js << report_json(report).dump(1) << '\n';
  }
  if (!missing.empty()) {
    std::cerr << "missing predictions for " << missing.size() << " shapes (e.g., "
              << missing.front() << ")\n";
    return 1;
  }
  return 0;
}

int run_export(const std::string& shape_path, const std::string& annot_path,
               const std::string& out, bool with_obb, const Config& cfg) {
  Shape shape = load_shape(shape_path);
  const PredictionSet preds = load_predictions(annot_path);
  if (preds.shape_id != shape.id) {
    throw std::runtime_error("shape/annotation id mismatch: " + shape.id +
                             " vs " + preds.shape_id);
  }
  if (with_obb) {
    for (auto& n : shape.nodes) {
      const auto pts = shape.collect_points(n.id);
      if (pts.size() >= 4) {
        n.obb = compute_obb(pts, shape.up_axis, cfg.obb_options());
      }
    }
    save_shape(shape, swap_ext(out, ".shape.json"), /*with_obb=*/true);
  }
  export_obj(shape, preds, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinemo: kinematic motion prediction for segmented 3D shapes"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags (--seed, --config) work after the subcommand

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (defaults otherwise)");

  // shared overrides
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--seed", seed_flag, "seed override");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  std::vector<std::string> synth_cats = {"door_set", "laptop", "storage_furniture",
                                         "scissors", "bottle"};
  int synth_count = 100;
  std::optional<double> synth_rot;
  std::optional<int> synth_points;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--categories", synth_cats, "category names")->delimiter(',');
  synth->add_option("--count", synth_count, "shapes per category");
  synth->add_option("--rot-aug", synth_rot, "max whole-shape rotation (deg)");
  synth->add_option("--points", synth_points, "points per leaf");

  auto* train_gnn = app.add_subcommand("train-gnn", "train the edge prediction network");
  std::string tg_data, tg_out = "gnn.json", tg_mode = "fine";
  std::optional<int> tg_epochs, tg_batch, tg_points;
  std::optional<double> tg_lr;
  train_gnn->add_option("--data", tg_data, "dataset directory")->required();
  train_gnn->add_option("--out", tg_out, "model output file");
  train_gnn->add_option("--mode", tg_mode, "fine|coarse")
      ->check(CLI::IsMember({"fine", "coarse"}));
  train_gnn->add_option("--epochs", tg_epochs, "training epochs");
  train_gnn->add_option("--batch", tg_batch, "shapes per step");
  train_gnn->add_option("--points", tg_points, "leaf sample size");
  train_gnn->add_option("--lr", tg_lr, "learning rate");

  auto* train_feas = app.add_subcommand("train-feas", "train the axis feasibility network");
  std::string tf_data, tf_out = "feas.json";
  std::optional<int> tf_epochs, tf_nneg, tf_pair_points;
  std::optional<double> tf_lr;
  train_feas->add_option("--data", tf_data, "dataset directory")->required();
  train_feas->add_option("--out", tf_out, "model output file");
  train_feas->add_option("--epochs", tf_epochs, "training epochs");
  train_feas->add_option("--n-neg", tf_nneg, "negatives per positive");
  train_feas->add_option("--pair-points", tf_pair_points, "points per part");
  train_feas->add_option("--lr", tf_lr, "learning rate");

  auto* predict = app.add_subcommand("predict", "predict, refine, and filter pseudo labels");
  std::string pr_data, pr_gnn, pr_feas, pr_out, pr_refine = "obb", pr_split = "test";
  std::optional<double> pr_tau;
  predict->add_option("--data", pr_data, "dataset directory")->required();
  predict->add_option("--gnn", pr_gnn, "trained gnn model")->required();
  predict->add_option("--feas", pr_feas, "trained feasibility model")->required();
  predict->add_option("--out", pr_out, "output directory")->required();
  predict->add_option("--refine", pr_refine, "obb|none")
      ->check(CLI::IsMember({"obb", "none"}));
  predict->add_option("--split", pr_split, "train|val|test|all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  predict->add_option("--tau", pr_tau, "pseudo-label score threshold");

  auto* eval = app.add_subcommand("eval", "evaluate predictions against GT");
  std::string ev_data, ev_pred, ev_out = "report", ev_split = "test";
  eval->add_option("--data", ev_data, "dataset directory")->required();
  eval->add_option("--pred", ev_pred, "directory of prediction files")->required();
  eval->add_option("--out", ev_out, "report path prefix");
  eval->add_option("--split", ev_split, "train|val|test|all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  auto* exp = app.add_subcommand("export", "export a shape + axes to OBJ");
  std::string ex_shape, ex_annot, ex_out;
  bool ex_with_obb = false;
  exp->add_option("--shape", ex_shape, "shape JSON")->required();
  exp->add_option("--annot", ex_annot, "annotation/prediction JSON")->required();
  exp->add_option("--out", ex_out, "output .obj path")->required();
  exp->add_flag("--with-obb", ex_with_obb, "also write the shape JSON with OBBs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    Config cfg = config_path.empty() ? Config{} : Config::from_file(config_path);
    if (seed_flag) cfg.seed = *seed_flag;

    if (synth->parsed()) {
      if (synth_rot) cfg.rot_aug_deg = *synth_rot;
      if (synth_points) cfg.synth_points = *synth_points;
      return run_synth(synth_out, synth_cats, synth_count, cfg);
    }
    if (train_gnn->parsed()) {
      if (tg_epochs) cfg.epochs = *tg_epochs;
      if (tg_batch) cfg.batch_size = *tg_batch;
      if (tg_points) cfg.n_points = *tg_points;
      if (tg_lr) cfg.lr = *tg_lr;
      const TypeMode mode = tg_mode == "coarse" ? TypeMode::Coarse : TypeMode::Fine;
      return run_train_gnn(tg_data, tg_out, mode, cfg);
    }
    if (train_feas->parsed()) {
      if (tf_epochs) cfg.feas_epochs = *tf_epochs;
      if (tf_nneg) cfg.n_neg = *tf_nneg;
      if (tf_pair_points) cfg.pair_points = *tf_pair_points;
      if (tf_lr) cfg.lr = *tf_lr;
      return run_train_feas(tf_data, tf_out, cfg);
    }
    if (predict->parsed()) {
      if (pr_tau) cfg.tau = *pr_tau;
      return run_predict(pr_data, pr_gnn, pr_feas, pr_out, pr_refine, pr_split, cfg);
    }
    if (eval->parsed()) {
      return run_eval(ev_data, ev_pred, ev_out, ev_split);
    }
    if (exp->parsed()) {
      return run_export(ex_shape, ex_annot, ex_out, ex_with_obb, cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
