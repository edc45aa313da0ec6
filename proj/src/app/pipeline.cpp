#include "kinemo/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "kinemo/io.hpp"

namespace kinemo {

ShapeResult run_shape_pipeline(const ShapeContext& ctx, const GnnModel& gnn,
                               const FeasScorer& scorer,
                               const PipelineOptions& opt) {
  ShapeResult result;
  result.shape_id = ctx.shape.id;
  result.category = ctx.shape.category;
  result.mode = gnn.config.mode;
  result.raw = gnn_forward(ctx, gnn);
  result.edges = edges_from_predictions(ctx, result.raw, result.mode);

  MobilityTree tree = extract_mobility_tree(ctx, result.edges, result.mode);
  tree = merge_fixed_siblings(tree, ctx, result.edges, result.mode,
                              opt.config.merge_by_points ? MergeVolume::PointCount
                                                         : MergeVolume::Obb);

  const SelectOptions sel = opt.config.select_options();
  const ScoreWeights& w = sel.weights;
  for (auto& node : tree.nodes) {
    std::vector<Vec3> movable;
    for (const auto& part : node.parts) {
      const auto& pts = ctx.part_points.at(part);
      movable.insert(movable.end(), pts.begin(), pts.end());
    }
    const auto& reference = ctx.part_points.at(node.reference);
    if (movable.empty() || reference.empty()) continue;

    const OBB obb = node.parts.size() == 1
                        ? ctx.obbs.at(node.parts.front())
                        : compute_obb(movable, ctx.shape.up_axis,
                                      opt.config.obb_options());

    const bool prismatic = node.coarse ? *node.coarse == CoarseType::P
                                       : is_prismatic(node.params.mtype);
    if (opt.refine_obb) {
      const SelectResult res =
          select_axis(movable, reference, obb, node.params, node.coarse,
                      ctx.shape.up_axis, scorer, sel);
      node.params.dir = res.refined.dir;
      node.params.pos = res.refined.pos;
      node.score = res.score;
      node.s_f = res.s_f;
      node.s_d = res.s_d;
      node.s_p = res.s_p;
      node.candidate_source = res.candidate_source;
    } else {
      // raw network axis: consistency with itself is exact, so the score
      // reduces to the feasibility term plus the full consistency weights
      Vec3 centroid{0, 0, 0};
      for (const auto& p : movable) centroid += p;
      centroid = centroid / static_cast<double>(movable.size());
      Line raw;
      raw.dir = node.params.dir->normalized();
      raw.point = node.params.pos ? *node.params.pos : centroid;
      const MotionType motion_type =
          node.coarse ? (prismatic ? MotionType::P_H : MotionType::R_H_S)
                      : node.params.mtype;
      const double amount = prismatic ? sel.infer_pri_amount : sel.infer_rev_amount;
      const auto pair = make_pair_input(movable, reference, raw, motion_type,
                                        amount, sel.seed, sel.pair_points);
      node.s_f = scorer(pair);
      node.s_d = 1.0;
      node.s_p = prismatic ? 0.0 : 1.0;
      node.score = prismatic ? (w.w_f * node.s_f + w.w_d) / (w.w_f + w.w_d)
                             : combined_score(node.s_f, 1.0, 1.0, w);
      node.candidate_source = "raw";
    }
  }

  if (opt.config.filter_per_node) {
    result.tree = filter_nodes(tree, opt.config.tau);
    result.kept = !result.tree.nodes.empty();
  } else {
    result.tree = std::move(tree);
    result.kept = keep_shape(result.tree, opt.config.tau);
  }
  return result;
}

namespace {

PredEdge base_pred_edge(const SiblingEdge& e, const EdgePrediction& raw,
                        TypeMode mode) {
  PredEdge out;
  out.src = e.src;
  out.ref = e.ref;
  if (mode == TypeMode::Fine) {
    out.type_fine = e.pred->mtype;
  } else {
    out.type_coarse = e.pred_coarse;
  }
  // raw head outputs for every edge keep the metrics unbiased: an edge whose
  // type was missed still contributes its axis errors
  out.dir = raw.dir;
  out.pos = raw.pos;
  return out;
}

void apply_node_fields(PredEdge& pe, const MobilityNode& node) {
  if (node.params.dir) pe.dir = node.params.dir;
  if (node.params.pos) pe.pos = node.params.pos;
  pe.score = node.score;
  pe.s_f = node.s_f;
  pe.s_d = node.s_d;
  pe.s_p = node.s_p;
  pe.candidate_source = node.candidate_source;
}

}  // namespace

PredictionSet prediction_dump(const ShapeResult& result) {
  PredictionSet set;
  set.shape_id = result.shape_id;
  for (std::size_t i = 0; i < result.edges.size(); ++i) {
    set.edges.push_back(base_pred_edge(result.edges[i], result.raw[i], result.mode));
  }
  // the scored (possibly refined) axis replaces the primary edge's output
  for (const auto& node : result.tree.nodes) {
    for (auto& pe : set.edges) {
      if (pe.src == node.primary && pe.ref == node.reference) {
        apply_node_fields(pe, node);
      }
    }
  }
  return set;
}

PredictionSet pseudo_labels(const ShapeResult& result) {
  PredictionSet set;
  set.shape_id = result.shape_id;
  for (const auto& node : result.tree.nodes) {
    for (const auto& part : node.parts) {
      PredEdge pe;
      pe.src = part;
      pe.ref = node.reference;
      if (result.mode == TypeMode::Fine) {
        pe.type_fine = node.params.mtype;
      } else {
        pe.type_coarse = node.coarse;
      }
      if (node.params.dir) pe.dir = node.params.dir;
      if (node.params.pos) pe.pos = node.params.pos;
      pe.score = node.score;
      pe.s_f = node.s_f;
      pe.s_d = node.s_d;
      pe.s_p = node.s_p;
      pe.candidate_source = node.candidate_source;
      set.edges.push_back(std::move(pe));
    }
  }
  return set;
}

void export_obj(const Shape& shape, const PredictionSet& preds,
                const std::string& path) {
  const std::string mtl_path =
      path.size() > 4 && path.substr(path.size() - 4) == ".obj"
          ? path.substr(0, path.size() - 4) + ".mtl"
          : path + ".mtl";
  const std::string mtl_name = mtl_path.find('/') == std::string::npos
                                   ? mtl_path
                                   : mtl_path.substr(mtl_path.rfind('/') + 1);

  std::ofstream mtl(mtl_path);
  if (!mtl) throw IoError("cannot open " + mtl_path + " for writing");
  int part_index = 0;
  for (const auto& n : shape.nodes) {
    if (n.points.empty()) continue;
    // golden-angle hue walk keeps adjacent parts distinguishable
    const double hue = std::fmod(0.618033988749895 * part_index++, 1.0);
    const double r = 0.5 + 0.5 * std::cos(2 * kPi * hue);
    const double g = 0.5 + 0.5 * std::cos(2 * kPi * (hue + 1.0 / 3));
    const double b = 0.5 + 0.5 * std::cos(2 * kPi * (hue + 2.0 / 3));
    mtl << "newmtl part_" << n.id << "\nKd " << r << " " << g << " " << b << "\n";
  }
  mtl << "newmtl axis\nKd 1.0 0.1 0.1\n";

  std::ofstream obj(path);
  if (!obj) throw IoError("cannot open " + path + " for writing");
  obj << "mtllib " << mtl_name << "\n";
  int vertex = 1;
  for (const auto& n : shape.nodes) {
    if (n.points.empty()) continue;
    obj << "o part_" << n.id << "\nusemtl part_" << n.id << "\n";
    for (const auto& p : n.points) {
      obj << "v " << p.x << " " << p.y << " " << p.z << "\n";
    }
    // point elements so bare-vertex clouds render in common viewers
    obj << "p";
    for (std::size_t i = 0; i < n.points.size(); ++i) obj << " " << vertex + i;
    obj << "\n";
    vertex += static_cast<int>(n.points.size());
  }

  int axis_index = 0;
  for (const auto& e : preds.edges) {
    if (!e.dir) continue;
    const bool mobile = e.type_fine ? is_mobile(*e.type_fine)
                                    : (e.type_coarse && is_mobile(*e.type_coarse));
    if (!mobile) continue;
    Vec3 anchor;
    if (e.pos) {
      anchor = *e.pos;
    } else {
      // prismatic: anchor the drawn axis at the moving part's centroid
      const PartNode* part = shape.find(e.src);
      if (!part) continue;
      std::vector<Vec3> pts = shape.collect_points(e.src);
      if (pts.empty()) continue;
      anchor = {0, 0, 0};
      for (const auto& p : pts) anchor += p;
      anchor = anchor / static_cast<double>(pts.size());
    }
    const Vec3 d = e.dir->normalized();
    const Vec3 a = anchor - d * 0.6;
    const Vec3 b = anchor + d * 0.6;
    obj << "o axis_" << axis_index++ << "_" << e.src << "\nusemtl axis\n";
    obj << "v " << a.x << " " << a.y << " " << a.z << "\n";
    obj << "v " << b.x << " " << b.y << " " << b.z << "\n";
    obj << "l " << vertex << " " << vertex + 1 << "\n";
    vertex += 2;
  }
}

}  // namespace kinemo
