#include "kinemo/refine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace kinemo {

bool pred_is_mobile(const SiblingEdge& e, TypeMode mode) {
  if (mode == TypeMode::Coarse) {
    return e.pred_coarse && is_mobile(*e.pred_coarse);
  }
  return e.pred && is_mobile(e.pred->mtype);
}

namespace {

int pred_class(const SiblingEdge& e, TypeMode mode) {
  return mode == TypeMode::Coarse ? static_cast<int>(*e.pred_coarse)
                                  : static_cast<int>(e.pred->mtype);
}

}  // namespace

MobilityTree extract_mobility_tree(const ShapeContext& ctx,
                                   const std::vector<SiblingEdge>& preds,
                                   TypeMode mode) {
  MobilityTree tree;
  tree.shape_id = ctx.shape.id;
  // best mobile edge per src part
  std::map<std::string, const SiblingEdge*> best;
  for (const auto& e : preds) {
    if (!pred_is_mobile(e, mode)) continue;
    auto it = best.find(e.src);
    if (it == best.end()) {
      best.emplace(e.src, &e);
      continue;
    }
    const double p_new = e.pred_type_prob.value_or(0.0);
    const double p_old = it->second->pred_type_prob.value_or(0.0);
    if (p_new > p_old ||
        (p_new == p_old && pred_class(e, mode) < pred_class(*it->second, mode))) {
      it->second = &e;
    }
  }
  for (const auto& [src, e] : best) {
    MobilityNode node;
    node.parts = {src};
    node.primary = src;
    node.reference = e->ref;
    node.params = *e->pred;
    node.coarse = e->pred_coarse;
    node.type_prob = e->pred_type_prob.value_or(0.0);
    tree.nodes.push_back(std::move(node));
  }
  return tree;
}

namespace {

double node_volume(const MobilityNode& node, const ShapeContext& ctx,
                   MergeVolume mode) {
  double vol = 0.0;
  for (const auto& part : node.parts) {
    if (mode == MergeVolume::Obb) {
      auto it = ctx.obbs.find(part);
      if (it != ctx.obbs.end()) vol += it->second.volume();
    } else {
      auto it = ctx.part_points.find(part);
      if (it != ctx.part_points.end()) vol += static_cast<double>(it->second.size());
    }
  }
  return vol;
}

}  // namespace

MobilityTree merge_fixed_siblings(const MobilityTree& tree,
                                  const ShapeContext& ctx,
                                  const std::vector<SiblingEdge>& preds,
                                  TypeMode mode, MergeVolume volume) {
  // Fixed-predicted directed edges (either direction can justify a merge)
  std::set<std::pair<std::string, std::string>> fixed_edges;
  for (const auto& e : preds) {
    const bool is_fixed = mode == TypeMode::Coarse
                              ? (e.pred_coarse && *e.pred_coarse == CoarseType::Fixed)
                              : (e.pred && e.pred->mtype == MotionType::Fixed);
    if (is_fixed) fixed_edges.emplace(e.src, e.ref);
  }

  MobilityTree out = tree;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < out.nodes.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < out.nodes.size() && !changed; ++j) {
        if (out.nodes[i].reference != out.nodes[j].reference) continue;
        bool connected = false;
        for (const auto& a : out.nodes[i].parts) {
          for (const auto& b : out.nodes[j].parts) {
            if (fixed_edges.count({a, b}) || fixed_edges.count({b, a})) {
              connected = true;
              break;
            }
          }
          if (connected) break;
        }
        if (!connected) continue;
        const double vi = node_volume(out.nodes[i], ctx, volume);
        const double vj = node_volume(out.nodes[j], ctx, volume);
        MobilityNode merged = vi >= vj ? out.nodes[i] : out.nodes[j];
        const MobilityNode& other = vi >= vj ? out.nodes[j] : out.nodes[i];
        merged.parts.insert(merged.parts.end(), other.parts.begin(),
                            other.parts.end());
        out.nodes[i] = std::move(merged);
        out.nodes.erase(out.nodes.begin() + static_cast<long>(j));
        changed = true;
      }
    }
  }
  return out;
}

double direction_consistency(const Vec3& pred_dir, const Vec3& cand_dir) {
  const double pn = pred_dir.norm(), cn = cand_dir.norm();
  if (pn < 1e-12 || cn < 1e-12) {
    throw std::invalid_argument("direction_consistency: zero vector");
  }
  return std::min(1.0, std::fabs(pred_dir.dot(cand_dir)) / (pn * cn));
}

double position_consistency(const Line& pred, const Line& cand, double scale) {
  if (scale <= 0) throw std::invalid_argument("position_consistency: scale");
  const double d = point_to_line_distance(cand.point, pred);
  return 1.0 - std::min(1.0, std::max(0.0, d / scale));
}

double combined_score(double s_f, double s_d, double s_p, const ScoreWeights& w) {
  return w.w_f * s_f + w.w_d * s_d + w.w_p * s_p;
}

FeasScorer make_model_scorer(const FeasModel& model) {
  return [&model](const MotionPairInput& pair) {
    return feasibility_score(pair, model);
  };
}

SelectResult select_axis(const std::vector<Vec3>& movable,
                         const std::vector<Vec3>& reference,
                         const OBB& movable_obb, const MotionParams& pred,
                         const std::optional<CoarseType>& coarse,
                         const Vec3& up, const FeasScorer& scorer,
                         const SelectOptions& opt) {
  if (!pred.dir) throw std::invalid_argument("select_axis: prediction has no dir");
  const bool coarse_mode = coarse.has_value();
  const bool prismatic_pred =
      coarse_mode ? *coarse == CoarseType::P : is_prismatic(pred.mtype);
  if (coarse_mode ? !is_mobile(*coarse) : !is_mobile(pred.mtype)) {
    throw std::invalid_argument("select_axis: immobile prediction");
  }

  const auto interaction =
      interaction_region(movable, reference, opt.interaction_delta);
  const auto pool = obb_candidate_axes(movable_obb);
  std::vector<CandidateAxis> candidates =
      coarse_mode
          ? filter_candidates_coarse(pool, *coarse, movable_obb, interaction)
          : filter_candidates_by_type(pool, pred.mtype, movable_obb, interaction, up);
  if (candidates.empty()) {
    throw std::logic_error("select_axis: no candidates for a mobile type");
  }

  Vec3 centroid{0, 0, 0};
  for (const auto& p : movable) centroid += p;
  centroid = centroid / static_cast<double>(movable.size());

  Line pred_line;
  pred_line.dir = pred.dir->normalized();
  pred_line.point = pred.pos ? *pred.pos : centroid;

  // the feasibility net sees the motion the candidate implies
  const MotionType motion_type =
      coarse_mode ? (prismatic_pred ? MotionType::P_H : MotionType::R_H_S)
                  : pred.mtype;
  const double amount =
      prismatic_pred ? opt.infer_pri_amount : opt.infer_rev_amount;

  const double wp_sum = opt.weights.w_f + opt.weights.w_d;
  int best = -1;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    CandidateAxis& c = candidates[i];
    c.s_d = direction_consistency(pred_line.dir, c.line.dir);
    const auto pair = make_pair_input(movable, reference, c.line, motion_type,
                                      amount, opt.seed, opt.pair_points);
    c.s_f = scorer(pair);
    if (prismatic_pred) {
      c.s_p = 0.0;
      c.s = (opt.weights.w_f * c.s_f + opt.weights.w_d * c.s_d) / wp_sum;
    } else {
      c.s_p = position_consistency(pred_line, c.line, opt.pos_scale);
      c.s = combined_score(c.s_f, c.s_d, c.s_p, opt.weights);
    }
    if (best < 0 || c.s > candidates[best].s ||
        (c.s == candidates[best].s && c.s_f > candidates[best].s_f)) {
      best = static_cast<int>(i);
    }
  }

  const CandidateAxis& win = candidates[best];
  SelectResult result;
  result.refined.mtype = pred.mtype;
  result.refined.dir = canonicalize_dir(win.line.dir.normalized(), up);
  if (!prismatic_pred) result.refined.pos = win.line.point;
  result.score = win.s;
  result.s_f = win.s_f;
  result.s_d = win.s_d;
  result.s_p = win.s_p;
  result.candidate_source = win.source.to_string();
  result.candidates = std::move(candidates);
  return result;
}

bool keep_shape(const MobilityTree& tree, double tau) {
  if (tree.nodes.empty()) return false;
  for (const auto& n : tree.nodes) {
    if (!(n.score > tau)) return false;  // strictly greater per the threshold
  }
  return true;
}

std::vector<std::size_t> filter_pseudo_labels(const std::vector<MobilityTree>& trees,
                                              double tau) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    if (keep_shape(trees[i], tau)) kept.push_back(i);
  }
  return kept;
}

MobilityTree filter_nodes(const MobilityTree& tree, double tau) {
  MobilityTree out;
  out.shape_id = tree.shape_id;
  for (const auto& n : tree.nodes) {
    if (n.score > tau) out.nodes.push_back(n);
  }
  return out;
}

}  // namespace kinemo
