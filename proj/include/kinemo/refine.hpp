#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kinemo/feasnet.hpp"
#include "kinemo/graphnet.hpp"

namespace kinemo {

struct ScoreWeights {
  double w_f = 0.5, w_d = 0.3, w_p = 0.2;
};

/// One movable group of the pruned hierarchy: parts move together relative
/// to the reference part.
struct MobilityNode {
  std::vector<std::string> parts;
  std::string reference;
  std::string primary;  // part whose prediction the group carries
  MotionParams params;
  std::optional<CoarseType> coarse;  // coarse-mode class of the primary edge
  double type_prob = 0.0;
  double score = 0.0, s_f = 0.0, s_d = 0.0, s_p = 0.0;
  std::string candidate_source;
};

struct MobilityTree {
  std::string shape_id;
  std::vector<MobilityNode> nodes;
};

bool pred_is_mobile(const SiblingEdge& e, TypeMode mode);

/// Prunes immobile edges: every mobile directed edge makes its src a movable
/// node referencing ref; a part appearing as src in several mobile edges
/// keeps the one with the highest type probability (ties: lowest class
/// index, then edge order).
MobilityTree extract_mobility_tree(const ShapeContext& ctx,
                                   const std::vector<SiblingEdge>& preds,
                                   TypeMode mode);

enum class MergeVolume { Obb, PointCount };

/// Merges movable nodes connected by a Fixed-predicted edge when they share
/// the same reference part; the merged node takes the motion parameters of
/// the larger side (OBB volume by default). Runs to a fixpoint.
MobilityTree merge_fixed_siblings(const MobilityTree& tree,
                                  const ShapeContext& ctx,
                                  const std::vector<SiblingEdge>& preds,
                                  TypeMode mode,
                                  MergeVolume volume = MergeVolume::Obb);

/// |cos| between the predicted and candidate directions, in [0, 1].
double direction_consistency(const Vec3& pred_dir, const Vec3& cand_dir);

/// 1 - clamp(distance(candidate pivot, predicted axis) / scale, 0, 1).
double position_consistency(const Line& pred, const Line& cand, double scale);

double combined_score(double s_f, double s_d, double s_p, const ScoreWeights& w);

/// Feasibility scorer abstraction; the oracle tests swap in their own.
using FeasScorer = std::function<double(const MotionPairInput&)>;
FeasScorer make_model_scorer(const FeasModel& model);

struct SelectOptions {
  ScoreWeights weights;
  double interaction_delta = 0.03;
  double infer_rev_amount = 0.6;
  double infer_pri_amount = 0.25;
  int pair_points = 512;
  double pos_scale = 1.7320508075688772;  // unit-cube diagonal
  std::uint64_t seed = 0;
};

struct SelectResult {
  MotionParams refined;
  double score = 0.0, s_f = 0.0, s_d = 0.0, s_p = 0.0;
  std::string candidate_source;
  std::vector<CandidateAxis> candidates;  // all scored candidates
};

/// Scores every type-compatible OBB candidate axis (feasibility + the two
/// consistency terms) and returns the argmax. For prismatic predictions the
/// pivot term is dropped and the remaining weights renormalized. Ties break
/// toward higher feasibility, then enumeration order.
SelectResult select_axis(const std::vector<Vec3>& movable,
                         const std::vector<Vec3>& reference,
                         const OBB& movable_obb, const MotionParams& pred,
                         const std::optional<CoarseType>& coarse,
                         const Vec3& up, const FeasScorer& scorer,
                         const SelectOptions& opt);

/// Shape-level filter: kept iff the tree has at least one movable node and
/// every node's score is strictly greater than tau.
bool keep_shape(const MobilityTree& tree, double tau);
std::vector<std::size_t> filter_pseudo_labels(const std::vector<MobilityTree>& trees,
                                              double tau);
/// Per-node variant (config alternative): drops only the failing nodes.
MobilityTree filter_nodes(const MobilityTree& tree, double tau);

}  // namespace kinemo
