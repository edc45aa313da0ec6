#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinemo/geometry.hpp"
#include "kinemo/model_io.hpp"
#include "kinemo/shape.hpp"
#include "kinemo/tape.hpp"

namespace kinemo {

enum class TypeMode { Fine, Coarse };

struct GnnConfig {
  int feature_dim = 64;   // node feature width F
  int edge_feat_dim = 16;  // relative-OBB edge feature width E
  int rounds = 3;          // message passing rounds K
  int point_hidden = 32;   // per-point encoder hidden width
  int head_hidden = 64;
  int n_points = 1024;     // leaf sample size
  TypeMode mode = TypeMode::Fine;
  bool dir_loss_squared = true;  // Eq. 3 read as squared norm; flag for ablation
  double dir_eps = 1e-8;
  double w_cls = 1.0, w_dir = 1.0, w_pos = 1.0;

  int num_classes() const {
    return mode == TypeMode::Fine ? kNumMotionTypes : kNumCoarseTypes;
  }
  nlohmann::json to_json() const;
  static GnnConfig from_json(const nlohmann::json& j);
};

struct GnnModel {
  GnnConfig config;
  ParamStore params;

  static GnnModel init(const GnnConfig& config, std::uint64_t seed);
  void save(const std::string& path) const;
  static GnnModel load(const std::string& path);
};

/// Class index of a ground-truth type under the active taxonomy.
int class_index(MotionType t, TypeMode mode);

/// Deterministic fixed-size sample of a leaf's points: farthest-point
/// subsampling when the cloud is larger than n, full cycles plus random
/// fill-up when smaller.
std::vector<Vec3> sample_points_fixed(const std::vector<Vec3>& points, int n,
                                      std::uint64_t seed);
std::vector<Vec3> sample_leaf_points(const PartNode& node, int n,
                                     std::uint64_t seed);

struct SiblingGraph {
  struct Edge {
    std::string src, ref;
    std::vector<double> feat;
  };
  std::vector<Edge> edges;  // both orientations of every adjacent pair
};

/// Relative-OBB edge feature (16 dims): world center offset, the offset in
/// the reference and movable box frames, extent log-ratios, per-axis best
/// alignment cosines, and the min point distance between the parts.
std::vector<double> edge_feature(const OBB& src, const OBB& ref,
                                 double min_dist);

SiblingGraph build_sibling_graph(const Shape& shape,
                                 const std::vector<AdjacentPair>& adjacency,
                                 const std::map<std::string, OBB>& obbs);

struct ContextOptions {
  double adjacency_eps = 0.02;
  int n_points = 1024;
  std::uint64_t seed = 0;
  ObbOptions obb;
};

/// Everything the networks and refinement need about one shape, computed
/// once: per-part point unions, OBBs, adjacency, the sibling graph with edge
/// features, and sampled leaf clouds.
struct ShapeContext {
  Shape shape;
  std::map<std::string, std::vector<Vec3>> part_points;
  std::map<std::string, OBB> obbs;
  std::vector<AdjacentPair> adjacency;
  SiblingGraph graph;
  std::map<std::string, ad::Tensor> leaf_samples;  // n x 3 per leaf
};

ShapeContext build_context(Shape shape, const ContextOptions& opt);

/// Value-level per-edge outputs.
struct EdgePrediction {
  std::vector<double> logits;
  std::vector<double> type_probs;
  Vec3 dir;  // unit
  Vec3 pos;

  int argmax() const;  // ties broken toward the lowest class index
};

struct EdgeOutputIds {
  ad::Tape::Id logits, probs, dir, pos;
};

/// Tape-level forward pass over the whole sibling graph: hierarchy encoding,
/// K message rounds, and the three heads per directed edge (in graph edge
/// order). `grads` enables parameter gradients.
std::vector<EdgeOutputIds> gnn_forward_tape(ad::Tape& tape,
                                            const ShapeContext& ctx,
                                            const GnnConfig& config,
                                            const ParamStore& params,
                                            ParamStore* grads);

std::vector<EdgePrediction> gnn_forward(const ShapeContext& ctx,
                                        const GnnModel& model);

/// Predictions as sibling edges (pred filled; logits/coarse per mode).
std::vector<SiblingEdge> predict_edges(const ShapeContext& ctx,
                                       const GnnModel& model);
std::vector<SiblingEdge> edges_from_predictions(
    const ShapeContext& ctx, const std::vector<EdgePrediction>& preds,
    TypeMode mode);

// Loss formulas (Eqs. 1-4), value level. The in-tape versions used for
// training are separate; tests pin both to the same numbers.
double loss_cls(const std::vector<double>& type_probs, int gt_index);
double loss_dir(const Vec3& d, const Vec3& d_hat, bool squared = true);
double loss_pos(const Vec3& p, const Vec3& p_hat, const Vec3& d_hat);
/// Sum with the type-dependent masks: dir/pos only for mobile ground truth,
/// pos dropped for prismatic. GT dir is sign-canonicalized against `up`.
double total_loss(const EdgePrediction& pred, const MotionParams& gt,
                  const GnnConfig& config, const Vec3& up);

struct TrainSample {
  ShapeContext ctx;
  struct Target {
    int class_idx;
    std::optional<Vec3> dir;  // canonicalized
    std::optional<Vec3> pos;
  };
  std::vector<std::optional<Target>> targets;  // parallel to ctx.graph.edges
};

/// Pairs graph edges with their annotations (matched by src/ref ids).
TrainSample make_train_sample(ShapeContext ctx, const AnnotationSet& gt,
                              const GnnConfig& config);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamStore m, v;
  long t = 0;

  static AdamState init(const ParamStore& params);
  void update(ParamStore& params, const ParamStore& grads, const AdamOptions& opt);
};

class GnnTrainer {
 public:
  GnnTrainer(GnnModel model, AdamOptions opt);

  /// One optimization step over a batch; returns the mean per-edge loss.
  /// Throws on non-finite loss, naming the offending shape.
  double train_step(const std::vector<const TrainSample*>& batch);
  /// Forward-only mean loss (validation).
  double eval_loss(const std::vector<const TrainSample*>& samples) const;

  const GnnModel& model() const { return model_; }
  GnnModel& model() { return model_; }
  AdamOptions& options() { return opt_; }

 private:
  GnnModel model_;
  AdamState adam_;
  AdamOptions opt_;
};

}  // namespace kinemo
