#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "kinemo/graphnet.hpp"

namespace kinemo {

struct FeasConfig {
  int pair_points = 512;  // points per part (movable and reference)
  int enc_hidden = 64;
  int enc_out = 128;
  int head_hidden = 64;
  // training-pair generation
  double rev_amount_lo = 0.2, rev_amount_hi = 1.2;  // radians
  double pri_amount_lo = 0.1, pri_amount_hi = 0.4;  // shape units
  int amounts_per_edge = 2;
  int n_neg = 4;
  // negative distinctness vs the GT axis
  double neg_min_dist = 0.05;
  double neg_min_angle_deg = 10.0;
  // inference-time motion amounts
  double infer_rev_amount = 0.6;
  double infer_pri_amount = 0.25;

  nlohmann::json to_json() const;
  static FeasConfig from_json(const nlohmann::json& j);
};

struct FeasModel {
  FeasConfig config;
  ParamStore params;

  static FeasModel init(const FeasConfig& config, std::uint64_t seed);
  void save(const std::string& path) const;
  static FeasModel load(const std::string& path);
};

/// Original/transformed cloud pair in the axis-anchored canonical frame.
/// Rows: movable points first, then reference points; columns: xyz plus the
/// movable/reference one-hot flag.
struct MotionPairInput {
  ad::Tensor original;     // (2 * pair_points) x 5
  ad::Tensor transformed;  // same layout; only movable rows differ
};

/// Builds the network input for one candidate motion: deterministic
/// subsampling, the rigid motion applied to the movable part, and both
/// clouds re-expressed in a frame anchored at the candidate axis (origin:
/// closest point of the axis to the movable centroid; z along the axis).
/// The frame makes the score invariant under joint rigid transforms.
MotionPairInput make_pair_input(const std::vector<Vec3>& movable,
                                const std::vector<Vec3>& reference,
                                const Line& axis, MotionType mtype,
                                double amount, std::uint64_t seed,
                                int pair_points);

/// Shared-encoder embedding of one cloud (exposed for the weight-sharing
/// tests).
std::vector<double> feas_encode_cloud(const ad::Tensor& cloud,
                                      const FeasModel& model);

double feasibility_score(const MotionPairInput& pair, const FeasModel& model);

/// Tape-level logit (pre-sigmoid) for training.
ad::Tape::Id feas_logit_tape(ad::Tape& tape, const MotionPairInput& pair,
                             const FeasConfig& config, const ParamStore& params,
                             ParamStore* grads);

struct FeasPair {
  MotionPairInput input;
  double label = 0.0;  // 1 for the GT motion, 0 for a wrong-axis motion
};

/// Positives from the GT motion at random amounts; negatives from distinct
/// OBB edges of the movable part at the same amounts.
std::vector<FeasPair> gen_training_pairs(const ShapeContext& ctx,
                                         const AnnotationSet& gt,
                                         int n_neg, std::uint64_t seed,
                                         const FeasConfig& config);

/// -[y log s + (1-y) log(1-s)]
double loss_bce(double score, double label);

class FeasTrainer {
 public:
  FeasTrainer(FeasModel model, AdamOptions opt);

  double train_step(const std::vector<const FeasPair*>& batch);
  double eval_loss(const std::vector<const FeasPair*>& pairs) const;

  const FeasModel& model() const { return model_; }
  FeasModel& model() { return model_; }

 private:
  FeasModel model_;
  AdamState adam_;
  AdamOptions opt_;
};

}  // namespace kinemo
