#include "kinemo/feasnet.hpp"

#include <cmath>
#include <stdexcept>

#include "kinemo/rng.hpp"

namespace kinemo {

using ad::Tape;
using ad::Tensor;
using nlohmann::json;

json FeasConfig::to_json() const {
  return json{{"pair_points", pair_points},
              {"enc_hidden", enc_hidden},
              {"enc_out", enc_out},
              {"head_hidden", head_hidden},
              {"rev_amount_lo", rev_amount_lo},
              {"rev_amount_hi", rev_amount_hi},
              {"pri_amount_lo", pri_amount_lo},
              {"pri_amount_hi", pri_amount_hi},
              {"amounts_per_edge", amounts_per_edge},
              {"n_neg", n_neg},
              {"neg_min_dist", neg_min_dist},
              {"neg_min_angle_deg", neg_min_angle_deg},
              {"infer_rev_amount", infer_rev_amount},
              {"infer_pri_amount", infer_pri_amount}};
}

FeasConfig FeasConfig::from_json(const json& j) {
  FeasConfig c;
  c.pair_points = j.value("pair_points", c.pair_points);
  c.enc_hidden = j.value("enc_hidden", c.enc_hidden);
  c.enc_out = j.value("enc_out", c.enc_out);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.rev_amount_lo = j.value("rev_amount_lo", c.rev_amount_lo);
  c.rev_amount_hi = j.value("rev_amount_hi", c.rev_amount_hi);
  c.pri_amount_lo = j.value("pri_amount_lo", c.pri_amount_lo);
  c.pri_amount_hi = j.value("pri_amount_hi", c.pri_amount_hi);
  c.amounts_per_edge = j.value("amounts_per_edge", c.amounts_per_edge);
  c.n_neg = j.value("n_neg", c.n_neg);
  c.neg_min_dist = j.value("neg_min_dist", c.neg_min_dist);
  c.neg_min_angle_deg = j.value("neg_min_angle_deg", c.neg_min_angle_deg);
  c.infer_rev_amount = j.value("infer_rev_amount", c.infer_rev_amount);
  c.infer_pri_amount = j.value("infer_pri_amount", c.infer_pri_amount);
  return c;
}

FeasModel FeasModel::init(const FeasConfig& config, std::uint64_t seed) {
  FeasModel model;
  model.config = config;
  auto& ts = model.params.tensors;
  ts.emplace("enc1.W", Tensor(config.enc_hidden, 5));
  ts.emplace("enc1.b", Tensor(1, config.enc_hidden));
  ts.emplace("enc2.W", Tensor(config.enc_out, config.enc_hidden));
  ts.emplace("enc2.b", Tensor(1, config.enc_out));
  ts.emplace("head1.W", Tensor(config.head_hidden, 2 * config.enc_out));
  ts.emplace("head1.b", Tensor(1, config.head_hidden));
  ts.emplace("head2.W", Tensor(1, config.head_hidden));
  ts.emplace("head2.b", Tensor(1, 1));
  Rng rng(seed);
  for (auto& [name, t] : ts) {
    if (name.size() > 2 && name.substr(name.size() - 2) == ".b") continue;
    const double limit = std::sqrt(6.0 / (t.rows + t.cols));
    for (double& v : t.v) v = rng.uniform(-limit, limit);
  }
  return model;
}

void FeasModel::save(const std::string& path) const {
  save_model(path, config.to_json(), params);
}

FeasModel FeasModel::load(const std::string& path) {
  LoadedModel m = load_model(path);
  FeasModel model;
  model.config = FeasConfig::from_json(m.config);
  model.params = std::move(m.params);
  return model;
}

namespace {

/// Orthonormal frame anchored on the candidate axis. x points from the axis
/// toward the movable centroid so the frame follows the geometry rigidly.
struct AxisFrame {
  Vec3 origin, x, y, z;

  Vec3 to_frame(const Vec3& p) const {
    const Vec3 d = p - origin;
    return {d.dot(x), d.dot(y), d.dot(z)};
  }
};

AxisFrame make_axis_frame(const Line& axis, const Vec3& movable_centroid) {
  AxisFrame f;
  f.z = axis.dir.normalized();
  f.origin = closest_point_on_line({f.z, axis.point}, movable_centroid);
  Vec3 w = movable_centroid - f.origin;
  w = w - f.z * w.dot(f.z);
  f.x = w.norm() > 1e-9 ? w.normalized() : any_orthogonal(f.z);
  f.y = f.z.cross(f.x);
  return f;
}

void fill_rows(Tensor& t, int row0, const std::vector<Vec3>& pts,
               const AxisFrame& frame, double flag_movable) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double* row = t.row_ptr(row0 + static_cast<int>(i));
    const Vec3 local = frame.to_frame(pts[i]);
    row[0] = local.x;
    row[1] = local.y;
    row[2] = local.z;
    row[3] = flag_movable;
    row[4] = 1.0 - flag_movable;
  }
}

}  // namespace

MotionPairInput make_pair_input(const std::vector<Vec3>& movable,
                                const std::vector<Vec3>& reference,
                                const Line& axis, MotionType mtype,
                                double amount, std::uint64_t seed,
                                int pair_points) {
  if (!is_mobile(mtype)) {
    throw std::invalid_argument("make_pair_input: immobile type");
  }
  if (movable.empty() || reference.empty()) {
    throw std::invalid_argument("make_pair_input: empty part");
  }
  const auto mov = sample_points_fixed(movable, pair_points, seed);
  const auto ref = sample_points_fixed(reference, pair_points, seed ^ 0x5851f42d4c957f2dULL);

  MotionParams motion;
  motion.mtype = mtype;
  motion.dir = axis.dir.normalized();
  if (!is_prismatic(mtype)) motion.pos = axis.point;
  const auto moved = apply_motion(mov, motion, amount);

  Vec3 centroid{0, 0, 0};
  for (const auto& p : mov) centroid += p;
  centroid = centroid / static_cast<double>(mov.size());
  const AxisFrame frame = make_axis_frame(axis, centroid);

  MotionPairInput pair;
  pair.original = Tensor(2 * pair_points, 5);
  pair.transformed = Tensor(2 * pair_points, 5);
  fill_rows(pair.original, 0, mov, frame, 1.0);
  fill_rows(pair.original, pair_points, ref, frame, 0.0);
  fill_rows(pair.transformed, 0, moved, frame, 1.0);
  fill_rows(pair.transformed, pair_points, ref, frame, 0.0);
  return pair;
}

namespace {

Tape::Id encode_cloud_tape(Tape& tape, Tape::Id X, const ParamStore& params,
                           ParamStore* grads,
                           std::map<std::string, Tape::Id>& cache) {
  auto bind = [&](const std::string& name) {
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    Tensor* sink = grads ? &grads->at(name) : nullptr;
    const Tape::Id id = tape.param(params.at(name), sink);
    cache.emplace(name, id);
    return id;
  };
  const Tape::Id h1 = tape.tanh_(tape.matmul_rows(X, bind("enc1.W"), bind("enc1.b")));
  const Tape::Id h2 = tape.matmul_rows(h1, bind("enc2.W"), bind("enc2.b"));
  return tape.colmax(h2);
}

}  // namespace

std::vector<double> feas_encode_cloud(const Tensor& cloud, const FeasModel& model) {
  Tape tape(false);
  std::map<std::string, Tape::Id> cache;
  const Tape::Id g =
      encode_cloud_tape(tape, tape.constant(cloud), model.params, nullptr, cache);
  return tape.value(g).v;
}

ad::Tape::Id feas_logit_tape(Tape& tape, const MotionPairInput& pair,
                             const FeasConfig& config, const ParamStore& params,
                             ParamStore* grads) {
  (void)config;
  std::map<std::string, Tape::Id> cache;
  const Tape::Id ga = encode_cloud_tape(tape, tape.constant(pair.original),
                                        params, grads, cache);
  const Tape::Id gb = encode_cloud_tape(tape, tape.constant(pair.transformed),
                                        params, grads, cache);
  auto bind = [&](const std::string& name) {
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    Tensor* sink = grads ? &grads->at(name) : nullptr;
    const Tape::Id id = tape.param(params.at(name), sink);
    cache.emplace(name, id);
    return id;
  };
  const Tape::Id cat = tape.concat({ga, gb});
  const Tape::Id h = tape.tanh_(tape.matmul_rows(cat, bind("head1.W"), bind("head1.b")));
  return tape.matmul_rows(h, bind("head2.W"), bind("head2.b"));
}

double feasibility_score(const MotionPairInput& pair, const FeasModel& model) {
  Tape tape(false);
  const Tape::Id z =
      feas_logit_tape(tape, pair, model.config, model.params, nullptr);
  const Tape::Id s = tape.sigmoid_(z);
  return tape.value(s).v[0];
}

std::vector<FeasPair> gen_training_pairs(const ShapeContext& ctx,
                                         const AnnotationSet& gt, int n_neg,
                                         std::uint64_t seed,
                                         const FeasConfig& config) {
  std::vector<FeasPair> out;
  Rng rng(seed);
  int edge_idx = 0;
  for (const auto& e : gt.edges) {
    if (!e.gt || !is_mobile(e.gt->mtype) || !e.gt->dir) continue;
    ++edge_idx;
    const auto& movable = ctx.part_points.at(e.src);
    const auto& reference = ctx.part_points.at(e.ref);
    if (movable.empty() || reference.empty()) continue;

    Vec3 centroid{0, 0, 0};
    for (const auto& p : movable) centroid += p;
    centroid = centroid / static_cast<double>(movable.size());

    Line gt_line;
    gt_line.dir = e.gt->dir->normalized();
    gt_line.point = e.gt->pos ? *e.gt->pos : centroid;

    // wrong-axis pool: OBB edge lines sufficiently different from the GT
    const OBB& obb = ctx.obbs.at(e.src);
    std::vector<Line> negatives;
    for (const auto& cand : obb_candidate_axes(obb)) {
      if (cand.source.kind != CandidateSource::Kind::ObbEdge) continue;
      const double dist = line_to_line_distance(gt_line, cand.line);
      const double ang = line_angle_deg(gt_line.dir, cand.line.dir);
      if (dist > config.neg_min_dist || ang > config.neg_min_angle_deg) {
        negatives.push_back(cand.line);
      }
    }
    if (negatives.empty()) continue;

    const bool prismatic = is_prismatic(e.gt->mtype);
    for (int a = 0; a < config.amounts_per_edge; ++a) {
      const double amount = prismatic
                                ? rng.uniform(config.pri_amount_lo, config.pri_amount_hi)
                                : rng.uniform(config.rev_amount_lo, config.rev_amount_hi);
      const std::uint64_t pos_seed = seed ^ (edge_idx * 1315423911ULL + a);
      FeasPair pos;
      pos.input = make_pair_input(movable, reference, gt_line, e.gt->mtype,
                                  amount, pos_seed, config.pair_points);
      pos.label = 1.0;
      out.push_back(std::move(pos));
      for (int k = 0; k < n_neg; ++k) {
        const Line& neg_line = negatives[rng.uniform_int(negatives.size())];
        FeasPair neg;
        neg.input = make_pair_input(movable, reference, neg_line, e.gt->mtype,
                                    amount, pos_seed ^ (k + 1), config.pair_points);
        neg.label = 0.0;
        out.push_back(std::move(neg));
      }
    }
  }
  return out;
}

double loss_bce(double score, double label) {
  const double s = std::min(std::max(score, 1e-15), 1.0 - 1e-15);
  return -(label * std::log(s) + (1.0 - label) * std::log(1.0 - s));
}

FeasTrainer::FeasTrainer(FeasModel model, AdamOptions opt)
    : model_(std::move(model)), adam_(AdamState::init(model_.params)),
      opt_(opt) {}

double FeasTrainer::train_step(const std::vector<const FeasPair*>& batch) {
  if (batch.empty()) return 0.0;
  Tape tape(true);
  ParamStore grads = model_.params.zeros_like();
  std::vector<Tape::Id> losses;
  losses.reserve(batch.size());
  for (const FeasPair* pair : batch) {
    const Tape::Id z =
        feas_logit_tape(tape, pair->input, model_.config, model_.params, &grads);
    losses.push_back(tape.bce_with_logits(z, pair->label));
  }
  const std::vector<double> w(losses.size(), 1.0 / losses.size());
  const Tape::Id total = tape.add_weighted(losses, w);
  if (!std::isfinite(tape.value(total).v[0])) {
    throw std::runtime_error("non-finite feasibility loss");
  }
  tape.backward(total);
  adam_.update(model_.params, grads, opt_);
  return tape.value(total).v[0];
}

double FeasTrainer::eval_loss(const std::vector<const FeasPair*>& pairs) const {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const FeasPair* pair : pairs) {
    sum += loss_bce(feasibility_score(pair->input, model_), pair->label);
  }
  return sum / pairs.size();
}

}  // namespace kinemo
