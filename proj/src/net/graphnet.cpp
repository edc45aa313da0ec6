#include "kinemo/graphnet.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "kinemo/rng.hpp"

namespace kinemo {

using ad::Tape;
using ad::Tensor;
using nlohmann::json;

namespace {

constexpr int kObbDescDim = 15;  // center + extents + flattened axes

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor obb_descriptor(const OBB& obb) {
  Tensor t(1, kObbDescDim);
  int i = 0;
  for (int k = 0; k < 3; ++k) t.v[i++] = obb.center[k];
  for (int k = 0; k < 3; ++k) t.v[i++] = obb.extents[k];
  for (int a = 0; a < 3; ++a)
    for (int k = 0; k < 3; ++k) t.v[i++] = obb.axes[a][k];
  return t;
}

}  // namespace

json GnnConfig::to_json() const {
  return json{{"feature_dim", feature_dim},
              {"edge_feat_dim", edge_feat_dim},
              {"rounds", rounds},
              {"point_hidden", point_hidden},
              {"head_hidden", head_hidden},
              {"n_points", n_points},
              {"mode", mode == TypeMode::Fine ? "fine" : "coarse"},
              {"dir_loss_squared", dir_loss_squared},
              {"dir_eps", dir_eps},
              {"w_cls", w_cls},
              {"w_dir", w_dir},
              {"w_pos", w_pos}};
}

GnnConfig GnnConfig::from_json(const json& j) {
  GnnConfig c;
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.edge_feat_dim = j.value("edge_feat_dim", c.edge_feat_dim);
  c.rounds = j.value("rounds", c.rounds);
  c.point_hidden = j.value("point_hidden", c.point_hidden);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.n_points = j.value("n_points", c.n_points);
  c.mode = j.value("mode", "fine") == std::string("coarse") ? TypeMode::Coarse
                                                            : TypeMode::Fine;
  c.dir_loss_squared = j.value("dir_loss_squared", c.dir_loss_squared);
  c.dir_eps = j.value("dir_eps", c.dir_eps);
  c.w_cls = j.value("w_cls", c.w_cls);
  c.w_dir = j.value("w_dir", c.w_dir);
  c.w_pos = j.value("w_pos", c.w_pos);
  return c;
}

int class_index(MotionType t, TypeMode mode) {
  return mode == TypeMode::Fine ? static_cast<int>(t)
                                : static_cast<int>(to_coarse(t));
}

GnnModel GnnModel::init(const GnnConfig& config, std::uint64_t seed) {
  GnnModel model;
  model.config = config;
  auto& ts = model.params.tensors;
  const int F = config.feature_dim, E = config.edge_feat_dim;
  const int PH = config.point_hidden, HH = config.head_hidden;
  const int C = config.num_classes();

  auto add = [&](const std::string& name, int rows, int cols) {
    ts.emplace(name, Tensor(rows, cols));
  };
  add("point1.W", PH, 3);
  add("point1.b", 1, PH);
  add("point2.W", F, PH);
  add("point2.b", 1, F);
  add("agg1.W", F, 2 * F + kObbDescDim);
  add("agg1.b", 1, F);
  add("agg2.W", F, F);
  add("agg2.b", 1, F);
  for (int k = 0; k < config.rounds; ++k) {
    const std::string r = std::to_string(k);
    add("msg" + r + ".W", F, 2 * F + E);
    add("msg" + r + ".b", 1, F);
    add("node" + r + ".W", F, 2 * F);
    add("node" + r + ".b", 1, F);
  }
  add("type1.W", HH, 3 * F);
  add("type1.b", 1, HH);
  add("type2.W", C, HH);
  add("type2.b", 1, C);
  for (const char* head : {"dir", "pos"}) {
    add(std::string(head) + "1.W", HH, 3 * F);
    add(std::string(head) + "1.b", 1, HH);
    add(std::string(head) + "2.W", 3, HH);
    add(std::string(head) + "2.b", 1, 3);
  }

  // Xavier-uniform weights, zero biases; name order keeps this deterministic
  Rng rng(seed);
  for (auto& [name, t] : ts) {
    if (name.size() > 2 && name.substr(name.size() - 2) == ".b") continue;
    const double limit = std::sqrt(6.0 / (t.rows + t.cols));
    for (double& v : t.v) v = rng.uniform(-limit, limit);
  }
  return model;
}

void GnnModel::save(const std::string& path) const {
  save_model(path, config.to_json(), params);
}

GnnModel GnnModel::load(const std::string& path) {
  LoadedModel m = load_model(path);
  GnnModel model;
  model.config = GnnConfig::from_json(m.config);
  model.params = std::move(m.params);
  return model;
}

std::vector<Vec3> sample_points_fixed(const std::vector<Vec3>& points, int n,
                                      std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("sample_points_fixed: empty");
  const int m = static_cast<int>(points.size());
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  if (m == n) return points;
  if (m < n) {
    // whole copies guarantee every source point appears, random fill-up
    while (static_cast<int>(out.size()) + m <= n) {
      out.insert(out.end(), points.begin(), points.end());
    }
    while (static_cast<int>(out.size()) < n) {
      out.push_back(points[rng.uniform_int(m)]);
    }
    return out;
  }
  // farthest-point subsampling with a running nearest-selected distance
  std::vector<double> best(m, std::numeric_limits<double>::infinity());
  std::vector<char> taken(m, 0);
  int cur = static_cast<int>(rng.uniform_int(m));
  for (int k = 0; k < n; ++k) {
    out.push_back(points[cur]);
    taken[cur] = 1;
    double far = -1.0;
    int next = -1;
    for (int i = 0; i < m; ++i) {
      if (taken[i]) continue;
      best[i] = std::min(best[i], dist2(points[i], points[cur]));
      if (best[i] > far) {
        far = best[i];
        next = i;
      }
    }
    if (next < 0) break;
    cur = next;
  }
  return out;
}

std::vector<Vec3> sample_leaf_points(const PartNode& node, int n,
                                     std::uint64_t seed) {
  if (!node.is_leaf() || node.points.empty()) {
    throw std::invalid_argument("sample_leaf_points: leaf with points required");
  }
  return sample_points_fixed(node.points, n, seed);
}

std::vector<double> edge_feature(const OBB& src, const OBB& ref,
                                 double min_dist) {
  std::vector<double> f;
  f.reserve(16);
  const Vec3 o = src.center - ref.center;
  for (int k = 0; k < 3; ++k) f.push_back(o[k]);
  for (int k = 0; k < 3; ++k) f.push_back(o.dot(ref.axes[k]));
  for (int k = 0; k < 3; ++k) f.push_back(o.dot(src.axes[k]));
  for (int k = 0; k < 3; ++k) {
    f.push_back(std::log((src.extents[k] + 1e-6) / (ref.extents[k] + 1e-6)));
  }
  for (int a = 0; a < 3; ++a) {
    double best = 0.0;
    for (int b = 0; b < 3; ++b) {
      best = std::max(best, std::fabs(src.axes[a].dot(ref.axes[b])));
    }
    f.push_back(best);
  }
  f.push_back(min_dist);
  return f;
}

SiblingGraph build_sibling_graph(const Shape& shape,
                                 const std::vector<AdjacentPair>& adjacency,
                                 const std::map<std::string, OBB>& obbs) {
  (void)shape;
  SiblingGraph g;
  for (const auto& pair : adjacency) {
    const OBB& a = obbs.at(pair.a);
    const OBB& b = obbs.at(pair.b);
    g.edges.push_back({pair.a, pair.b, edge_feature(a, b, pair.min_dist)});
    g.edges.push_back({pair.b, pair.a, edge_feature(b, a, pair.min_dist)});
  }
  return g;
}

ShapeContext build_context(Shape shape, const ContextOptions& opt) {
  ShapeContext ctx;
  ctx.shape = std::move(shape);
  for (const auto& node : ctx.shape.nodes) {
    ctx.part_points.emplace(node.id, ctx.shape.collect_points(node.id));
  }
  for (const auto& node : ctx.shape.nodes) {
    const auto& pts = ctx.part_points.at(node.id);
    if (pts.size() >= 4) {
      OBB obb = compute_obb(pts, ctx.shape.up_axis, opt.obb);
      ctx.obbs.emplace(node.id, obb);
      ctx.shape.find(node.id)->obb = obb;
    }
  }
  ctx.adjacency = detect_adjacency(ctx.shape, opt.adjacency_eps);
  ctx.graph = build_sibling_graph(ctx.shape, ctx.adjacency, ctx.obbs);
  for (const auto& node : ctx.shape.nodes) {
    if (!node.is_leaf()) continue;
    const auto sampled =
        sample_leaf_points(node, opt.n_points, opt.seed ^ fnv1a(node.id));
    Tensor t(static_cast<int>(sampled.size()), 3);
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      t.row_ptr(static_cast<int>(i))[0] = sampled[i].x;
      t.row_ptr(static_cast<int>(i))[1] = sampled[i].y;
      t.row_ptr(static_cast<int>(i))[2] = sampled[i].z;
    }
    ctx.leaf_samples.emplace(node.id, std::move(t));
  }
  return ctx;
}

int EdgePrediction::argmax() const {
  int best = 0;
  for (int i = 1; i < static_cast<int>(type_probs.size()); ++i) {
    if (type_probs[i] > type_probs[best]) best = i;
  }
  return best;
}

namespace {

/// Parameter node cache: one tape node per tensor per bound scope.
struct Binder {
  Tape& tape;
  const ParamStore& params;
  ParamStore* grads;
  std::map<std::string, Tape::Id> cache;

  Tape::Id operator()(const std::string& name) {
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    Tensor* sink = grads ? &grads->at(name) : nullptr;
    const Tape::Id id = tape.param(params.at(name), sink);
    cache.emplace(name, id);
    return id;
  }
};

std::map<std::string, Tape::Id> encode_hierarchy_tape(Tape& tape,
                                                      const ShapeContext& ctx,
                                                      Binder& bind) {
  std::map<std::string, Tape::Id> feats;
  std::function<Tape::Id(const std::string&)> enc =
      [&](const std::string& id) -> Tape::Id {
    const PartNode& node = ctx.shape.at(id);
    Tape::Id out;
    if (node.is_leaf()) {
      const Tape::Id X = tape.constant(ctx.leaf_samples.at(id));
      const Tape::Id h1 =
          tape.tanh_(tape.matmul_rows(X, bind("point1.W"), bind("point1.b")));
      const Tape::Id h2 = tape.matmul_rows(h1, bind("point2.W"), bind("point2.b"));
      out = tape.colmax(h2);
    } else {
      std::vector<Tape::Id> kids;
      kids.reserve(node.children.size());
      for (const auto& child : node.children) kids.push_back(enc(child));
      const Tape::Id stacked = tape.stack_rows(kids);
      const Tape::Id mean = tape.mean_rows(stacked);
      const Tape::Id mx = tape.colmax(stacked);
      const Tape::Id desc = tape.constant(obb_descriptor(ctx.obbs.at(id)));
      const Tape::Id cat = tape.concat({mean, mx, desc});
      const Tape::Id h =
          tape.tanh_(tape.matmul_rows(cat, bind("agg1.W"), bind("agg1.b")));
      out = tape.matmul_rows(h, bind("agg2.W"), bind("agg2.b"));
    }
    feats.emplace(id, out);
    return out;
  };
  enc(ctx.shape.root);
  return feats;
}

}  // namespace

std::vector<EdgeOutputIds> gnn_forward_tape(Tape& tape, const ShapeContext& ctx,
                                            const GnnConfig& config,
                                            const ParamStore& params,
                                            ParamStore* grads) {
  Binder bind{tape, params, grads, {}};
  auto feats = encode_hierarchy_tape(tape, ctx, bind);

  const auto& edges = ctx.graph.edges;
  std::vector<Tape::Id> edge_feats;
  edge_feats.reserve(edges.size());
  for (const auto& e : edges) {
    edge_feats.push_back(tape.constant(Tensor::row(e.feat)));
  }

  const Tape::Id zero_feat = tape.constant(Tensor(1, config.feature_dim));
  std::vector<Tape::Id> messages(edges.size());
  for (int round = 0; round < config.rounds; ++round) {
    const std::string r = std::to_string(round);
    for (std::size_t ei = 0; ei < edges.size(); ++ei) {
      const Tape::Id cat = tape.concat(
          {feats.at(edges[ei].src), feats.at(edges[ei].ref), edge_feats[ei]});
      messages[ei] = tape.tanh_(
          tape.matmul_rows(cat, bind("msg" + r + ".W"), bind("msg" + r + ".b")));
    }
    std::map<std::string, Tape::Id> updated;
    for (const auto& [id, feat] : feats) {
      std::vector<Tape::Id> incoming;
      for (std::size_t ei = 0; ei < edges.size(); ++ei) {
        if (edges[ei].ref == id) incoming.push_back(messages[ei]);
      }
      const Tape::Id inc =
          incoming.empty() ? zero_feat : tape.mean_of(incoming);
      const Tape::Id cat = tape.concat({feat, inc});
      updated.emplace(id, tape.tanh_(tape.matmul_rows(cat, bind("node" + r + ".W"),
                                                      bind("node" + r + ".b"))));
    }
    feats = std::move(updated);
  }

  std::vector<EdgeOutputIds> out;
  out.reserve(edges.size());
  for (std::size_t ei = 0; ei < edges.size(); ++ei) {
    const Tape::Id state = tape.concat(
        {feats.at(edges[ei].src), feats.at(edges[ei].ref), messages[ei]});
    const Tape::Id th =
        tape.tanh_(tape.matmul_rows(state, bind("type1.W"), bind("type1.b")));
    const Tape::Id logits = tape.matmul_rows(th, bind("type2.W"), bind("type2.b"));
    const Tape::Id probs = tape.softmax(logits);
    const Tape::Id dh =
        tape.tanh_(tape.matmul_rows(state, bind("dir1.W"), bind("dir1.b")));
    const Tape::Id dir = tape.l2_normalize(
        tape.matmul_rows(dh, bind("dir2.W"), bind("dir2.b")), config.dir_eps);
    const Tape::Id ph =
        tape.tanh_(tape.matmul_rows(state, bind("pos1.W"), bind("pos1.b")));
    const Tape::Id pos = tape.matmul_rows(ph, bind("pos2.W"), bind("pos2.b"));
    out.push_back({logits, probs, dir, pos});
  }
  return out;
}

std::vector<EdgePrediction> gnn_forward(const ShapeContext& ctx,
                                        const GnnModel& model) {
  Tape tape(false);
  const auto ids = gnn_forward_tape(tape, ctx, model.config, model.params, nullptr);
  std::vector<EdgePrediction> out;
  out.reserve(ids.size());
  for (const auto& e : ids) {
    EdgePrediction p;
    p.logits = tape.value(e.logits).v;
    p.type_probs = tape.value(e.probs).v;
    const auto& d = tape.value(e.dir).v;
    const auto& q = tape.value(e.pos).v;
    p.dir = {d[0], d[1], d[2]};
    p.pos = {q[0], q[1], q[2]};
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<SiblingEdge> predict_edges(const ShapeContext& ctx,
                                       const GnnModel& model) {
  return edges_from_predictions(ctx, gnn_forward(ctx, model), model.config.mode);
}

std::vector<SiblingEdge> edges_from_predictions(
    const ShapeContext& ctx, const std::vector<EdgePrediction>& preds,
    TypeMode mode) {
  std::vector<SiblingEdge> out;
  out.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    SiblingEdge e;
    e.src = ctx.graph.edges[i].src;
    e.ref = ctx.graph.edges[i].ref;
    const int cls = preds[i].argmax();
    e.pred_type_prob = preds[i].type_probs[cls];
    MotionParams mp;
    if (mode == TypeMode::Fine) {
      mp.mtype = static_cast<MotionType>(cls);
      if (is_mobile(mp.mtype)) {
        mp.dir = preds[i].dir;
        if (has_pivot(mp.mtype)) mp.pos = preds[i].pos;
      }
      e.pred_logits = preds[i].logits;
    } else {
      const auto ct = static_cast<CoarseType>(cls);
      e.pred_coarse = ct;
      mp.mtype = MotionType::None;  // fine type undefined in coarse mode
      if (is_mobile(ct)) {
        mp.dir = preds[i].dir;
        if (ct != CoarseType::P) mp.pos = preds[i].pos;
      }
    }
    e.pred = mp;
    out.push_back(std::move(e));
  }
  return out;
}

double loss_cls(const std::vector<double>& type_probs, int gt_index) {
  if (gt_index < 0 || gt_index >= static_cast<int>(type_probs.size())) {
    throw std::invalid_argument("loss_cls: index out of range");
  }
  return -std::log(std::max(type_probs[gt_index], 1e-300));
}

double loss_dir(const Vec3& d, const Vec3& d_hat, bool squared) {
  const double n2 = (d - d_hat).norm2();
  return squared ? n2 : std::sqrt(n2);
}

double loss_pos(const Vec3& p, const Vec3& p_hat, const Vec3& d_hat) {
  const double dn = d_hat.norm();
  if (dn <= 1e-8) throw std::invalid_argument("loss_pos: degenerate axis");
  return (p - p_hat).cross(d_hat).norm() / dn;
}

double total_loss(const EdgePrediction& pred, const MotionParams& gt,
                  const GnnConfig& config, const Vec3& up) {
  double total =
      config.w_cls * loss_cls(pred.type_probs, class_index(gt.mtype, config.mode));
  if (is_mobile(gt.mtype) && gt.dir) {
    const Vec3 d_hat = canonicalize_dir(gt.dir->normalized(), up);
    total += config.w_dir * loss_dir(pred.dir, d_hat, config.dir_loss_squared);
    if (has_pivot(gt.mtype) && gt.pos) {
      total += config.w_pos * loss_pos(pred.pos, *gt.pos, d_hat);
    }
  }
  return total;
}

TrainSample make_train_sample(ShapeContext ctx, const AnnotationSet& gt,
                              const GnnConfig& config) {
  std::map<std::pair<std::string, std::string>, const SiblingEdge*> lookup;
  for (const auto& e : gt.edges) {
    if (e.gt) lookup[{e.src, e.ref}] = &e;
  }
  TrainSample sample;
  sample.targets.resize(ctx.graph.edges.size());
  for (std::size_t i = 0; i < ctx.graph.edges.size(); ++i) {
    const auto& ge = ctx.graph.edges[i];
    auto it = lookup.find({ge.src, ge.ref});
    if (it == lookup.end()) continue;
    const MotionParams& mp = *it->second->gt;
    TrainSample::Target t;
    t.class_idx = class_index(mp.mtype, config.mode);
    if (is_mobile(mp.mtype) && mp.dir) {
      t.dir = canonicalize_dir(mp.dir->normalized(), ctx.shape.up_axis);
      if (has_pivot(mp.mtype) && mp.pos) t.pos = *mp.pos;
    }
    sample.targets[i] = std::move(t);
  }
  sample.ctx = std::move(ctx);
  return sample;
}

AdamState AdamState::init(const ParamStore& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void AdamState::update(ParamStore& params, const ParamStore& grads,
                       const AdamOptions& opt) {
  ++t;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (auto& [name, p] : params.tensors) {
    const Tensor& g = grads.at(name);
    Tensor& mm = m.at(name);
    Tensor& vv = v.at(name);
    for (int i = 0; i < p.size(); ++i) {
      mm.v[i] = opt.beta1 * mm.v[i] + (1.0 - opt.beta1) * g.v[i];
      vv.v[i] = opt.beta2 * vv.v[i] + (1.0 - opt.beta2) * g.v[i] * g.v[i];
      const double mhat = mm.v[i] / bc1;
      const double vhat = vv.v[i] / bc2;
      p.v[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

namespace {

/// Per-edge loss node with the type masks applied by term omission.
Tape::Id edge_loss_tape(Tape& tape, const EdgeOutputIds& outs,
                        const TrainSample::Target& target,
                        const GnnConfig& config) {
  std::vector<Tape::Id> terms;
  std::vector<double> weights;
  terms.push_back(tape.pick_neglog(outs.probs, target.class_idx));
  weights.push_back(config.w_cls);
  if (target.dir) {
    const std::vector<double> d{target.dir->x, target.dir->y, target.dir->z};
    terms.push_back(config.dir_loss_squared
                        ? tape.sq_norm_diff(outs.dir, d)
                        : tape.norm_diff(outs.dir, d, 1e-12));
    weights.push_back(config.w_dir);
    if (target.pos) {
      terms.push_back(tape.line_distance(outs.pos, *target.pos, *target.dir));
      weights.push_back(config.w_pos);
    }
  }
  return tape.add_weighted(terms, weights);
}

}  // namespace

GnnTrainer::GnnTrainer(GnnModel model, AdamOptions opt)
    : model_(std::move(model)), adam_(AdamState::init(model_.params)),
      opt_(opt) {}

double GnnTrainer::train_step(const std::vector<const TrainSample*>& batch) {
  Tape tape(true);
  ParamStore grads = model_.params.zeros_like();
  std::vector<Tape::Id> losses;
  std::vector<const TrainSample*> loss_owner;
  for (const TrainSample* sample : batch) {
    const auto outs = gnn_forward_tape(tape, sample->ctx, model_.config,
                                       model_.params, &grads);
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (!sample->targets[i]) continue;
      losses.push_back(edge_loss_tape(tape, outs[i], *sample->targets[i],
                                      model_.config));
      loss_owner.push_back(sample);
    }
  }
  if (losses.empty()) return 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(tape.value(losses[i]).v[0])) {
      throw std::runtime_error("non-finite loss on shape " +
                               loss_owner[i]->ctx.shape.id);
    }
  }
  const std::vector<double> w(losses.size(), 1.0 / losses.size());
  const Tape::Id total = tape.add_weighted(losses, w);
  tape.backward(total);
  adam_.update(model_.params, grads, opt_);
  return tape.value(total).v[0];
}

double GnnTrainer::eval_loss(const std::vector<const TrainSample*>& samples) const {
  double sum = 0.0;
  long count = 0;
  for (const TrainSample* sample : samples) {
    Tape tape(false);
    const auto outs = gnn_forward_tape(tape, sample->ctx, model_.config,
                                       model_.params, nullptr);
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (!sample->targets[i]) continue;
      EdgePrediction p;
      p.type_probs = tape.value(outs[i].probs).v;
      p.logits = tape.value(outs[i].logits).v;
      const auto& d = tape.value(outs[i].dir).v;
      const auto& q = tape.value(outs[i].pos).v;
      p.dir = {d[0], d[1], d[2]};
      p.pos = {q[0], q[1], q[2]};
      const auto& t = *sample->targets[i];
      double loss = model_.config.w_cls * loss_cls(p.type_probs, t.class_idx);
      if (t.dir) {
        loss += model_.config.w_dir *
                loss_dir(p.dir, *t.dir, model_.config.dir_loss_squared);
        if (t.pos) {
          loss += model_.config.w_pos * loss_pos(p.pos, *t.pos, *t.dir);
        }
      }
      sum += loss;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / count;
}

}  // namespace kinemo
