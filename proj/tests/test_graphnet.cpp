#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinemo/graphnet.hpp"
#include "kinemo/rng.hpp"

using namespace kinemo;

namespace {

std::vector<Vec3> box_surface(Rng& rng, const Vec3& lo, const Vec3& hi, int n) {
  const Vec3 e = hi - lo;
  const double areas[3] = {e.y * e.z, e.x * e.z, e.x * e.y};
  const double total = 2 * (areas[0] + areas[1] + areas[2]);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    double r = rng.uniform() * total;
    int face = 0;
    double side = 0.0;
    for (int k = 0; k < 3 && r >= 0; ++k) {
      for (double s : {0.0, 1.0}) {
        if (r < areas[k]) {
          face = k;
          side = s;
          r = -1;
          break;
        }
        r -= areas[k];
      }
    }
    Vec3 p{lo.x + rng.uniform() * e.x, lo.y + rng.uniform() * e.y,
           lo.z + rng.uniform() * e.z};
    p[face] = side == 0.0 ? lo[face] : hi[face];
    pts.push_back(p);
  }
  return pts;
}

/// Small door-like shape: frame post + panel, touching.
Shape make_door(std::uint64_t seed, int pts_per_leaf = 300) {
  Rng rng(seed);
  Shape s;
  s.id = "door_" + std::to_string(seed);
  s.category = "door_set";
  s.root = "root";
  PartNode root{"root", "door", {"frame", "panel"}, {}, {}};
  PartNode frame{"frame", "frame", {}, box_surface(rng, {0, 0.2, 0}, {0.08, 0.28, 0.9}, pts_per_leaf), {}};
  PartNode panel{"panel", "panel", {}, box_surface(rng, {0.08, 0.21, 0.02}, {0.6, 0.24, 0.88}, pts_per_leaf), {}};
  s.nodes = {root, frame, panel};
  s.rebuild_index();
  return s;
}

AnnotationSet door_gt(const Shape& s) {
  AnnotationSet gt;
  gt.shape_id = s.id;
  SiblingEdge mobile;
  mobile.src = "panel";
  mobile.ref = "frame";
  mobile.gt = MotionParams::with_axis(MotionType::R_V_S, {0, 0, 1}, {0.08, 0.21, 0.45});
  gt.edges.push_back(mobile);
  SiblingEdge back;
  back.src = "frame";
  back.ref = "panel";
  back.gt = MotionParams::immobile(MotionType::Fixed);
  gt.edges.push_back(back);
  return gt;
}

GnnConfig small_config() {
  GnnConfig c;
  c.feature_dim = 16;
  c.point_hidden = 8;
  c.head_hidden = 16;
  c.n_points = 64;
  c.rounds = 2;
  return c;
}

TrainSample door_sample(std::uint64_t seed, const GnnConfig& config) {
  ContextOptions opt;
  opt.n_points = config.n_points;
  opt.seed = seed;
  auto ctx = build_context(make_door(seed), opt);
  const AnnotationSet gt = door_gt(ctx.shape);
  return make_train_sample(std::move(ctx), gt, config);
}

}  // namespace

TEST_CASE("sample_points_fixed contracts") {
  Rng rng(2);
  std::vector<Vec3> big;
  for (int i = 0; i < 5000; ++i) {
    big.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  const auto sub = sample_points_fixed(big, 1024, 7);
  CHECK(sub.size() == 1024);
  for (int i = 0; i < 20; ++i) {
    bool member = false;
    for (const auto& p : big) {
      if ((p - sub[i * 50]).norm() == 0) {
        member = true;
        break;
      }
    }
    CHECK(member);
  }
  // determinism
  const auto sub2 = sample_points_fixed(big, 1024, 7);
  for (std::size_t i = 0; i < sub.size(); ++i) CHECK((sub[i] - sub2[i]).norm() == 0);

  // upsampling covers every source point
  std::vector<Vec3> small(big.begin(), big.begin() + 100);
  const auto up = sample_points_fixed(small, 1024, 3);
  CHECK(up.size() == 1024);
  for (const auto& p : small) {
    bool found = false;
    for (const auto& q : up) {
      if ((p - q).norm() == 0) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("leaf encoding is invariant to point order") {
  const GnnConfig config = small_config();
  const GnnModel model = GnnModel::init(config, 5);
  ContextOptions opt;
  opt.n_points = config.n_points;
  opt.seed = 11;
  auto ctx = build_context(make_door(11), opt);

  ad::Tape t1(false);
  const auto out1 = gnn_forward_tape(t1, ctx, config, model.params, nullptr);

  // permute the rows of each leaf sample: pooled features must not move
  auto permuted = build_context(make_door(11), opt);
  for (auto& [id, tensor] : permuted.leaf_samples) {
    ad::Tensor rev(tensor.rows, tensor.cols);
    for (int r = 0; r < tensor.rows; ++r) {
      std::copy(tensor.row_ptr(tensor.rows - 1 - r),
                tensor.row_ptr(tensor.rows - 1 - r) + tensor.cols, rev.row_ptr(r));
    }
    tensor = std::move(rev);
  }
  ad::Tape t2(false);
  const auto out2 = gnn_forward_tape(t2, permuted, config, model.params, nullptr);

  REQUIRE(out1.size() == out2.size());
  for (std::size_t i = 0; i < out1.size(); ++i) {
    const auto& a = t1.value(out1[i].probs).v;
    const auto& b = t2.value(out2[i].probs).v;
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(std::fabs(a[k] - b[k]) < 1e-9);
    }
  }
}

TEST_CASE("sibling graph edge counts") {
  ContextOptions opt;
  opt.n_points = 32;
  auto ctx = build_context(make_door(3), opt);
  // frame and panel touch: one pair, two directed edges
  CHECK(ctx.adjacency.size() == 1);
  CHECK(ctx.graph.edges.size() == 2);
  CHECK(ctx.graph.edges[0].src != ctx.graph.edges[0].ref);
  CHECK(ctx.graph.edges[0].feat.size() == 16);
  // both orientations present
  CHECK(ctx.graph.edges[0].src == ctx.graph.edges[1].ref);
  CHECK(ctx.graph.edges[1].src == ctx.graph.edges[0].ref);
}

TEST_CASE("forward outputs are well-formed and deterministic") {
  const GnnConfig config = small_config();
  const GnnModel model = GnnModel::init(config, 17);
  ContextOptions opt;
  opt.n_points = config.n_points;
  auto ctx = build_context(make_door(29), opt);

  const auto preds = gnn_forward(ctx, model);
  REQUIRE(preds.size() == 2);
  for (const auto& p : preds) {
    CHECK(p.logits.size() == 10);
    CHECK(p.type_probs.size() == 10);
    double sum = 0;
    for (double v : p.type_probs) {
      CHECK(v >= 0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-6);
    CHECK(std::fabs(p.dir.norm() - 1.0) < 1e-6);
    CHECK(p.pos.is_finite());
  }
  const auto preds2 = gnn_forward(ctx, model);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(preds[i].dir.x == preds2[i].dir.x);
    for (int k = 0; k < 10; ++k) {
      CHECK(preds[i].type_probs[k] == preds2[i].type_probs[k]);
    }
  }
}

TEST_CASE("loss formula oracles") {
  std::vector<double> uniform(10, 0.1);
  CHECK(loss_cls(uniform, 4) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  std::vector<double> half(10, 0.5 / 9);
  half[2] = 0.5;
  CHECK(loss_cls(half, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  std::vector<double> sure(10, 0.0);
  sure[0] = 1.0;
  CHECK(loss_cls(sure, 0) == doctest::Approx(0.0));

  CHECK(loss_dir({0, 0, 1}, {0, 0, 1}) == 0.0);
  CHECK(loss_dir({0, 0, 1}, {0, 1, 0}) == doctest::Approx(2.0));
  CHECK(loss_dir({0, 0, -1}, {0, 0, 1}) == doctest::Approx(4.0));
  CHECK(loss_dir({0, 0, -1}, {0, 0, 1}, false) == doctest::Approx(2.0));

  CHECK(loss_pos({1, 0, 0}, {0, 0, 0}, {0, 0, 1}) == doctest::Approx(1.0));
  const Vec3 p_shift = Vec3{0, 0, 0} + 0.7 * Vec3{0, 0, 1};
  CHECK(loss_pos(p_shift, {0, 0, 0}, {0, 0, 1}) == doctest::Approx(0.0));
  CHECK(loss_pos({1, 1, 0}, {0, 0, 0}, {0, 0, 2}) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(loss_pos({1, 0, 0}, {0, 0, 0}, {0, 0, 0}), std::invalid_argument);
}

TEST_CASE("loss_pos is invariant to sliding the target along the axis") {
  Rng rng(23);
  const Vec3 p{0.3, -0.2, 0.5};
  const Vec3 p_hat{0.1, 0.1, 0.1};
  const Vec3 d_hat = rng.unit_vector();
  const double base = loss_pos(p, p_hat, d_hat);
  double max_dev = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(-5, 5);
    max_dev = std::max(max_dev, std::fabs(loss_pos(p, p_hat + t * d_hat, d_hat) - base));
  }
  CHECK(max_dev < 1e-12);
}

TEST_CASE("total_loss masking for all 10 types") {
  GnnConfig config = small_config();
  EdgePrediction pred;
  pred.type_probs.assign(10, 0.1);
  pred.logits.assign(10, 0.0);
  pred.dir = {1, 0, 0};
  pred.pos = {5, 5, 5};  // far away: a pos term would be clearly visible
  const Vec3 up{0, 0, 1};

  for (int i = 0; i < kNumMotionTypes; ++i) {
    const auto t = static_cast<MotionType>(i);
    MotionParams gt;
    gt.mtype = t;
    if (is_mobile(t)) {
      gt.dir = Vec3{0, 0, 1};
      if (has_pivot(t)) gt.pos = Vec3{0, 0, 0};
    }
    const double cls = loss_cls(pred.type_probs, i);
    const double total = total_loss(pred, gt, config, up);
    if (!is_mobile(t)) {
      CHECK(total == doctest::Approx(cls));
    } else {
      const double dir_term = loss_dir(pred.dir, {0, 0, 1});
      if (!has_pivot(t)) {
        CHECK(total == doctest::Approx(cls + dir_term));
      } else {
        const double pos_term = loss_pos(pred.pos, {0, 0, 0}, {0, 0, 1});
        CHECK(total == doctest::Approx(cls + dir_term + pos_term));
        CHECK(total > cls + dir_term + 1.0);  // pos term really contributes
      }
    }
  }
}

TEST_CASE("analytic gradients match finite differences through the full model") {
  const GnnConfig config = small_config();
  GnnModel model = GnnModel::init(config, 31);
  TrainSample sample = door_sample(41, config);

  ParamStore grads = model.params.zeros_like();
  auto forward = [&](ParamStore* g) {
    ad::Tape tape(g != nullptr);
    const auto outs = gnn_forward_tape(tape, sample.ctx, config, model.params, g);
    std::vector<ad::Tape::Id> losses;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (!sample.targets[i]) continue;
      const auto& t = *sample.targets[i];
      std::vector<ad::Tape::Id> terms{tape.pick_neglog(outs[i].probs, t.class_idx)};
      std::vector<double> w{1.0};
      if (t.dir) {
        terms.push_back(tape.sq_norm_diff(outs[i].dir, {t.dir->x, t.dir->y, t.dir->z}));
        w.push_back(1.0);
        if (t.pos) {
          terms.push_back(tape.line_distance(outs[i].pos, *t.pos, *t.dir));
          w.push_back(1.0);
        }
      }
      losses.push_back(tape.add_weighted(terms, w));
    }
    const std::vector<double> w(losses.size(), 1.0 / losses.size());
    const auto total = tape.add_weighted(losses, w);
    if (g) tape.backward(total);
    return tape.value(total).v[0];
  };

  forward(&grads);

  // probe random parameter coordinates with central differences
  Rng rng(77);
  std::vector<std::string> names;
  for (const auto& [name, t] : model.params.tensors) names.push_back(name);
  const double h = 1e-4;
  int probes = 0;
  while (probes < 12) {
    const auto& name = names[rng.uniform_int(names.size())];
    ad::Tensor& t = model.params.at(name);
    const int idx = static_cast<int>(rng.uniform_int(t.size()));
    const double keep = t.v[idx];
    t.v[idx] = keep + h;
    const double up = forward(nullptr);
    t.v[idx] = keep - h;
    const double dn = forward(nullptr);
    t.v[idx] = keep;
    const double fd = (up - dn) / (2 * h);
    const double an = grads.at(name).v[idx];
    if (std::fabs(fd) < 1e-10 && std::fabs(an) < 1e-10) continue;  // dead probe
    const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
    CHECK(rel < 1e-3);
    ++probes;
  }
}

TEST_CASE("lr 0 leaves parameters unchanged") {
  const GnnConfig config = small_config();
  GnnModel model = GnnModel::init(config, 3);
  const ParamStore before = model.params;
  AdamOptions opt;
  opt.lr = 0.0;
  GnnTrainer trainer(std::move(model), opt);
  const TrainSample sample = door_sample(5, config);
  const double loss = trainer.train_step({&sample});
  CHECK(loss > 0.0);
  for (const auto& [name, t] : trainer.model().params.tensors) {
    const auto& b = before.at(name);
    for (int i = 0; i < t.size(); ++i) CHECK(t.v[i] == b.v[i]);
  }
}

TEST_CASE("50 steps overfit a single shape: loss halves") {
  const GnnConfig config = small_config();
  GnnTrainer trainer(GnnModel::init(config, 9), AdamOptions{});
  const TrainSample sample = door_sample(13, config);
  const double first = trainer.train_step({&sample});
  double last = first;
  for (int i = 0; i < 49; ++i) last = trainer.train_step({&sample});
  CHECK(last <= 0.5 * first);
}

TEST_CASE("training is deterministic and models serialize bit-identically") {
  const GnnConfig config = small_config();
  auto run = [&](const std::string& path) {
    GnnTrainer trainer(GnnModel::init(config, 21), AdamOptions{});
    const TrainSample sample = door_sample(19, config);
    for (int i = 0; i < 5; ++i) trainer.train_step({&sample});
    trainer.model().save(path);
  };
  run("/tmp/kinemo_model_a.json");
  run("/tmp/kinemo_model_b.json");
  std::ifstream a("/tmp/kinemo_model_a.json"), b("/tmp/kinemo_model_b.json");
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(!sa.empty());

  const GnnModel loaded = GnnModel::load("/tmp/kinemo_model_a.json");
  CHECK(loaded.config.feature_dim == config.feature_dim);
  CHECK(loaded.params.parameter_count() > 0);
}

TEST_CASE("predict_edges argmax and field contracts") {
  const GnnConfig config = small_config();
  const GnnModel model = GnnModel::init(config, 55);
  ContextOptions opt;
  opt.n_points = config.n_points;
  auto ctx = build_context(make_door(61), opt);
  const auto edges = predict_edges(ctx, model);
  REQUIRE(edges.size() == 2);
  for (const auto& e : edges) {
    REQUIRE(e.pred.has_value());
    REQUIRE(e.pred_logits.has_value());
    CHECK(e.pred_logits->size() == 10);
    REQUIRE(e.pred_type_prob.has_value());
    if (is_mobile(e.pred->mtype)) {
      REQUIRE(e.pred->dir.has_value());
      CHECK(std::fabs(e.pred->dir->norm() - 1.0) < 1e-6);
    }
  }

  SUBCASE("empty graph yields no predictions") {
    Shape s = make_door(71);
    // separate the parts so nothing is adjacent
    for (auto& p : s.find("panel")->points) p.x += 2.0;
    ContextOptions o2;
    o2.n_points = config.n_points;
    auto ctx2 = build_context(std::move(s), o2);
    CHECK(predict_edges(ctx2, model).empty());
  }
}

TEST_CASE("coarse mode produces 5-way predictions") {
  GnnConfig config = small_config();
  config.mode = TypeMode::Coarse;
  CHECK(config.num_classes() == 5);
  const GnnModel model = GnnModel::init(config, 33);
  ContextOptions opt;
  opt.n_points = config.n_points;
  auto ctx = build_context(make_door(37), opt);
  const auto edges = predict_edges(ctx, model);
  REQUIRE(edges.size() == 2);
  for (const auto& e : edges) {
    CHECK(e.pred_coarse.has_value());
    CHECK(!e.pred_logits.has_value());  // 10-logit field is fine-mode only
  }
  CHECK(class_index(MotionType::R_V_S, TypeMode::Coarse) ==
        static_cast<int>(CoarseType::R));
  CHECK(class_index(MotionType::R_V_S, TypeMode::Fine) == 5);
}
