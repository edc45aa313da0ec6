#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinemo/refine.hpp"
#include "kinemo/rng.hpp"
#include "kinemo/synthdata.hpp"

using namespace kinemo;

namespace {

/// Flat cabinet: body plus two drawers, plus a handle box glued to drawer0.
ShapeContext cabinet_context() {
  Rng rng(5);
  Shape s;
  s.id = "cab";
  s.category = "storage_furniture";
  s.root = "root";
  PartNode root{"root", "", {"body", "d0", "d1", "handle"}, {}, {}};
  PartNode body{"body", "", {}, sample_box_surface(rng, {0, 0, 0}, {0.9, 0.4, 0.9}, 500), {}};
  PartNode d0{"d0", "", {}, sample_box_surface(rng, {0.05, 0.4, 0.1}, {0.85, 0.46, 0.4}, 500), {}};
  PartNode d1{"d1", "", {}, sample_box_surface(rng, {0.05, 0.4, 0.5}, {0.85, 0.46, 0.8}, 500), {}};
  PartNode handle{"handle", "", {}, sample_box_surface(rng, {0.4, 0.46, 0.2}, {0.5, 0.5, 0.3}, 300), {}};
  s.nodes = {root, body, d0, d1, handle};
  s.rebuild_index();
  ContextOptions opt;
  opt.n_points = 32;
  return build_context(std::move(s), opt);
}

SiblingEdge mk_pred(const std::string& src, const std::string& ref, MotionType t,
                    double prob, const Vec3& dir = {0, 1, 0},
                    const Vec3& pos = {0, 0, 0}) {
  SiblingEdge e;
  e.src = src;
  e.ref = ref;
  MotionParams mp;
  mp.mtype = t;
  if (is_mobile(t)) {
    mp.dir = dir;
    if (has_pivot(t)) mp.pos = pos;
  }
  e.pred = mp;
  e.pred_type_prob = prob;
  return e;
}

}  // namespace

TEST_CASE("direction consistency") {
  CHECK(direction_consistency({0, 0, 1}, {0, 0, 1}) == doctest::Approx(1.0));
  CHECK(direction_consistency({0, 0, 1}, {1, 0, 0}) == doctest::Approx(0.0));
  CHECK(direction_consistency({0, 0, 1}, {0, 0, -1}) == doctest::Approx(1.0));
  CHECK(direction_consistency({0, 0, 2}, {0, 0, -5}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(direction_consistency({0, 0, 0}, {1, 0, 0}), std::invalid_argument);
}

TEST_CASE("position consistency") {
  const Line pred{{0, 0, 1}, {0, 0, 0}};
  CHECK(position_consistency(pred, {{0, 0, 1}, {0, 0, 0.7}}, std::sqrt(3.0)) ==
        doctest::Approx(1.0));
  const Line at_scale{{0, 0, 1}, {std::sqrt(3.0), 0, 0}};
  CHECK(position_consistency(pred, at_scale, std::sqrt(3.0)) == doctest::Approx(0.0));
  const Line near{{0, 0, 1}, {0.3, 0, 0}};
  CHECK(position_consistency(pred, near, std::sqrt(3.0)) ==
        doctest::Approx(1.0 - 0.3 / std::sqrt(3.0)).epsilon(1e-9));
}

TEST_CASE("combined score: values and monotonicity") {
  const ScoreWeights w;
  CHECK(combined_score(1, 1, 1, w) == doctest::Approx(1.0));
  CHECK(combined_score(0.5, 1, 0, w) == doctest::Approx(0.55));
  CHECK(combined_score(0, 0, 0, w) == doctest::Approx(0.0));
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double f = rng.uniform(), d = rng.uniform(), p = rng.uniform();
    const double base = combined_score(f, d, p, w);
    CHECK(combined_score(std::min(1.0, f + 0.1), d, p, w) >= base);
    CHECK(combined_score(f, std::min(1.0, d + 0.1), p, w) >= base);
    CHECK(combined_score(f, d, std::min(1.0, p + 0.1), w) >= base);
  }
}

TEST_CASE("mobility tree extraction") {
  const auto ctx = cabinet_context();

  SUBCASE("all fixed gives an empty tree") {
    std::vector<SiblingEdge> preds{
        mk_pred("d0", "body", MotionType::Fixed, 0.9),
        mk_pred("body", "d0", MotionType::Fixed, 0.9),
    };
    const auto tree = extract_mobility_tree(ctx, preds, TypeMode::Fine);
    CHECK(tree.nodes.empty());
  }

  SUBCASE("two drawers against the body") {
    std::vector<SiblingEdge> preds{
        mk_pred("d0", "body", MotionType::P_H, 0.8),
        mk_pred("body", "d0", MotionType::Fixed, 0.9),
        mk_pred("d1", "body", MotionType::P_H, 0.7),
        mk_pred("body", "d1", MotionType::Fixed, 0.9),
    };
    const auto tree = extract_mobility_tree(ctx, preds, TypeMode::Fine);
    REQUIRE(tree.nodes.size() == 2);
    for (const auto& n : tree.nodes) {
      CHECK(n.reference == "body");
      CHECK(n.params.mtype == MotionType::P_H);
      CHECK(n.parts.size() == 1);
    }
  }

  SUBCASE("competing mobile edges keep the higher probability") {
    std::vector<SiblingEdge> preds{
        mk_pred("d0", "body", MotionType::P_H, 0.6),
        mk_pred("d0", "d1", MotionType::R_V_S, 0.8, {0, 0, 1}, {0, 0, 0}),
    };
    const auto tree = extract_mobility_tree(ctx, preds, TypeMode::Fine);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].reference == "d1");
    CHECK(tree.nodes[0].params.mtype == MotionType::R_V_S);
  }

  SUBCASE("probability tie breaks toward the lower class index") {
    std::vector<SiblingEdge> preds{
        mk_pred("d0", "d1", MotionType::R_V_S, 0.5, {0, 0, 1}, {0, 0, 0}),
        mk_pred("d0", "body", MotionType::P_H, 0.5),  // P_H has index 0
    };
    const auto tree = extract_mobility_tree(ctx, preds, TypeMode::Fine);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].params.mtype == MotionType::P_H);
  }
}

TEST_CASE("fixed-sibling merging") {
  const auto ctx = cabinet_context();
  // handle and d0 both movable vs body; d0 is much larger
  std::vector<SiblingEdge> preds{
      mk_pred("d0", "body", MotionType::P_H, 0.9),
      mk_pred("handle", "body", MotionType::P_V, 0.6, {0, 0, 1}),
      mk_pred("handle", "d0", MotionType::Fixed, 0.9),
  };
  const auto tree = extract_mobility_tree(ctx, preds, TypeMode::Fine);
  REQUIRE(tree.nodes.size() == 2);

  SUBCASE("same-reference fixed edge merges, larger part wins") {
    const auto merged = merge_fixed_siblings(tree, ctx, preds, TypeMode::Fine);
    REQUIRE(merged.nodes.size() == 1);
    CHECK(merged.nodes[0].parts.size() == 2);
    CHECK(merged.nodes[0].params.mtype == MotionType::P_H);  // drawer is larger
    CHECK(merged.nodes[0].primary == "d0");
    CHECK(merged.nodes[0].reference == "body");
  }

  SUBCASE("no fixed edge, no merge") {
    std::vector<SiblingEdge> no_fixed{preds[0], preds[1]};
    const auto tree2 = extract_mobility_tree(ctx, no_fixed, TypeMode::Fine);
    const auto merged = merge_fixed_siblings(tree2, ctx, no_fixed, TypeMode::Fine);
    CHECK(merged.nodes.size() == 2);
  }

  SUBCASE("different references do not merge") {
    std::vector<SiblingEdge> other{
        mk_pred("d0", "body", MotionType::P_H, 0.9),
        mk_pred("handle", "d1", MotionType::P_V, 0.6, {0, 0, 1}),
        mk_pred("handle", "d0", MotionType::Fixed, 0.9),
    };
    const auto tree2 = extract_mobility_tree(ctx, other, TypeMode::Fine);
    const auto merged = merge_fixed_siblings(tree2, ctx, other, TypeMode::Fine);
    CHECK(merged.nodes.size() == 2);
  }
}

TEST_CASE("select_axis with a GT oracle recovers generated door hinges") {
  SelectOptions opt;
  opt.pair_points = 64;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto g = gen_shape(*find_spec("door_set"), seed);
    ContextOptions copt;
    copt.n_points = 64;
    auto ctx = build_context(g.shape, copt);

    for (const auto& e : g.annotations.edges) {
      if (!is_mobile(e.gt->mtype)) continue;
      const Line gt_line{*e.gt->dir, *e.gt->pos};
      const FeasScorer oracle = [&](const MotionPairInput&) { return 0.5; };
      // oracle scorer variant keyed on the candidate is exercised through
      // the acceptance suite; here the consistency terms alone must already
      // pick the GT-coincident candidate given the GT prediction
      const auto result =
          select_axis(ctx.part_points.at(e.src), ctx.part_points.at(e.ref),
                      ctx.obbs.at(e.src), *e.gt, std::nullopt, ctx.shape.up_axis,
                      oracle, opt);
      CHECK(line_angle_deg(*result.refined.dir, gt_line.dir) < 1.0);
      CHECK(line_to_line_distance({*result.refined.dir, *result.refined.pos},
                                  gt_line) < 0.02);
      CHECK(result.candidates.size() >= 4);
    }
  }
}

TEST_CASE("select_axis argmax and tie rules") {
  const auto g = gen_shape(*find_spec("door_set"), 7);
  ContextOptions copt;
  copt.n_points = 64;
  auto ctx = build_context(g.shape, copt);
  const SiblingEdge* mobile = nullptr;
  for (const auto& e : g.annotations.edges) {
    if (is_mobile(e.gt->mtype)) mobile = &e;
  }
  REQUIRE(mobile);

  SelectOptions opt;
  opt.pair_points = 48;
  const OBB& obb = ctx.obbs.at(mobile->src);

  SUBCASE("all-equal scores select the first candidate") {
    // prediction pivot at the box center makes every vertical edge
    // equidistant; a constant feasibility score leaves a full tie
    MotionParams pred = *mobile->gt;
    pred.pos = obb.center;
    const FeasScorer flat = [](const MotionPairInput&) { return 0.25; };
    const auto result =
        select_axis(ctx.part_points.at(mobile->src), ctx.part_points.at(mobile->ref),
                    obb, pred, std::nullopt, ctx.shape.up_axis, flat, opt);
    REQUIRE(!result.candidates.empty());
    const auto& first = result.candidates.front();
    CHECK(result.score == first.s);
    CHECK(result.candidate_source == first.source.to_string());
  }

  SUBCASE("higher consistency wins when feasibility is flat") {
    const FeasScorer flat = [](const MotionPairInput&) { return 0.25; };
    const auto result =
        select_axis(ctx.part_points.at(mobile->src), ctx.part_points.at(mobile->ref),
                    obb, *mobile->gt, std::nullopt, ctx.shape.up_axis, flat, opt);
    double best = -1;
    for (const auto& c : result.candidates) best = std::max(best, c.s);
    CHECK(result.score == doctest::Approx(best));
  }

  SUBCASE("immobile prediction throws") {
    const FeasScorer flat = [](const MotionPairInput&) { return 0.25; };
    CHECK_THROWS_AS(
        select_axis(ctx.part_points.at(mobile->src), ctx.part_points.at(mobile->ref),
                    obb, MotionParams::immobile(MotionType::Fixed), std::nullopt,
                    ctx.shape.up_axis, flat, opt),
        std::invalid_argument);
  }
}

TEST_CASE("prismatic predictions drop the pivot term with renormalized weights") {
  const auto g = gen_shape(*find_spec("storage_furniture"), 11);
  ContextOptions copt;
  copt.n_points = 48;
  auto ctx = build_context(g.shape, copt);
  const SiblingEdge* drawer = nullptr;
  for (const auto& e : g.annotations.edges) {
    if (e.gt->mtype == MotionType::P_H) drawer = &e;
  }
  REQUIRE(drawer);
  SelectOptions opt;
  opt.pair_points = 48;
  const FeasScorer half = [](const MotionPairInput&) { return 0.5; };
  const auto result =
      select_axis(ctx.part_points.at(drawer->src), ctx.part_points.at(drawer->ref),
                  ctx.obbs.at(drawer->src), *drawer->gt, std::nullopt,
                  ctx.shape.up_axis, half, opt);
  CHECK(!result.refined.pos.has_value());
  // renormalized: (0.5*0.5 + 0.3*s_d) / 0.8 with the GT direction -> s_d = 1
  CHECK(result.s_d == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(result.score == doctest::Approx((0.5 * 0.5 + 0.3) / 0.8).epsilon(1e-6));
  CHECK(line_angle_deg(*result.refined.dir, *drawer->gt->dir) < 1.0);
}

TEST_CASE("pseudo-label filtering semantics") {
  auto with_score = [](double s) {
    MobilityTree t;
    t.shape_id = "s" + std::to_string(s);
    MobilityNode n;
    n.parts = {"a"};
    n.reference = "b";
    n.score = s;
    t.nodes.push_back(n);
    return t;
  };
  const std::vector<MobilityTree> trees{with_score(0.59), with_score(0.60),
                                        with_score(0.61)};
  const auto kept = filter_pseudo_labels(trees, 0.6);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == 2);  // only the 0.61 shape; 0.60 fails the strict test

  SUBCASE("raising tau never grows the kept set") {
    std::size_t prev = trees.size();
    for (double tau : {0.0, 0.3, 0.6, 0.9, 1.1}) {
      const auto k = filter_pseudo_labels(trees, tau).size();
      CHECK(k <= prev);
      prev = k;
    }
    CHECK(filter_pseudo_labels(trees, 1.1).empty());
    CHECK(filter_pseudo_labels(trees, 0.0).size() == 3);
  }

  SUBCASE("one weak node drops the whole shape") {
    MobilityTree t = with_score(0.9);
    MobilityNode weak;
    weak.parts = {"c"};
    weak.reference = "b";
    weak.score = 0.5;
    t.nodes.push_back(weak);
    CHECK(!keep_shape(t, 0.6));
    const auto per_node = filter_nodes(t, 0.6);
    CHECK(per_node.nodes.size() == 1);
  }

  SUBCASE("empty trees are never kept") {
    MobilityTree empty;
    CHECK(!keep_shape(empty, 0.0));
  }
}

TEST_CASE("node part groups stay disjoint through merging") {
  const auto ctx = cabinet_context();
  std::vector<SiblingEdge> preds{
      mk_pred("d0", "body", MotionType::P_H, 0.9),
      mk_pred("d1", "body", MotionType::P_H, 0.8),
      mk_pred("handle", "body", MotionType::P_V, 0.6, {0, 0, 1}),
      mk_pred("handle", "d0", MotionType::Fixed, 0.9),
      mk_pred("d1", "d0", MotionType::None, 0.7),
  };
  const auto tree = extract_mobility_tree(ctx, preds, TypeMode::Fine);
  const auto merged = merge_fixed_siblings(tree, ctx, preds, TypeMode::Fine);
  REQUIRE(merged.nodes.size() == 2);
  std::set<std::string> seen;
  for (const auto& n : merged.nodes) {
    CHECK(!n.parts.empty());
    for (const auto& p : n.parts) {
      CHECK(seen.insert(p).second);  // disjoint
    }
  }
}
