#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "kinemo/geometry.hpp"
#include "kinemo/rng.hpp"

using namespace kinemo;

namespace {

std::vector<Vec3> unit_cube_corners() {
  std::vector<Vec3> pts;
  for (double x : {0.0, 1.0})
    for (double y : {0.0, 1.0})
      for (double z : {0.0, 1.0}) pts.push_back({x, y, z});
  return pts;
}

std::vector<Vec3> rotate_all(const std::vector<Vec3>& pts, const Mat3& R) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(R * p);
  return out;
}

/// Surface sampling of an axis-aligned box, area-weighted, deterministic.
std::vector<Vec3> sample_box_surface(Rng& rng, const Vec3& lo, const Vec3& hi,
                                     int n) {
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

/// Independent oracle for the rotated-cube case: exhaustive scan of the
/// rotation angle about Z minimizing the axis-aligned box volume of the
/// de-rotated points.
double best_z_angle_by_volume(const std::vector<Vec3>& pts) {
  double best_angle = 0.0, best_vol = 1e300;
  for (double deg = 0.0; deg < 90.0; deg += 0.05) {
    const Mat3 R = Mat3::rotation({0, 0, 1}, -deg_to_rad(deg));
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& p : pts) {
      const Vec3 q = R * p;
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], q[k]);
        hi[k] = std::max(hi[k], q[k]);
      }
    }
    const Vec3 e = hi - lo;
    const double vol = e.x * e.y * e.z;
    if (vol < best_vol) {
      best_vol = vol;
      best_angle = deg;
    }
  }
  return best_angle;
}

/// Dense-sampling oracle for the distance between two infinite lines:
/// a coarse 1000x1000 parameter grid followed by two zoom stages.
double line_distance_oracle(const Line& a, const Line& b) {
  const Vec3 da = a.dir.normalized(), db = b.dir.normalized();
  double t_lo = -50, t_hi = 50, s_lo = -50, s_hi = 50;
  double best = 1e300, best_t = 0, best_s = 0;
  for (int stage = 0; stage < 3; ++stage) {
    const int steps = stage == 0 ? 1000 : 100;
    const double dt = (t_hi - t_lo) / steps, ds = (s_hi - s_lo) / steps;
    for (int i = 0; i <= steps; ++i) {
      const Vec3 pa = a.point + da * (t_lo + i * dt);
      for (int j = 0; j <= steps; ++j) {
        const Vec3 pb = b.point + db * (s_lo + j * ds);
        const double d = (pa - pb).norm();
        if (d < best) {
          best = d;
          best_t = t_lo + i * dt;
          best_s = s_lo + j * ds;
        }
      }
    }
    t_lo = best_t - 2 * dt;
    t_hi = best_t + 2 * dt;
    s_lo = best_s - 2 * ds;
    s_hi = best_s + 2 * ds;
  }
  return best;
}

}  // namespace

TEST_CASE("obb of the unit cube corners") {
  const OBB obb = compute_obb(unit_cube_corners());
  CHECK((obb.center - Vec3{0.5, 0.5, 0.5}).norm() < 1e-9);
  for (int k = 0; k < 3; ++k) CHECK(obb.extents[k] == doctest::Approx(0.5).epsilon(1e-9));
  for (const auto& p : unit_cube_corners()) CHECK(obb.contains(p, 1e-6));
}

TEST_CASE("obb recovers a 30 degree rotation of the cube") {
  const Mat3 R = Mat3::rotation({0, 0, 1}, deg_to_rad(30));
  const auto pts = rotate_all(unit_cube_corners(), R);

  const double oracle_deg = best_z_angle_by_volume(pts);
  CHECK(std::fabs(oracle_deg - 30.0) < 0.1);  // sanity of the oracle itself

  const OBB obb = compute_obb(pts);
  // every recovered axis must align with some axis of the oracle frame
  const Mat3 Rstar = Mat3::rotation({0, 0, 1}, deg_to_rad(oracle_deg));
  for (int k = 0; k < 3; ++k) {
    double best = 90.0;
    for (int j = 0; j < 3; ++j) {
      best = std::min(best, line_angle_deg(obb.axes[k], Rstar.col(j)));
    }
    CHECK(best < 1.0);
  }
  for (const auto& p : pts) CHECK(obb.contains(p, 1e-6));
}

TEST_CASE("obb extents of a sampled slab") {
  Rng rng(123);
  const auto pts = sample_box_surface(rng, {0, 0, 0}, {1.0, 0.4, 0.02}, 1000);
  const OBB obb = compute_obb(pts);
  // extents sorted descending by construction
  CHECK(obb.extents[0] == doctest::Approx(0.5).epsilon(0.05));
  CHECK(obb.extents[1] == doctest::Approx(0.2).epsilon(0.05));
  CHECK(obb.extents[2] == doctest::Approx(0.01).epsilon(0.05));  // min_extent floor
}

TEST_CASE("obb rotation equivariance: volume within 1 percent") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 sz{rng.uniform(0.3, 1.0), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.3)};
    const auto pts = sample_box_surface(rng, {0, 0, 0}, sz, 600);
    const OBB base = compute_obb(pts);
    const Mat3 R = Mat3::rotation(rng.unit_vector(), rng.uniform(0.1, 1.2));
    const OBB rot = compute_obb(rotate_all(pts, R));
    CHECK(std::fabs(rot.volume() - base.volume()) < 0.01 * base.volume());
  }
}

TEST_CASE("obb throws on degenerate input") {
  CHECK_THROWS_AS(compute_obb({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}), std::invalid_argument);
}

TEST_CASE("adjacency of touching and separated boxes") {
  Rng rng(9);
  Shape s;
  s.id = "adj";
  s.root = "root";
  PartNode root{"root", "", {"a", "b"}, {}, {}};
  PartNode a{"a", "", {}, sample_box_surface(rng, {0, 0, 0}, {0.5, 0.5, 0.5}, 400), {}};
  PartNode b{"b", "", {}, sample_box_surface(rng, {0.5, 0, 0}, {1.0, 0.5, 0.5}, 400), {}};
  s.nodes = {root, a, b};
  s.rebuild_index();

  auto pairs = detect_adjacency(s, 0.01);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].a == "a");
  CHECK(pairs[0].b == "b");

  // move b away by 0.1: not adjacent at eps 0.05
  for (auto& p : s.nodes[2].points) p.x += 0.1;
  CHECK(detect_adjacency(s, 0.05).empty());
  CHECK(detect_adjacency(s, 0.15).size() == 1);
}

TEST_CASE("cabinet adjacency picks exactly the body-drawer pairs") {
  Rng rng(21);
  // body back panel; two drawers touch it, drawers are 0.2 apart
  Shape s;
  s.id = "cab";
  s.root = "root";
  PartNode root{"root", "", {"body", "d1", "d2"}, {}, {}};
  PartNode body{"body", "", {}, sample_box_surface(rng, {0, 0, 0}, {1.0, 0.1, 1.0}, 600), {}};
  PartNode d1{"d1", "", {}, sample_box_surface(rng, {0.05, 0.1, 0.05}, {0.95, 0.5, 0.35}, 600), {}};
  PartNode d2{"d2", "", {}, sample_box_surface(rng, {0.05, 0.1, 0.55}, {0.95, 0.5, 0.85}, 600), {}};
  s.nodes = {root, body, d1, d2};
  s.rebuild_index();

  const auto pairs = detect_adjacency(s, 0.02);

  // brute-force oracle over all sibling pairs
  auto brute_min = [&](const char* x, const char* y) {
    double best = 1e300;
    for (const auto& p : s.at(x).points)
      for (const auto& q : s.at(y).points) best = std::min(best, (p - q).norm());
    return best;
  };
  CHECK(brute_min("body", "d1") < 0.02);
  CHECK(brute_min("body", "d2") < 0.02);
  CHECK(brute_min("d1", "d2") > 0.15);

  REQUIRE(pairs.size() == 2);
  for (const auto& p : pairs) {
    CHECK(p.a == "body");
    CHECK((p.b == "d1" || p.b == "d2"));
  }
}

TEST_CASE("interaction region of crossed slabs sits near the crossing") {
  Rng rng(31);
  // two long thin slabs crossing at the origin, touching in y
  const auto movable = sample_box_surface(rng, {-0.5, -0.02, -0.05}, {0.5, 0.0, 0.05}, 1500);
  auto reference = sample_box_surface(rng, {-0.05, 0.0, -0.5}, {0.05, 0.02, 0.5}, 1500);
  const auto c = interaction_region(movable, reference, 0.03);
  REQUIRE(c.has_value());
  CHECK(std::fabs(c->x) < 0.08);
  CHECK(std::fabs(c->z) < 0.08);

  SUBCASE("far apart sets have no interaction region") {
    for (auto& p : reference) p.y += 5.0;
    CHECK(!interaction_region(movable, reference, 0.01).has_value());
  }

  SUBCASE("fully-near movable reduces to its centroid") {
    std::vector<Vec3> small{{0.0, 0.0, 0.0}, {0.01, 0.0, 0.0}, {0.0, 0.01, 0.0}};
    const auto cc = interaction_region(small, small, 1.0);
    REQUIRE(cc.has_value());
    Vec3 mean{0, 0, 0};
    for (const auto& p : small) mean += p;
    mean = mean / 3.0;
    CHECK((*cc - mean).norm() < 1e-12);
  }
}

TEST_CASE("apply_motion basics") {
  const MotionParams rot = MotionParams::with_axis(MotionType::R_V_S, {0, 0, 1}, {0, 0, 0});
  const auto out = apply_motion({{1, 0, 0}}, rot, kPi / 2);
  CHECK((out[0] - Vec3{0, 1, 0}).norm() < 1e-12);

  const MotionParams slide = MotionParams::prismatic(MotionType::P_V, {0, 0, 1});
  const auto out2 = apply_motion({{0.2, 0.4, 0.1}, {0.5, 0.5, 0.9}}, slide, 0.3);
  CHECK(out2[0].z == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(out2[1].z == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(out2[0].x == doctest::Approx(0.2));

  CHECK_THROWS_AS(apply_motion({{0, 0, 0}}, MotionParams::immobile(MotionType::Fixed), 1.0),
                  std::invalid_argument);
}

TEST_CASE("apply_motion is rigid, invertible, and identity at zero") {
  Rng rng(17);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 1000; ++i) {
    cloud.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  const MotionParams m = MotionParams::with_axis(
      MotionType::R_H_S, rng.unit_vector(), {rng.uniform(), rng.uniform(), rng.uniform()});

  const auto moved = apply_motion(cloud, m, 0.7);
  double worst = 0.0;
  for (int k = 0; k < 300; ++k) {
    const int i = static_cast<int>(rng.uniform_int(cloud.size()));
    const int j = static_cast<int>(rng.uniform_int(cloud.size()));
    worst = std::max(worst, std::fabs((cloud[i] - cloud[j]).norm() -
                                      (moved[i] - moved[j]).norm()));
  }
  CHECK(worst < 1e-9);

  const auto back = apply_motion(moved, m, -0.7);
  const auto same = apply_motion(cloud, m, 0.0);
  double max_back = 0.0, max_same = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    max_back = std::max(max_back, (back[i] - cloud[i]).norm());
    max_same = std::max(max_same, (same[i] - cloud[i]).norm());
  }
  CHECK(max_back < 1e-9);
  CHECK(max_same < 1e-12);
}

TEST_CASE("candidate axes of the unit cube") {
  OBB obb;
  obb.center = {0.5, 0.5, 0.5};
  obb.axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  obb.extents = {0.5, 0.5, 0.5};
  const auto cands = obb_candidate_axes(obb);
  REQUIRE(cands.size() == 15);

  int edge_count = 0, centroid_count = 0;
  std::vector<Vec3> z_edge_points;
  for (const auto& c : cands) {
    if (c.source.kind == CandidateSource::Kind::ObbEdge) {
      ++edge_count;
      if (line_angle_deg(c.line.dir, {0, 0, 1}) < 1e-9) {
        z_edge_points.push_back(c.line.point);
      }
    } else {
      ++centroid_count;
      CHECK((c.line.point - obb.center).norm() < 1e-12);
    }
  }
  CHECK(edge_count == 12);
  CHECK(centroid_count == 3);
  REQUIRE(z_edge_points.size() == 4);
  for (const Vec3 want : {Vec3{0, 0, 0.5}, Vec3{1, 0, 0.5}, Vec3{0, 1, 0.5}, Vec3{1, 1, 0.5}}) {
    bool found = false;
    for (const auto& p : z_edge_points) {
      if ((Vec3{p.x, p.y, 0.5} - want).norm() < 1e-9) found = true;
    }
    CHECK(found);
  }

  SUBCASE("candidate set is rotation-equivariant") {
    const Mat3 R = Mat3::rotation(Vec3{0.36, 0.48, 0.8}.normalized(), 0.9);
    OBB rot = obb;
    for (int k = 0; k < 3; ++k) rot.axes[k] = R * obb.axes[k];
    rot.center = R * obb.center;
    const auto rc = obb_candidate_axes(rot);
    REQUIRE(rc.size() == 15);
    for (std::size_t i = 0; i < rc.size(); ++i) {
      CHECK(line_angle_deg(rc[i].line.dir, R * cands[i].line.dir) < 1e-9);
      CHECK((rc[i].line.point - R * cands[i].line.point).norm() < 1e-9);
    }
  }
}

TEST_CASE("axis orientation classification") {
  const Vec3 up{0, 0, 1};
  CHECK(classify_axis_orientation({0, 0, 1}, up) == AxisOrientation::Vertical);
  CHECK(classify_axis_orientation({1, 0, 0}, up) == AxisOrientation::Horizontal);
  // exactly 45 degrees goes to vertical
  CHECK(classify_axis_orientation({1, 0, 1}, up) == AxisOrientation::Vertical);
  CHECK_THROWS_AS(classify_axis_orientation({0, 0, 0}, up), std::invalid_argument);

  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 d = rng.unit_vector();
    CHECK(classify_axis_orientation(d, up) == classify_axis_orientation(-d, up));
  }
}

TEST_CASE("filter_candidates_by_type on the cube") {
  OBB obb;
  obb.center = {0.5, 0.5, 0.5};
  obb.axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  obb.extents = {0.5, 0.5, 0.5};
  const auto cands = obb_candidate_axes(obb);
  const Vec3 up{0, 0, 1};

  SUBCASE("R_V_S keeps the 4 vertical edges") {
    const auto out = filter_candidates_by_type(cands, MotionType::R_V_S, obb, {}, up);
    REQUIRE(out.size() == 4);
    for (const auto& c : out) {
      CHECK(c.source.kind == CandidateSource::Kind::ObbEdge);
      CHECK(line_angle_deg(c.line.dir, up) < 1e-9);
    }
  }

  SUBCASE("R_H_C with interaction centroid gives 2 + 2") {
    const Vec3 inter{0.2, 0.3, 0.4};
    const auto out = filter_candidates_by_type(cands, MotionType::R_H_C, obb, inter, up);
    REQUIRE(out.size() == 4);
    int centroid = 0, interaction = 0;
    for (const auto& c : out) {
      CHECK(line_angle_deg(c.line.dir, up) > 89.0);
      if (c.source.kind == CandidateSource::Kind::ObbCentroid) ++centroid;
      if (c.source.kind == CandidateSource::Kind::InteractionCentroid) {
        ++interaction;
        CHECK((c.line.point - inter).norm() < 1e-12);
      }
    }
    CHECK(centroid == 2);
    CHECK(interaction == 2);
  }

  SUBCASE("P_V collapses to the single vertical direction") {
    const auto out = filter_candidates_by_type(cands, MotionType::P_V, obb, {}, up);
    REQUIRE(out.size() == 1);
    CHECK(line_angle_deg(out[0].line.dir, up) < 1e-9);
  }

  SUBCASE("immobile type is an error") {
    CHECK_THROWS_AS(filter_candidates_by_type(cands, MotionType::Fixed, obb, {}, up),
                    std::invalid_argument);
  }
}

TEST_CASE("point to line distance") {
  const Line z{{0, 0, 1}, {0, 0, 0}};
  CHECK(point_to_line_distance({1, 0, 0}, z) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(point_to_line_distance({0, 0, 5}, z) == doctest::Approx(0.0));
  const Line z_off{{0, 0, 1}, {1, 0, 0}};
  CHECK(point_to_line_distance({1, 1, 0}, z_off) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("line to line distance against the sampling oracle") {
  const Line z{{0, 0, 1}, {0, 0, 0}};
  const Line z_shift{{0, 0, 1}, {0.3, 0, 0}};
  CHECK(line_to_line_distance(z, z_shift) == doctest::Approx(0.3).epsilon(1e-12));

  const Line x{{1, 0, 0}, {0, 0, 0}};
  CHECK(line_to_line_distance(z, x) == doctest::Approx(0.0));

  const Line skew{{1, 0, 0}, {0, 0.4, 1}};
  const double oracle = line_distance_oracle(z, skew);
  CHECK(std::fabs(oracle - 0.4) < 1e-3);
  CHECK(line_to_line_distance(z, skew) == doctest::Approx(0.4).epsilon(1e-12));

  Rng rng(99);
  for (int i = 0; i < 10; ++i) {
    Line a{rng.unit_vector(), {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}};
    Line b{rng.unit_vector(), {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}};
    // the bounded-grid oracle needs a clear angle between the lines
    while (line_angle_deg(a.dir, b.dir) < 5.0) b.dir = rng.unit_vector();
    const double got = line_to_line_distance(a, b);
    const double want = line_distance_oracle(a, b);
    CHECK(std::fabs(got - want) < 1e-3);
    CHECK(line_to_line_distance(b, a) == doctest::Approx(got).epsilon(1e-12));
  }
}
