#include "kinemo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "kinemo/kernels.hpp"

namespace kinemo {

static_assert(sizeof(Vec3) == 3 * sizeof(double), "Vec3 must be tightly packed");

namespace {

const double* flat(const std::vector<Vec3>& pts) {
  return reinterpret_cast<const double*>(pts.data());
}

// Jacobi eigensolver for a symmetric 3x3 matrix. Returns eigenvalues and
// the corresponding unit eigenvectors as matrix columns.
void eigen_symmetric3(const Mat3& m_in, std::array<double, 3>& vals, Mat3& vecs) {
  Mat3 a = m_in;
  vecs = Mat3::identity();
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = std::fabs(a(0, 1)) + std::fabs(a(0, 2)) + std::fabs(a(1, 2));
    if (off < 1e-15) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::fabs(a(p, q)) < 1e-18) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Mat3 r = Mat3::identity();
        r(p, p) = c;
        r(q, q) = c;
        r(p, q) = s;
        r(q, p) = -s;
        a = r.transposed() * a * r;
        vecs = vecs * r;
      }
    }
  }
  for (int k = 0; k < 3; ++k) vals[k] = a(k, k);
}

struct Hull2d {
  std::vector<std::pair<double, double>> pts;
};

double cross2(const std::pair<double, double>& o, const std::pair<double, double>& a,
              const std::pair<double, double>& b) {
  return (a.first - o.first) * (b.second - o.second) -
         (a.second - o.second) * (b.first - o.first);
}

Hull2d convex_hull(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const int n = static_cast<int>(pts.size());
  if (n < 3) return {pts};
  std::vector<std::pair<double, double>> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return {hull};
}

/// Angle (in [-pi/2, pi/2)) of the minimum-area enclosing rectangle of the
/// projected points. The optimum aligns with a hull edge.
double min_area_rect_angle(const std::vector<std::pair<double, double>>& pts) {
  const Hull2d hull = convex_hull(pts);
  const auto& h = hull.pts;
  if (h.size() < 2) return 0.0;
  if (h.size() == 2) {
    return std::atan2(h[1].second - h[0].second, h[1].first - h[0].first);
  }
  double best_area = std::numeric_limits<double>::infinity();
  double best_angle = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& a = h[i];
    const auto& b = h[(i + 1) % h.size()];
    const double ex = b.first - a.first, ey = b.second - a.second;
    const double len = std::hypot(ex, ey);
    if (len < 1e-15) continue;
    const double ux = ex / len, uy = ey / len;
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : h) {
      const double u = p.first * ux + p.second * uy;
      const double v = -p.first * uy + p.second * ux;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      best_angle = std::atan2(uy, ux);
    }
  }
  // fold into [-pi/2, pi/2)
  while (best_angle >= kPi / 2) best_angle -= kPi;
  while (best_angle < -kPi / 2) best_angle += kPi;
  return best_angle;
}

void orthonormalize(std::array<Vec3, 3>& axes) {
  axes[0] = axes[0].normalized();
  axes[1] = (axes[1] - axes[0] * axes[1].dot(axes[0])).normalized();
  axes[2] = axes[0].cross(axes[1]);
}

/// One-sided Hausdorff distance from the cloud reflected through the plane
/// (normal n through c) back to the cloud, on a deterministic subsample.
double reflection_hausdorff(const std::vector<Vec3>& pts, const Vec3& c,
                            const Vec3& n) {
  const int stride = std::max<std::size_t>(1, pts.size() / 256);
  std::vector<Vec3> sub;
  sub.reserve(pts.size() / stride + 1);
  for (std::size_t i = 0; i < pts.size(); i += stride) sub.push_back(pts[i]);
  std::vector<Vec3> reflected(sub.size());
  for (std::size_t i = 0; i < sub.size(); ++i) {
    reflected[i] = sub[i] - n * (2.0 * (sub[i] - c).dot(n));
  }
  std::vector<double> d2(sub.size());
  kernels::nearest_dist2(flat(reflected), static_cast<int>(reflected.size()),
                         flat(sub), static_cast<int>(sub.size()), d2.data());
  double worst = 0.0;
  for (double v : d2) worst = std::max(worst, v);
  return std::sqrt(worst);
}

/// Rotate the two axes other than `fixed_axis` so the projected bounding
/// rectangle has minimum area. Optimal for the fixed axis (the minimum-area
/// rectangle aligns with a hull edge).
void refine_about_axis(std::array<Vec3, 3>& axes, int fixed_axis,
                       const std::vector<Vec3>& pts, const Vec3& centroid) {
  const int j = (fixed_axis + 1) % 3, k = (fixed_axis + 2) % 3;
  std::vector<std::pair<double, double>> proj;
  proj.reserve(pts.size());
  for (const auto& p : pts) {
    const Vec3 d = p - centroid;
    proj.emplace_back(d.dot(axes[j]), d.dot(axes[k]));
  }
  const double ang = min_area_rect_angle(proj);
  const double c = std::cos(ang), s = std::sin(ang);
  const Vec3 nj = axes[j] * c + axes[k] * s;
  const Vec3 nk = axes[j] * (-s) + axes[k] * c;
  axes[j] = nj.normalized();
  axes[k] = nk.normalized();
}

double frame_volume(const std::array<Vec3, 3>& axes, const std::vector<Vec3>& pts,
                    const Vec3& centroid) {
  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : pts) {
    const Vec3 d = p - centroid;
    for (int k = 0; k < 3; ++k) {
      const double v = d.dot(axes[k]);
      lo[k] = std::min(lo[k], v);
      hi[k] = std::max(hi[k], v);
    }
  }
  return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
}

/// Frame with the given first axis; the other two come from the exact
/// minimum-area rectangle of the projections, so the frame is volume-optimal
/// among all frames containing `w`.
std::array<Vec3, 3> calipers_frame(const Vec3& w, const std::vector<Vec3>& pts,
                                   const Vec3& centroid) {
  std::array<Vec3, 3> axes;
  axes[0] = w.normalized();
  axes[1] = any_orthogonal(axes[0]);
  axes[2] = axes[0].cross(axes[1]);
  refine_about_axis(axes, 0, pts, centroid);
  return axes;
}

/// Per-axis coordinate descent stalls easily (hexagonal silhouettes are
/// per-axis optimal long before the volume is). Instead, try a spread of
/// candidate axes, solve the orthogonal plane exactly for each, and keep
/// the lowest-volume frame. Candidates are derived from the cloud (PCA axes
/// and calipers directions), so the result is rotation-equivariant.
std::array<Vec3, 3> best_axis_frame(const std::array<Vec3, 3>& pca,
                                    const Vec3& up,
                                    const std::vector<Vec3>& pts,
                                    const Vec3& centroid) {
  std::vector<Vec3> candidates(pca.begin(), pca.end());
  candidates.push_back(up);
  for (int i = 0; i < 3; ++i) {
    const auto frame = calipers_frame(pca[i], pts, centroid);
    candidates.push_back(frame[1]);
    candidates.push_back(frame[2]);
  }

  std::array<Vec3, 3> best = pca;
  double best_vol = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec3& w) {
    const auto frame = calipers_frame(w, pts, centroid);
    const double vol = frame_volume(frame, pts, centroid);
    if (vol < best_vol - 1e-12) {
      best_vol = vol;
      best = frame;
    }
  };
  for (const auto& w : candidates) consider(w);
  // one polish round from the winner's own axes
  const auto found = best;
  for (const auto& w : found) consider(w);
  return best;
}

}  // namespace

OBB compute_obb(const std::vector<Vec3>& points, const Vec3& up,
                const ObbOptions& opt) {
  if (points.size() < 4) {
    throw std::invalid_argument("compute_obb: need at least 4 points");
  }
  Vec3 centroid{0, 0, 0};
  for (const auto& p : points) centroid += p;
  centroid = centroid / static_cast<double>(points.size());

  Mat3 cov;
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    cov(0, 0) += d.x * d.x;
    cov(0, 1) += d.x * d.y;
    cov(0, 2) += d.x * d.z;
    cov(1, 1) += d.y * d.y;
    cov(1, 2) += d.y * d.z;
    cov(2, 2) += d.z * d.z;
  }
  cov(1, 0) = cov(0, 1);
  cov(2, 0) = cov(0, 2);
  cov(2, 1) = cov(1, 2);

  std::array<double, 3> evals;
  Mat3 evecs;
  eigen_symmetric3(cov, evals, evecs);
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return evals[a] > evals[b]; });
  std::array<Vec3, 3> axes{evecs.col(order[0]), evecs.col(order[1]),
                           evecs.col(order[2])};
  orthonormalize(axes);

  const Vec3 upn = up.normalized();
  const double snap_cos = std::cos(deg_to_rad(opt.snap_angle_deg));

  // symmetry-confirmed PCA axes are reliable box normals
  std::array<bool, 3> sym_pinned{false, false, false};
  for (int i = 0; i < 3; ++i) {
    if (reflection_hausdorff(points, centroid, axes[i]) < opt.symmetry_hausdorff) {
      sym_pinned[i] = true;
    }
  }

  if (opt.refine) {
    // frame search runs on a deterministic subsample; final extents use all
    // points
    std::vector<Vec3> sub;
    const int stride = std::max<std::size_t>(1, points.size() / 800);
    for (std::size_t i = 0; i < points.size(); i += stride) sub.push_back(points[i]);

    const int n_sym = sym_pinned[0] + sym_pinned[1] + sym_pinned[2];
    std::array<Vec3, 3> free_axes = axes;
    if (n_sym >= 2) {
      // frame already determined up to signs
    } else if (n_sym == 1) {
      // with one axis trusted, a single minimum-area step is exact
      const int fixed = sym_pinned[0] ? 0 : (sym_pinned[1] ? 1 : 2);
      refine_about_axis(free_axes, fixed, sub, centroid);
    } else {
      free_axes = best_axis_frame(axes, upn, sub, centroid);
    }

    // vertical snap: prefer the up-aligned frame, but only when it costs
    // essentially no volume, so genuinely tilted shapes stay tilted
    // (rotation equivariance would otherwise break near the snap angle)
    int near_up = -1;
    double best_dot = snap_cos;
    for (int i = 0; i < 3; ++i) {
      const double d = std::fabs(free_axes[i].dot(upn));
      if (d >= best_dot) {
        best_dot = d;
        near_up = i;
      }
    }
    if (near_up >= 0) {
      std::array<Vec3, 3> snapped = calipers_frame(upn, sub, centroid);
      if (frame_volume(snapped, sub, centroid) <=
          1.005 * frame_volume(free_axes, sub, centroid)) {
        free_axes = snapped;
      }
    }
    axes = free_axes;
  } else {
    // no refinement: still honor the vertical snap on the raw PCA frame
    int near_up = -1;
    double best_dot = snap_cos;
    for (int i = 0; i < 3; ++i) {
      const double d = std::fabs(axes[i].dot(upn));
      if (d >= best_dot) {
        best_dot = d;
        near_up = i;
      }
    }
    if (near_up >= 0) {
      axes[near_up] = axes[near_up].dot(upn) >= 0 ? upn : -upn;
      const int j = (near_up + 1) % 3, k = (near_up + 2) % 3;
      axes[j] = (axes[j] - axes[near_up] * axes[j].dot(axes[near_up])).normalized();
      axes[k] = axes[near_up].cross(axes[j]);
    }
  }

  // extents from projections
  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    for (int k = 0; k < 3; ++k) {
      const double v = d.dot(axes[k]);
      lo[k] = std::min(lo[k], v);
      hi[k] = std::max(hi[k], v);
    }
  }

  OBB obb;
  std::array<double, 3> ext;
  std::array<Vec3, 3> mid;
  for (int k = 0; k < 3; ++k) {
    ext[k] = std::max(0.5 * (hi[k] - lo[k]), opt.min_extent);
    mid[k] = axes[k] * (0.5 * (hi[k] + lo[k]));
  }
  obb.center = centroid + mid[0] + mid[1] + mid[2];

  // deterministic presentation: extents descending, canonical signs
  std::array<int, 3> ax_order{0, 1, 2};
  std::stable_sort(ax_order.begin(), ax_order.end(),
                   [&](int a, int b) { return ext[a] > ext[b]; });
  for (int k = 0; k < 3; ++k) {
    obb.axes[k] = canonicalize_dir(axes[ax_order[k]], upn);
    obb.extents[k] = ext[ax_order[k]];
  }
  return obb;
}

std::vector<AdjacentPair> detect_adjacency(const Shape& shape, double eps) {
  std::vector<AdjacentPair> out;
  std::map<std::string, std::vector<Vec3>> cache;
  auto points_of = [&](const std::string& id) -> const std::vector<Vec3>& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, shape.collect_points(id)).first;
    return it->second;
  };
  for (const auto& parent : shape.nodes) {
    const auto& kids = parent.children;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      for (std::size_t j = i + 1; j < kids.size(); ++j) {
        const auto& pa = points_of(kids[i]);
        const auto& pb = points_of(kids[j]);
        if (pa.empty() || pb.empty()) continue;
        const double d2 = kernels::min_dist2(flat(pa), static_cast<int>(pa.size()),
                                             flat(pb), static_cast<int>(pb.size()));
        const double d = std::sqrt(d2);
        if (d < eps) out.push_back({kids[i], kids[j], d});
      }
    }
  }
  return out;
}

std::optional<Vec3> interaction_region(const std::vector<Vec3>& movable,
                                       const std::vector<Vec3>& reference,
                                       double delta) {
  if (movable.empty() || reference.empty()) return std::nullopt;
  std::vector<double> d2(movable.size());
  kernels::nearest_dist2(flat(movable), static_cast<int>(movable.size()),
                         flat(reference), static_cast<int>(reference.size()),
                         d2.data());
  Vec3 sum{0, 0, 0};
  int count = 0;
  const double lim = delta * delta;
  for (std::size_t i = 0; i < movable.size(); ++i) {
    if (d2[i] <= lim) {
      sum += movable[i];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::vector<Vec3> apply_motion(const std::vector<Vec3>& points,
                               const MotionParams& params, double amount) {
  if (!is_mobile(params.mtype)) {
    throw std::invalid_argument("apply_motion: type has no motion");
  }
  if (!params.dir) throw std::invalid_argument("apply_motion: missing dir");
  const Vec3 dir = params.dir->normalized();

  Mat3 R = Mat3::identity();
  Vec3 t{0, 0, 0};
  if (is_prismatic(params.mtype)) {
    t = dir * amount;
  } else {
    // revolute (PR uses its revolute component)
    if (!params.pos) throw std::invalid_argument("apply_motion: missing pos");
    R = Mat3::rotation(dir, amount);
    t = *params.pos - R * (*params.pos);
  }
  std::vector<Vec3> out(points.size());
  if (!points.empty()) {
    kernels::transform_points(flat(points), static_cast<int>(points.size()),
                              R.m.data(), &t.x,
                              reinterpret_cast<double*>(out.data()));
  }
  return out;
}

std::string CandidateSource::to_string() const {
  switch (kind) {
    case Kind::ObbEdge:
      return "obb_edge_" + std::to_string(index);
    case Kind::ObbCentroid:
      return "obb_centroid_" + std::to_string(index);
    case Kind::InteractionCentroid:
      return "interaction_" + std::to_string(index);
  }
  return "?";
}

std::vector<CandidateAxis> obb_candidate_axes(const OBB& obb) {
  std::vector<CandidateAxis> out;
  out.reserve(15);
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    int idx = 0;
    for (const double sj : {-1.0, 1.0}) {
      for (const double sk : {-1.0, 1.0}) {
        CandidateAxis c;
        c.line.dir = obb.axes[i];
        c.line.point = obb.center + obb.axes[j] * (sj * obb.extents[j]) +
                       obb.axes[k] * (sk * obb.extents[k]);
        c.source = {CandidateSource::Kind::ObbEdge, i * 4 + idx};
        out.push_back(c);
        ++idx;
      }
    }
  }
  for (int i = 0; i < 3; ++i) {
    CandidateAxis c;
    c.line.dir = obb.axes[i];
    c.line.point = obb.center;
    c.source = {CandidateSource::Kind::ObbCentroid, i};
    out.push_back(c);
  }
  return out;
}

AxisOrientation classify_axis_orientation(const Vec3& dir, const Vec3& up) {
  const double dn = dir.norm(), un = up.norm();
  if (dn < 1e-12 || un < 1e-12) {
    throw std::invalid_argument("classify_axis_orientation: zero vector");
  }
  const double c = std::fabs(dir.dot(up)) / (dn * un);
  // 45 degrees exactly counts as vertical
  return c >= std::cos(kPi / 4) - 1e-12 ? AxisOrientation::Vertical
                                        : AxisOrientation::Horizontal;
}

namespace {

std::vector<CandidateAxis> interaction_candidates(
    const OBB& obb, const Vec3& centroid,
    const std::optional<AxisOrientation>& want, const Vec3& up) {
  std::vector<CandidateAxis> out;
  for (int i = 0; i < 3; ++i) {
    if (want && classify_axis_orientation(obb.axes[i], up) != *want) continue;
    CandidateAxis c;
    c.line.dir = obb.axes[i];
    c.line.point = centroid;
    c.source = {CandidateSource::Kind::InteractionCentroid, i};
    out.push_back(c);
  }
  return out;
}

std::vector<CandidateAxis> direction_candidates(
    const OBB& obb, const std::optional<AxisOrientation>& want, const Vec3& up) {
  std::vector<CandidateAxis> out;
  for (int i = 0; i < 3; ++i) {
    if (want && classify_axis_orientation(obb.axes[i], up) != *want) continue;
    CandidateAxis c;
    c.line.dir = obb.axes[i];
    c.line.point = obb.center;
    c.source = {CandidateSource::Kind::ObbCentroid, i};
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<CandidateAxis> filter_candidates_by_type(
    const std::vector<CandidateAxis>& candidates, MotionType mtype,
    const OBB& movable_obb, const std::optional<Vec3>& interaction_centroid,
    const Vec3& up) {
  if (!is_mobile(mtype)) {
    throw std::invalid_argument("filter_candidates_by_type: immobile type");
  }
  const AxisOrientation want = type_orientation(mtype);

  if (is_prismatic(mtype)) {
    // no pivot: one candidate per matching axis direction
    return direction_candidates(movable_obb, want, up);
  }

  std::vector<CandidateAxis> out;
  const bool side = mtype == MotionType::R_H_S || mtype == MotionType::R_V_S;
  const bool center = mtype == MotionType::R_H_C || mtype == MotionType::R_V_C;
  for (const auto& c : candidates) {
    if (classify_axis_orientation(c.line.dir, up) != want) continue;
    const bool is_edge = c.source.kind == CandidateSource::Kind::ObbEdge;
    if (side && !is_edge) continue;
    if (center && is_edge) continue;
    out.push_back(c);
  }
  if ((center || is_pr(mtype)) && interaction_centroid) {
    const auto extra =
        interaction_candidates(movable_obb, *interaction_centroid, want, up);
    out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

std::vector<CandidateAxis> filter_candidates_coarse(
    const std::vector<CandidateAxis>& candidates, CoarseType ctype,
    const OBB& movable_obb, const std::optional<Vec3>& interaction_centroid) {
  if (!is_mobile(ctype)) {
    throw std::invalid_argument("filter_candidates_coarse: immobile type");
  }
  if (ctype == CoarseType::P) {
    return direction_candidates(movable_obb, std::nullopt, {0, 0, 1});
  }
  std::vector<CandidateAxis> out = candidates;
  if (interaction_centroid) {
    const auto extra = interaction_candidates(movable_obb, *interaction_centroid,
                                              std::nullopt, {0, 0, 1});
    out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

double point_to_line_distance(const Vec3& p, const Line& line) {
  const double dn = line.dir.norm();
  return (p - line.point).cross(line.dir).norm() / dn;
}

double line_to_line_distance(const Line& a, const Line& b) {
  const Vec3 n = a.dir.cross(b.dir);
  const double nn = n.norm();
  if (nn < 1e-9) {
    return point_to_line_distance(b.point, a);  // parallel
  }
  return std::fabs((b.point - a.point).dot(n)) / nn;
}

Vec3 closest_point_on_line(const Line& line, const Vec3& p) {
  const Vec3 d = line.dir.normalized();
  return line.point + d * (p - line.point).dot(d);
}

double line_angle_deg(const Vec3& a, const Vec3& b) {
  const double an = a.norm(), bn = b.norm();
  if (an < 1e-12 || bn < 1e-12) {
    throw std::invalid_argument("line_angle_deg: zero vector");
  }
  const double c = std::min(1.0, std::fabs(a.dot(b)) / (an * bn));
  return rad_to_deg(std::acos(c));
}

}  // namespace kinemo
