#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinemo/motion.hpp"
#include "kinemo/obb.hpp"
#include "kinemo/shape.hpp"

namespace kinemo {

enum class AxisOrientation { Horizontal, Vertical };

struct CandidateSource {
  enum class Kind { ObbEdge, ObbCentroid, InteractionCentroid };
  Kind kind = Kind::ObbEdge;
  int index = 0;  // edge 0..11, or axis 0..2 for the centroid kinds

  std::string to_string() const;
};

/// A candidate motion axis with its scores (filled by refinement).
struct CandidateAxis {
  Line line;
  CandidateSource source;
  double s_f = 0.0, s_d = 0.0, s_p = 0.0, s = 0.0;
};

struct ObbOptions {
  double min_extent = 0.01;
  double snap_angle_deg = 5.0;
  double symmetry_hausdorff = 0.02;
  bool refine = true;  // min-area rectangle sweeps after PCA + snapping
};

/// PCA-of-covariance OBB with up/symmetry axis snapping and a volume
/// refinement pass (coordinate descent over per-axis minimum-area
/// rectangles). Throws on fewer than 4 points.
OBB compute_obb(const std::vector<Vec3>& points, const Vec3& up = {0, 0, 1},
                const ObbOptions& opt = {});

struct AdjacentPair {
  std::string a, b;    // sibling part ids, a before b in the parent's order
  double min_dist = 0;  // between the two point sets
};

/// Sibling part pairs whose point sets come within `eps` of each other.
/// Internal parts use the union of their descendant leaf points.
std::vector<AdjacentPair> detect_adjacency(const Shape& shape, double eps);

/// Centroid of the movable points within `delta` of the reference set;
/// nullopt when no point is that close.
std::optional<Vec3> interaction_region(const std::vector<Vec3>& movable,
                                       const std::vector<Vec3>& reference,
                                       double delta);

/// Rigid motion: rotation by `amount` radians about the axis for R/PR types,
/// translation by `amount` * dir for P types. Throws for Fixed/None.
std::vector<Vec3> apply_motion(const std::vector<Vec3>& points,
                               const MotionParams& params, double amount);

/// The OBB's candidate axis pool: 12 edge lines (point = edge midpoint)
/// followed by 3 axes through the center. Edge order: axis index major,
/// then (-,-), (-,+), (+,-), (+,+) signs of the two cross axes.
std::vector<CandidateAxis> obb_candidate_axes(const OBB& obb);

/// Vertical iff the angle to `up` is <= 45 degrees or >= 135 degrees
/// (sign-agnostic; the 45-degree boundary counts as vertical).
AxisOrientation classify_axis_orientation(const Vec3& dir, const Vec3& up);

inline AxisOrientation type_orientation(MotionType t) {
  switch (t) {
    case MotionType::P_V:
    case MotionType::R_V_C:
    case MotionType::R_V_S:
    case MotionType::PR_V:
      return AxisOrientation::Vertical;
    default:
      return AxisOrientation::Horizontal;
  }
}

/// Candidates compatible with a fine motion type: orientation must match;
/// *_S keeps edge lines, *_C keeps center axes plus (when available) lines
/// through the interaction centroid, PR keeps all pivots, and P_* collapses
/// to one candidate per matching axis direction.
std::vector<CandidateAxis> filter_candidates_by_type(
    const std::vector<CandidateAxis>& candidates, MotionType mtype,
    const OBB& movable_obb, const std::optional<Vec3>& interaction_centroid,
    const Vec3& up);

/// Coarse variant: no orientation or pivot-location constraint, only the
/// joint class (P keeps directions, R/PR keep every pivot candidate).
std::vector<CandidateAxis> filter_candidates_coarse(
    const std::vector<CandidateAxis>& candidates, CoarseType ctype,
    const OBB& movable_obb, const std::optional<Vec3>& interaction_centroid);

double point_to_line_distance(const Vec3& p, const Line& line);
double line_to_line_distance(const Line& a, const Line& b);
Vec3 closest_point_on_line(const Line& line, const Vec3& p);

/// Undirected angle between two axis directions, in [0, 90] degrees.
double line_angle_deg(const Vec3& a, const Vec3& b);

}  // namespace kinemo
