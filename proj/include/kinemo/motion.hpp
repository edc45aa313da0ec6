#pragma once

#include <optional>
#include <string>

#include "kinemo/linalg.hpp"

namespace kinemo {

/// The 10 edge types: joint class (P/R/PR) x axis orientation (H/V) x pivot
/// location (C/S) for revolute, plus Fixed and None for pairs without
/// relative motion. Enum order is the class index used by the type head.
enum class MotionType {
  P_H = 0,
  P_V = 1,
  R_H_C = 2,
  R_H_S = 3,
  R_V_C = 4,
  R_V_S = 5,
  PR_H = 6,
  PR_V = 7,
  Fixed = 8,
  None = 9,
};

constexpr int kNumMotionTypes = 10;

/// Collapsed 5-way taxonomy for the coarse-mode ablation.
enum class CoarseType { P = 0, R = 1, PR = 2, Fixed = 3, None = 4 };

constexpr int kNumCoarseTypes = 5;

const char* to_string(MotionType t);
const char* to_string(CoarseType t);
std::optional<MotionType> parse_motion_type(const std::string& s);
std::optional<CoarseType> parse_coarse_type(const std::string& s);

CoarseType to_coarse(MotionType t);

inline bool is_mobile(MotionType t) {
  return t != MotionType::Fixed && t != MotionType::None;
}
inline bool is_mobile(CoarseType t) {
  return t != CoarseType::Fixed && t != CoarseType::None;
}

/// True for types whose axis has a meaningful pivot point.
inline bool has_pivot(MotionType t) {
  switch (t) {
    case MotionType::R_H_C:
    case MotionType::R_H_S:
    case MotionType::R_V_C:
    case MotionType::R_V_S:
    case MotionType::PR_H:
    case MotionType::PR_V:
      return true;
    default:
      return false;
  }
}

inline bool is_prismatic(MotionType t) {
  return t == MotionType::P_H || t == MotionType::P_V;
}
inline bool is_revolute(MotionType t) {
  return t == MotionType::R_H_C || t == MotionType::R_H_S ||
         t == MotionType::R_V_C || t == MotionType::R_V_S;
}
inline bool is_pr(MotionType t) {
  return t == MotionType::PR_H || t == MotionType::PR_V;
}

/// Motion parameters (t, d, p). dir/pos are absent exactly when the type
/// ignores them: both for Fixed/None, pos additionally for P_H/P_V.
struct MotionParams {
  MotionType mtype = MotionType::None;
  std::optional<Vec3> dir;
  std::optional<Vec3> pos;

  static MotionParams immobile(MotionType t) { return MotionParams{t, {}, {}}; }
  static MotionParams prismatic(MotionType t, const Vec3& d) {
    return MotionParams{t, d, {}};
  }
  static MotionParams with_axis(MotionType t, const Vec3& d, const Vec3& p) {
    return MotionParams{t, d, p};
  }

  bool dir_meaningful() const { return is_mobile(mtype); }
  bool pos_meaningful() const { return has_pivot(mtype); }
};

/// Sign-canonical form of an undirected axis direction: nonnegative dot with
/// `up`, ties broken toward nonnegative x then y. GT directions are stored
/// this way so regression targets are unambiguous.
Vec3 canonicalize_dir(const Vec3& dir, const Vec3& up);

}  // namespace kinemo
