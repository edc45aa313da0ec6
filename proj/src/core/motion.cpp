#include "kinemo/motion.hpp"

#include <array>

namespace kinemo {

namespace {
constexpr std::array<const char*, kNumMotionTypes> kMotionNames = {
    "P_H", "P_V", "R_H_C", "R_H_S", "R_V_C", "R_V_S", "PR_H", "PR_V",
    "Fixed", "None"};
constexpr std::array<const char*, kNumCoarseTypes> kCoarseNames = {
    "P", "R", "PR", "Fixed", "None"};
}  // namespace

const char* to_string(MotionType t) {
  return kMotionNames[static_cast<int>(t)];
}

const char* to_string(CoarseType t) {
  return kCoarseNames[static_cast<int>(t)];
}

std::optional<MotionType> parse_motion_type(const std::string& s) {
  for (int i = 0; i < kNumMotionTypes; ++i) {
    if (s == kMotionNames[i]) return static_cast<MotionType>(i);
  }
  return std::nullopt;
}

std::optional<CoarseType> parse_coarse_type(const std::string& s) {
  for (int i = 0; i < kNumCoarseTypes; ++i) {
    if (s == kCoarseNames[i]) return static_cast<CoarseType>(i);
  }
  return std::nullopt;
}

CoarseType to_coarse(MotionType t) {
  switch (t) {
    case MotionType::P_H:
    case MotionType::P_V:
      return CoarseType::P;
    case MotionType::R_H_C:
    case MotionType::R_H_S:
    case MotionType::R_V_C:
    case MotionType::R_V_S:
      return CoarseType::R;
    case MotionType::PR_H:
    case MotionType::PR_V:
      return CoarseType::PR;
    case MotionType::Fixed:
      return CoarseType::Fixed;
    case MotionType::None:
      return CoarseType::None;
  }
  return CoarseType::None;
}

Vec3 canonicalize_dir(const Vec3& dir, const Vec3& up) {
  const double du = dir.dot(up);
  if (du > 1e-9) return dir;
  if (du < -1e-9) return -dir;
  if (dir.x > 1e-9) return dir;
  if (dir.x < -1e-9) return -dir;
  if (dir.y >= 0.0) return dir;
  return -dir;
}

}  // namespace kinemo
