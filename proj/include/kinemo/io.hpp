#pragma once

#include <stdexcept>
#include <string>

#include "kinemo/shape.hpp"

namespace kinemo {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Load a shape file, apply unit-cube normalization, and validate. Throws
/// ParseError on malformed input, ValidationError when the hierarchy
/// invariants fail.
Shape load_shape(const std::string& path);

/// Write the shape in its current (normalized) frame. OBBs are included per
/// node only when `with_obb` and the node has one.
void save_shape(const Shape& shape, const std::string& path,
                bool with_obb = false);

/// Ground-truth annotations; edges come back with `gt` filled.
AnnotationSet load_annotations(const std::string& path);
void save_annotations(const AnnotationSet& set, const std::string& path);

/// Prediction files share the annotation schema plus per-edge score fields;
/// in coarse mode the type vocabulary is the 5-way one.
struct PredEdge {
  std::string src;
  std::string ref;
  std::optional<MotionType> type_fine;
  std::optional<CoarseType> type_coarse;
  std::optional<Vec3> dir;
  std::optional<Vec3> pos;
  std::optional<double> score, s_f, s_d, s_p;
  std::optional<std::string> candidate_source;
};

struct PredictionSet {
  std::string shape_id;
  std::vector<PredEdge> edges;
};

PredictionSet load_predictions(const std::string& path);
void save_predictions(const PredictionSet& set, const std::string& path);

}  // namespace kinemo
