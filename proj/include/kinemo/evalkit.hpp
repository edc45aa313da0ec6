#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinemo/io.hpp"
#include "kinemo/motion.hpp"
#include "kinemo/shape.hpp"

namespace kinemo {

/// Undirected angle between two axis directions in degrees, in [0, 90].
double angle_error(const Vec3& gt_dir, const Vec3& pred_dir);

/// Minimum line-to-line distance between the GT axis and the prediction.
/// Only defined when the GT type has a pivot; prismatic GT throws.
double axis_distance_error(const MotionParams& gt, const MotionParams& pred);

struct EvalRecord {
  std::string shape_id;
  std::string edge_id;  // "src->ref"
  std::string category;
  MotionParams gt;
  std::optional<double> angle_err_deg;  // absent when GT is immobile
  std::optional<double> dist_err;       // absent for prismatic GT
  bool type_correct = false;
};

/// Matches prediction edges to GT edges by (src, ref) and computes the
/// per-edge metrics. Positions are mapped into the normalized frame through
/// the shape's recorded transform.
std::vector<EvalRecord> evaluate_shape(const Shape& shape,
                                       const AnnotationSet& gt,
                                       const PredictionSet& preds);

struct ReportRow {
  std::string category;
  int n_edges = 0;   // matched edges (type accuracy base)
  int n_angle = 0;   // edges with an angle error
  int n_dist = 0;    // edges with a distance error
  double type_accuracy = 0.0;
  std::optional<double> mean_angle, median_angle;
  std::optional<double> mean_dist, median_dist;
};

struct Report {
  std::vector<ReportRow> rows;  // per category, name-ordered
  ReportRow overall;
};

Report aggregate_report(const std::vector<EvalRecord>& records);

std::string render_text(const Report& report);
nlohmann::json report_json(const Report& report);

}  // namespace kinemo
