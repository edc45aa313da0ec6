#pragma once

#include <string>
#include <vector>

#include "kinemo/config.hpp"
#include "kinemo/io.hpp"
#include "kinemo/refine.hpp"

namespace kinemo {

struct PipelineOptions {
  Config config;
  bool refine_obb = true;  // false: keep the raw network axes
};

/// Full per-shape result: raw per-edge predictions (with the refined axis
/// substituted on each mobility node's primary edge) and the scored tree.
struct ShapeResult {
  std::string shape_id;
  std::string category;
  std::vector<SiblingEdge> edges;
  std::vector<EdgePrediction> raw;  // head outputs for every edge
  MobilityTree tree;
  TypeMode mode = TypeMode::Fine;
  bool kept = false;
};

/// predict -> prune/merge -> score (select_axis or raw-axis scoring) ->
/// threshold filter for one shape.
ShapeResult run_shape_pipeline(const ShapeContext& ctx, const GnnModel& gnn,
                               const FeasScorer& scorer,
                               const PipelineOptions& opt);

/// Complete per-edge dump (evaluation input).
PredictionSet prediction_dump(const ShapeResult& result);

/// Node-level pseudo labels (one edge per part of each movable group).
PredictionSet pseudo_labels(const ShapeResult& result);

/// OBJ + MTL export: part point clouds as colored vertices plus one polyline
/// per motion axis.
void export_obj(const Shape& shape, const PredictionSet& preds,
                const std::string& path);

}  // namespace kinemo
