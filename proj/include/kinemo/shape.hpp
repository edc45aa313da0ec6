#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kinemo/motion.hpp"
#include "kinemo/obb.hpp"

namespace kinemo {

/// One part of the segmentation hierarchy. Leaves carry surface points;
/// internal nodes only structure. OBBs are filled by the geometry pass.
struct PartNode {
  std::string id;
  std::string label;
  std::vector<std::string> children;
  std::vector<Vec3> points;  // leaves only
  std::optional<OBB> obb;

  bool is_leaf() const { return children.empty(); }
};

/// Uniform scale + translation applied at load so every shape lives in the
/// unit cube. Kept so predictions can be mapped back to file coordinates.
struct NormTransform {
  double scale = 1.0;
  Vec3 offset{0, 0, 0};  // normalized = original * scale + offset

  Vec3 to_normalized(const Vec3& p) const { return p * scale + offset; }
  Vec3 to_original(const Vec3& p) const { return (p - offset) / scale; }
};

struct Shape {
  std::string id;
  std::string category;
  std::string root;
  std::vector<PartNode> nodes;  // file order
  Vec3 up_axis{0, 0, 1};
  NormTransform norm;

  std::unordered_map<std::string, int> index;  // id -> position in nodes

  const PartNode* find(const std::string& node_id) const {
    auto it = index.find(node_id);
    return it == index.end() ? nullptr : &nodes[it->second];
  }
  PartNode* find(const std::string& node_id) {
    auto it = index.find(node_id);
    return it == index.end() ? nullptr : &nodes[it->second];
  }
  const PartNode& at(const std::string& node_id) const;

  void rebuild_index();

  /// Parent id of every non-root node (empty string for the root).
  std::unordered_map<std::string, std::string> parent_map() const;

  /// Leaf ids under `node_id` (the node itself when it is a leaf), in
  /// hierarchy order.
  std::vector<std::string> leaf_descendants(const std::string& node_id) const;

  /// Union of descendant leaf points, in hierarchy order.
  std::vector<Vec3> collect_points(const std::string& node_id) const;
};

/// A directed candidate relation between two parts sharing a parent.
/// `src` is the movable candidate, `ref` the reference part.
struct SiblingEdge {
  std::string src;
  std::string ref;
  std::optional<MotionParams> gt;
  std::optional<MotionParams> pred;
  std::optional<std::vector<double>> pred_logits;  // 10 entries (fine mode)
  std::optional<CoarseType> pred_coarse;           // coarse mode only
  std::optional<double> pred_type_prob;            // probability of argmax class
};

struct AnnotationSet {
  std::string shape_id;
  std::vector<SiblingEdge> edges;
};

struct Violation {
  std::string node_id;
  std::string message;
};

/// Structural checks for the Shape invariants: single rooted tree, unique
/// ids, leaves with enough points, internal nodes without points, points in
/// the unit cube. Violations are data, not errors.
std::vector<Violation> validate_hierarchy(const Shape& shape);

/// Normalize in place: uniform scale (longest extent -> 1), centered in
/// [0,1]^3. Composes with any previously recorded transform. Idempotent.
void normalize_shape(Shape& shape);

}  // namespace kinemo
