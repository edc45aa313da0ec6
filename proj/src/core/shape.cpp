#include "kinemo/shape.hpp"

#include <limits>
#include <set>
#include <stdexcept>

namespace kinemo {

const PartNode& Shape::at(const std::string& node_id) const {
  const PartNode* n = find(node_id);
  if (!n) throw std::out_of_range("unknown part id: " + node_id);
  return *n;
}

void Shape::rebuild_index() {
  index.clear();
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    index.emplace(nodes[i].id, i);
  }
}

std::unordered_map<std::string, std::string> Shape::parent_map() const {
  std::unordered_map<std::string, std::string> parents;
  for (const auto& n : nodes) {
    for (const auto& c : n.children) parents[c] = n.id;
  }
  return parents;
}

std::vector<std::string> Shape::leaf_descendants(
    const std::string& node_id) const {
  std::vector<std::string> out;
  std::vector<std::string> stack{node_id};
  std::set<std::string> seen;  // guards against malformed cycles
  while (!stack.empty()) {
    const std::string cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    const PartNode* n = find(cur);
    if (!n) continue;
    if (n->is_leaf()) {
      out.push_back(cur);
    } else {
      for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
        stack.push_back(*it);
      }
    }
  }
  return out;
}

std::vector<Vec3> Shape::collect_points(const std::string& node_id) const {
  std::vector<Vec3> pts;
  for (const auto& leaf : leaf_descendants(node_id)) {
    const auto& p = at(leaf).points;
    pts.insert(pts.end(), p.begin(), p.end());
  }
  return pts;
}

namespace {

bool coplanar_or_fewer(const std::vector<Vec3>& pts) {
  if (pts.size() < 4) return true;
  // find a non-degenerate triangle, then look for a point off its plane
  const Vec3& a = pts[0];
  for (std::size_t i = 1; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Vec3 n = (pts[i] - a).cross(pts[j] - a);
      if (n.norm2() < 1e-20) continue;
      const Vec3 un = n.normalized();
      for (std::size_t k = 1; k < pts.size(); ++k) {
        if (std::fabs((pts[k] - a).dot(un)) > 1e-9) return false;
      }
      return true;
    }
  }
  return true;
}

}  // namespace

std::vector<Violation> validate_hierarchy(const Shape& shape) {
  std::vector<Violation> out;
  std::set<std::string> ids;
  for (const auto& n : shape.nodes) {
    if (!ids.insert(n.id).second) {
      out.push_back({n.id, "duplicate node id"});
    }
  }
  if (!shape.find(shape.root)) {
    out.push_back({shape.root, "root id not present among nodes"});
    return out;
  }

  std::unordered_map<std::string, int> parent_count;
  for (const auto& n : shape.nodes) {
    std::set<std::string> child_seen;
    for (const auto& c : n.children) {
      if (!shape.find(c)) {
        out.push_back({n.id, "child id does not exist: " + c});
        continue;
      }
      if (!child_seen.insert(c).second) {
        out.push_back({n.id, "duplicate child reference: " + c});
      }
      parent_count[c]++;
    }
  }
  for (const auto& [id, cnt] : parent_count) {
    if (cnt > 1) out.push_back({id, "node has multiple parents"});
    if (id == shape.root) out.push_back({id, "cycle: root listed as a child"});
  }
  for (const auto& n : shape.nodes) {
    if (n.id != shape.root && parent_count.find(n.id) == parent_count.end()) {
      out.push_back({n.id, "orphan node (unreachable from root)"});
    }
  }

  // reachability + cycle detection from the root
  {
    std::set<std::string> visited;
    std::vector<std::string> stack{shape.root};
    bool cycle = false;
    while (!stack.empty() && !cycle) {
      const std::string cur = stack.back();
      stack.pop_back();
      if (!visited.insert(cur).second) {
        cycle = true;
        out.push_back({cur, "cycle: node reachable twice from root"});
        break;
      }
      const PartNode* n = shape.find(cur);
      if (!n) continue;
      for (const auto& c : n->children) stack.push_back(c);
    }
  }

  for (const auto& n : shape.nodes) {
    if (n.is_leaf()) {
      if (n.points.empty()) {
        out.push_back({n.id, "leaf without points"});
      } else if (n.points.size() < 4 || coplanar_or_fewer(n.points)) {
        out.push_back({n.id, "leaf needs >= 4 non-coplanar points"});
      }
      for (const auto& p : n.points) {
        if (!p.is_finite()) {
          out.push_back({n.id, "non-finite point"});
          break;
        }
      }
      for (const auto& p : n.points) {
        if (p.x < -1e-9 || p.x > 1 + 1e-9 || p.y < -1e-9 || p.y > 1 + 1e-9 ||
            p.z < -1e-9 || p.z > 1 + 1e-9) {
          out.push_back({n.id, "points outside the unit cube"});
          break;
        }
      }
    } else if (!n.points.empty()) {
      out.push_back({n.id, "internal node carries points"});
    }
  }
  return out;
}

void normalize_shape(Shape& shape) {
  Vec3 lo{std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = -lo;
  bool any = false;
  for (const auto& n : shape.nodes) {
    for (const auto& p : n.points) {
      any = true;
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
  }
  if (!any) return;
  const Vec3 extent = hi - lo;
  const double longest = std::max({extent.x, extent.y, extent.z});
  const double s = longest > 0 ? 1.0 / longest : 1.0;
  Vec3 offset;
  for (int k = 0; k < 3; ++k) {
    offset[k] = (1.0 - extent[k] * s) * 0.5 - lo[k] * s;
  }
  for (auto& n : shape.nodes) {
    for (auto& p : n.points) p = p * s + offset;
  }
  // compose with whatever transform was already recorded
  shape.norm.offset = shape.norm.offset * s + offset;
  shape.norm.scale *= s;
}

}  // namespace kinemo
