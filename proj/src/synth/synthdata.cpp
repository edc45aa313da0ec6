#include "kinemo/synthdata.hpp"

#include <algorithm>
#include <functional>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "kinemo/geometry.hpp"
#include "kinemo/io.hpp"
#include "kinemo/rng.hpp"
#include "kinemo/threading.hpp"

namespace kinemo {

namespace fs = std::filesystem;
using nlohmann::json;

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

const std::vector<CategorySpec>& builtin_specs() {
  static const std::vector<CategorySpec> specs = {
      {"door_set", 1, 1},   {"laptop", 1, 1}, {"storage_furniture", 1, 4},
      {"scissors", 1, 1},   {"bottle", 1, 1},
  };
  return specs;
}

const CategorySpec* find_spec(const std::string& name) {
  for (const auto& s : builtin_specs()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

namespace {

/// Working representation while a shape is assembled: axis-aligned box leaf
/// parts plus exact joint lines, all in the build frame.
struct BuildPart {
  std::string id, label, parent;
  Vec3 lo, hi;  // exact box
};

struct BuildGroup {
  std::string id, label, parent;
};

struct BuildJoint {
  std::string src, ref;
  MotionType type = MotionType::None;
  Line axis;
};

struct BuildRelation {
  std::string a, b;
  MotionType type = MotionType::Fixed;  // Fixed or None, both directions
};

struct Builder {
  std::string root = "root";
  std::vector<BuildGroup> groups;  // includes the root
  std::vector<BuildPart> parts;
  std::vector<BuildJoint> joints;
  std::vector<BuildRelation> relations;

  Builder() { groups.push_back({"root", "root", ""}); }

  void add_group(const std::string& id, const std::string& label,
                 const std::string& parent) {
    groups.push_back({id, label, parent});
  }
  void add_part(const std::string& id, const std::string& label,
                const std::string& parent, const Vec3& lo, const Vec3& hi) {
    parts.push_back({id, label, parent, lo, hi});
  }
};

/// Exact bounding box of a build node (a part or the union of a group's
/// descendant parts).
OBB exact_box(const Builder& b, const std::string& id) {
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  bool found = false;
  // transitive membership via parent chains
  std::function<bool(const std::string&)> under = [&](const std::string& node) {
    if (node == id) return true;
    for (const auto& g : b.groups) {
      if (g.id == node && !g.parent.empty()) return under(g.parent);
    }
    for (const auto& p : b.parts) {
      if (p.id == node && !p.parent.empty()) return under(p.parent);
    }
    return false;
  };
  for (const auto& p : b.parts) {
    if (!under(p.id)) continue;
    found = true;
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p.lo[k]);
      hi[k] = std::max(hi[k], p.hi[k]);
    }
  }
  if (!found) throw std::logic_error("exact_box: unknown build node " + id);
  OBB obb;
  obb.center = (lo + hi) * 0.5;
  obb.axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  for (int k = 0; k < 3; ++k) obb.extents[k] = 0.5 * (hi[k] - lo[k]);
  return obb;
}

void build_door_set(Builder& b, Rng& rng) {
  const double fw = rng.uniform(0.05, 0.10);
  const double fd = rng.uniform(0.05, 0.09);
  const double h = rng.uniform(0.8, 1.0);
  const double w = rng.uniform(0.35, 0.6);
  const double t = rng.uniform(0.02, 0.04);
  const double ph = h * rng.uniform(0.88, 0.98);
  const double z0 = rng.uniform(0.0, h - ph);
  const double yc = 0.2;
  const bool handle = rng.bernoulli(0.5);

  b.add_part("frame", "frame", "root", {0, yc - fd / 2, 0}, {fw, yc + fd / 2, h});
  const std::string mover = handle ? "door" : "panel";
  if (handle) b.add_group("door", "door", "root");
  b.add_part("panel", "panel", handle ? "door" : "root",
             {fw, yc - t / 2, z0}, {fw + w, yc + t / 2, z0 + ph});
  if (handle) {
    const double hw = rng.uniform(0.02, 0.04);
    const double hd = rng.uniform(0.03, 0.06);
    const double hh = rng.uniform(0.08, 0.15);
    const double hx = fw + w - rng.uniform(0.06, 0.12);
    const double hz = z0 + ph * rng.uniform(0.4, 0.6);
    b.add_part("handle", "handle", "door", {hx - hw, yc + t / 2, hz - hh / 2},
               {hx, yc + t / 2 + hd, hz + hh / 2});
    b.relations.push_back({"panel", "handle", MotionType::Fixed});
  }

  // hinge: the movable box's vertical edge on the frame side
  const OBB box = exact_box(b, mover);
  BuildJoint j;
  j.src = mover;
  j.ref = "frame";
  j.type = MotionType::R_V_S;
  j.axis = {{0, 0, 1},
            {box.center.x - box.extents[0], box.center.y - box.extents[1],
             box.center.z}};
  b.joints.push_back(j);
}

void build_laptop(Builder& b, Rng& rng) {
  const double w = rng.uniform(0.5, 0.8);
  const double d = rng.uniform(0.35, 0.55);
  const double t = rng.uniform(0.02, 0.05);
  const double st = rng.uniform(0.015, 0.03);
  const double sh = rng.uniform(0.35, 0.6);

  b.add_part("base", "base", "root", {0, 0, 0}, {w, d, t});
  b.add_part("screen", "screen", "root", {0, d - st, t}, {w, d, t + sh});

  BuildJoint j;
  j.src = "screen";
  j.ref = "base";
  j.type = MotionType::R_H_S;
  j.axis = {{1, 0, 0}, {w / 2, d, t}};  // rear-bottom edge of the screen box
  b.joints.push_back(j);
}

void build_storage(Builder& b, Rng& rng) {
  const double w = rng.uniform(0.5, 0.9);
  const double d = rng.uniform(0.3, 0.5);
  const double h = rng.uniform(0.6, 1.0);
  b.add_part("body", "body", "root", {0, 0, 0}, {w, d, h});

  const bool with_door = rng.bernoulli(0.4);
  const int n_drawers = 1 + static_cast<int>(rng.uniform_int(3));
  const double mx = 0.05 * w;
  const double drawer_zone_lo = with_door ? h * 0.55 : h * 0.08;
  const double drawer_zone_hi = h * 0.95;

  double z = drawer_zone_lo;
  for (int i = 0; i < n_drawers; ++i) {
    const double avail = drawer_zone_hi - z;
    if (avail < 0.08) break;
    const double dh = std::min(avail, rng.uniform(0.08, 0.2));
    const double p = rng.uniform(0.03, 0.06);
    const std::string id = "drawer" + std::to_string(i);
    b.add_part(id, "drawer", "root", {mx, d, z}, {w - mx, d + p, z + dh});
    BuildJoint j;
    j.src = id;
    j.ref = "body";
    j.type = MotionType::P_H;
    j.axis = {{0, 1, 0}, exact_box(b, id).center};
    b.joints.push_back(j);
    z += dh + rng.uniform(0.005, 0.04);  // gaps straddle the adjacency eps
  }
  if (with_door) {
    const double dt = rng.uniform(0.02, 0.04);
    const double dz0 = h * 0.05, dz1 = h * rng.uniform(0.42, 0.5);
    const double dw = w * rng.uniform(0.6, 0.9);
    b.add_part("door", "door", "root", {mx, d, dz0}, {mx + dw, d + dt, dz1});
    BuildJoint j;
    j.src = "door";
    j.ref = "body";
    j.type = MotionType::R_V_S;
    const OBB box = exact_box(b, "door");
    j.axis = {{0, 0, 1},
              {box.center.x - box.extents[0], box.center.y - box.extents[1],
               box.center.z}};
    b.joints.push_back(j);
  }
  // drawers and the door are mutually isolated
  for (std::size_t i = 1; i < b.parts.size(); ++i) {
    for (std::size_t k = i + 1; k < b.parts.size(); ++k) {
      b.relations.push_back({b.parts[i].id, b.parts[k].id, MotionType::None});
    }
  }
}

void build_scissors(Builder& b, Rng& rng) {
  const double L = rng.uniform(0.7, 1.0);
  const double bh = rng.uniform(0.1, 0.16);
  const double bt = rng.uniform(0.015, 0.03);
  b.add_part("blade_a", "blade", "root", {-L / 2, -bt, -bh / 2}, {L / 2, 0, bh / 2});
  b.add_part("blade_b", "blade", "root", {-L / 2, 0, -bh / 2}, {L / 2, bt, bh / 2});

  BuildJoint j;
  j.src = "blade_a";
  j.ref = "blade_b";
  j.type = MotionType::R_H_C;
  j.axis = {{0, 1, 0}, exact_box(b, "blade_a").center};  // pivot at the crossing
  b.joints.push_back(j);
}

void build_bottle(Builder& b, Rng& rng) {
  const double bw = rng.uniform(0.25, 0.4);
  const double bh = rng.uniform(0.5, 0.8);
  const double cw = bw * rng.uniform(0.4, 0.6);
  const double ch = rng.uniform(0.08, 0.15);
  b.add_part("body", "body", "root", {-bw / 2, -bw / 2, 0}, {bw / 2, bw / 2, bh});
  b.add_part("cap", "cap", "root", {-cw / 2, -cw / 2, bh}, {cw / 2, cw / 2, bh + ch});

  BuildJoint j;
  j.src = "cap";
  j.ref = "body";
  j.type = MotionType::PR_V;
  j.axis = {{0, 0, 1}, exact_box(b, "cap").center};
  b.joints.push_back(j);
}

struct Frame {
  // p' = R (p - pivot) + pivot, then p'' = p' * scale + offset
  Mat3 R = Mat3::identity();
  Vec3 pivot{0, 0, 0};
  double scale = 1.0;
  Vec3 offset{0, 0, 0};

  Vec3 apply(const Vec3& p) const {
    return (R * (p - pivot) + pivot) * scale + offset;
  }
  Vec3 apply_dir(const Vec3& d) const { return R * d; }
  OBB apply(const OBB& box) const {
    OBB out;
    out.center = apply(box.center);
    for (int k = 0; k < 3; ++k) out.axes[k] = R * box.axes[k];
    for (int k = 0; k < 3; ++k) out.extents[k] = box.extents[k] * scale;
    return out;
  }
};

}  // namespace

GeneratedShape gen_shape(const CategorySpec& spec, std::uint64_t seed,
                         const SynthOptions& opt) {
  Rng rng(seed ^ 0x5ca1ab1e0ddba11ULL);
  Builder b;
  if (spec.name == "door_set") build_door_set(b, rng);
  else if (spec.name == "laptop") build_laptop(b, rng);
  else if (spec.name == "storage_furniture") build_storage(b, rng);
  else if (spec.name == "scissors") build_scissors(b, rng);
  else if (spec.name == "bottle") build_bottle(b, rng);
  else throw std::invalid_argument("unknown category: " + spec.name);

  // optional small whole-shape rotation
  Frame frame;
  if (opt.rot_aug_max_deg > 0) {
    Vec3 lo{1e300, 1e300, 1e300}, hi = -lo;
    for (const auto& p : b.parts) {
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p.lo[k]);
        hi[k] = std::max(hi[k], p.hi[k]);
      }
    }
    frame.pivot = (lo + hi) * 0.5;
    frame.R = Mat3::rotation(rng.unit_vector(),
                             deg_to_rad(rng.uniform(0.0, opt.rot_aug_max_deg)));
  }

  // sample leaf clouds in the build frame, then map everything
  std::vector<std::vector<Vec3>> clouds(b.parts.size());
  for (std::size_t i = 0; i < b.parts.size(); ++i) {
    Rng part_rng = rng.derive(1000 + i);
    clouds[i] = sample_box_surface(part_rng, b.parts[i].lo, b.parts[i].hi,
                                   opt.points_per_leaf);
  }

  // normalization: rotate first, then unit-cube fit
  Vec3 lo{1e300, 1e300, 1e300}, hi = -lo;
  for (const auto& cloud : clouds) {
    for (const auto& p : cloud) {
      const Vec3 q = frame.R * (p - frame.pivot) + frame.pivot;
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], q[k]);
        hi[k] = std::max(hi[k], q[k]);
      }
    }
  }
  const Vec3 extent = hi - lo;
  const double longest = std::max({extent.x, extent.y, extent.z});
  frame.scale = 1.0 / longest;
  for (int k = 0; k < 3; ++k) {
    frame.offset[k] = (1.0 - extent[k] * frame.scale) * 0.5 - lo[k] * frame.scale;
  }

  GeneratedShape out;
  out.shape.id = spec.name + "_" + std::to_string(seed);
  out.shape.category = spec.name;
  out.shape.root = b.root;
  out.shape.up_axis = {0, 0, 1};

  // nodes: groups first (root leads), then parts, children in declaration order
  for (const auto& g : b.groups) {
    PartNode node;
    node.id = g.id;
    node.label = g.label;
    out.shape.nodes.push_back(node);
  }
  for (std::size_t i = 0; i < b.parts.size(); ++i) {
    PartNode node;
    node.id = b.parts[i].id;
    node.label = b.parts[i].label;
    node.points.reserve(clouds[i].size());
    for (const auto& p : clouds[i]) node.points.push_back(frame.apply(p));
    out.shape.nodes.push_back(std::move(node));
  }
  out.shape.rebuild_index();
  auto attach = [&](const std::string& child, const std::string& parent) {
    out.shape.find(parent)->children.push_back(child);
  };
  for (std::size_t i = 1; i < b.groups.size(); ++i) {
    attach(b.groups[i].id, b.groups[i].parent);
  }
  for (const auto& p : b.parts) attach(p.id, p.parent);

  const auto violations = validate_hierarchy(out.shape);
  if (!violations.empty()) {
    throw std::logic_error("generator produced an invalid shape: " +
                           violations.front().message);
  }

  // annotations: joints, their Fixed reverses, and the extra relations
  out.annotations.shape_id = out.shape.id;
  const Vec3 up = out.shape.up_axis;
  for (const auto& j : b.joints) {
    const Vec3 dir = canonicalize_dir(frame.apply_dir(j.axis.dir).normalized(), up);
    const Vec3 pos = frame.apply(j.axis.point);

    // the GT axis must coincide with a candidate of the exact movable box
    const OBB movable_box = frame.apply(exact_box(b, j.src));
    bool coincides = false;
    for (const auto& cand : obb_candidate_axes(movable_box)) {
      const Line gt_line{dir, pos};
      if (line_angle_deg(cand.line.dir, dir) < 1e-7 &&
          line_to_line_distance(cand.line, gt_line) < 1e-9 &&
          point_to_line_distance(pos, cand.line) < 1e-9) {
        coincides = true;
        break;
      }
    }
    if (!coincides) {
      throw std::logic_error("generated GT axis is not an OBB candidate (" +
                             out.shape.id + ", " + j.src + ")");
    }

    SiblingEdge e;
    e.src = j.src;
    e.ref = j.ref;
    if (is_prismatic(j.type)) {
      e.gt = MotionParams::prismatic(j.type, dir);
    } else {
      e.gt = MotionParams::with_axis(j.type, dir, pos);
    }
    out.annotations.edges.push_back(std::move(e));

    SiblingEdge back;
    back.src = j.ref;
    back.ref = j.src;
    back.gt = MotionParams::immobile(MotionType::Fixed);
    out.annotations.edges.push_back(std::move(back));
  }
  for (const auto& rel : b.relations) {
    for (const auto& [s, r] : {std::pair{rel.a, rel.b}, std::pair{rel.b, rel.a}}) {
      SiblingEdge e;
      e.src = s;
      e.ref = r;
      e.gt = MotionParams::immobile(rel.type);
      out.annotations.edges.push_back(std::move(e));
    }
  }
  return out;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  Manifest m;
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& id : j.at("train")) m.train.push_back(id.get<std::string>());
  for (const auto& id : j.at("val")) m.val.push_back(id.get<std::string>());
  for (const auto& id : j.at("test")) m.test.push_back(id.get<std::string>());
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << json{{"train", m.train}, {"val", m.val}, {"test", m.test}, {"seed", m.seed}}
             .dump(1)
      << '\n';
}

Manifest gen_dataset(const std::vector<CategorySpec>& specs, int n_per_category,
                     std::uint64_t seed, const std::string& out_dir,
                     const SynthOptions& opt) {
  fs::create_directories(fs::path(out_dir) / "shapes");
  fs::create_directories(fs::path(out_dir) / "annotations");

  struct Item {
    const CategorySpec* spec;
    std::uint64_t seed;
    std::string id;
  };
  std::vector<Item> items;
  Rng master(seed);
  for (const auto& spec : specs) {
    for (int i = 0; i < n_per_category; ++i) {
      const std::uint64_t s = master.derive(items.size()).next_u64();
      items.push_back({&spec, s, ""});
    }
  }

  std::vector<GeneratedShape> generated(items.size());
  std::vector<std::string> errors(items.size());
  parallel_for(static_cast<int>(items.size()), [&](int i) {
    try {
      generated[i] = gen_shape(*items[i].spec, items[i].seed, opt);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& err : errors) {
    if (!err.empty()) throw std::runtime_error("generation failed: " + err);
  }

  Manifest manifest;
  manifest.seed = seed;
  std::size_t idx = 0;
  for (const auto& spec : specs) {
    std::vector<std::string> ids;
    for (int i = 0; i < n_per_category; ++i, ++idx) {
      auto& g = generated[idx];
      save_shape(g.shape, (fs::path(out_dir) / "shapes" / (g.shape.id + ".json")).string());
      save_annotations(g.annotations,
                       (fs::path(out_dir) / "annotations" / (g.shape.id + ".json")).string());
      ids.push_back(g.shape.id);
    }
    // per-category 70/10/20 split, seeded
    std::uint64_t name_hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : spec.name) {
      name_hash = (name_hash ^ c) * 0x100000001b3ULL;
    }
    Rng split_rng(seed ^ name_hash);
    split_rng.shuffle(ids);
    const int n_train = static_cast<int>(0.7 * n_per_category);
    const int n_val = static_cast<int>(0.1 * n_per_category);
    for (int i = 0; i < n_per_category; ++i) {
      if (i < n_train) manifest.train.push_back(ids[i]);
      else if (i < n_train + n_val) manifest.val.push_back(ids[i]);
      else manifest.test.push_back(ids[i]);
    }
  }
  std::sort(manifest.train.begin(), manifest.train.end());
  std::sort(manifest.val.begin(), manifest.val.end());
  std::sort(manifest.test.begin(), manifest.test.end());
  save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace kinemo
