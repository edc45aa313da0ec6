#include "kinemo/io.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kinemo {

using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ParseError(where + ": unknown field \"" + it.key() + "\"");
  }
}

Vec3 read_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() ||
      !j[1].is_number() || !j[2].is_number()) {
    throw ParseError(where + ": expected [x, y, z]");
  }
  Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!v.is_finite()) throw ParseError(where + ": non-finite components");
  return v;
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

std::string require_string(const json& obj, const char* key,
                           const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    throw ParseError(where + ": missing string field \"" + key + "\"");
  }
  return obj[key].get<std::string>();
}

OBB read_obb(const json& j, const std::string& where) {
  check_keys(j, {"center", "axes", "extents"}, where);
  OBB obb;
  obb.center = read_vec3(j.at("center"), where + ".center");
  if (!j.contains("axes") || !j["axes"].is_array() || j["axes"].size() != 3) {
    throw ParseError(where + ": axes must be 3 vectors");
  }
  for (int k = 0; k < 3; ++k) obb.axes[k] = read_vec3(j["axes"][k], where + ".axes");
  const auto& ext = j.at("extents");
  if (!ext.is_array() || ext.size() != 3) {
    throw ParseError(where + ": extents must have 3 entries");
  }
  for (int k = 0; k < 3; ++k) obb.extents[k] = ext[k].get<double>();
  return obb;
}

json obb_json(const OBB& obb) {
  return json{{"center", vec3_json(obb.center)},
              {"axes", json::array({vec3_json(obb.axes[0]), vec3_json(obb.axes[1]),
                                    vec3_json(obb.axes[2])})},
              {"extents", json::array({obb.extents[0], obb.extents[1], obb.extents[2]})}};
}

}  // namespace

Shape load_shape(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_object()) throw ParseError(path + ": top level must be an object");
  check_keys(j, {"id", "category", "up_axis", "nodes", "root"}, path);

  Shape shape;
  shape.id = require_string(j, "id", path);
  shape.category = require_string(j, "category", path);
  shape.root = require_string(j, "root", path);
  if (j.contains("up_axis")) {
    shape.up_axis = read_vec3(j["up_axis"], path + ".up_axis");
    if (shape.up_axis.norm() < 1e-12) {
      throw ParseError(path + ": up_axis must be non-zero");
    }
    shape.up_axis = shape.up_axis.normalized();
  }
  if (!j.contains("nodes") || !j["nodes"].is_array()) {
    throw ParseError(path + ": missing nodes array");
  }
  for (const auto& nj : j["nodes"]) {
    const std::string where = path + ".nodes";
    check_keys(nj, {"id", "label", "children", "points", "obb"}, where);
    PartNode node;
    node.id = require_string(nj, "id", where);
    node.label = require_string(nj, "label", where);
    if (!nj.contains("children") || !nj["children"].is_array()) {
      throw ParseError(where + ": node " + node.id + " missing children array");
    }
    for (const auto& c : nj["children"]) {
      if (!c.is_string()) throw ParseError(where + ": child ids must be strings");
      node.children.push_back(c.get<std::string>());
    }
    if (nj.contains("points")) {
      for (const auto& pj : nj["points"]) {
        node.points.push_back(read_vec3(pj, where + ": node " + node.id));
      }
    }
    if (nj.contains("obb")) {
      node.obb = read_obb(nj["obb"], where + ".obb");
    }
    shape.nodes.push_back(std::move(node));
  }
  shape.rebuild_index();

  normalize_shape(shape);

  const auto violations = validate_hierarchy(shape);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << path << ": invalid shape:";
    for (const auto& v : violations) msg << " [" << v.node_id << "] " << v.message << ";";
    throw ValidationError(msg.str());
  }
  return shape;
}

void save_shape(const Shape& shape, const std::string& path, bool with_obb) {
  json nodes = json::array();
  for (const auto& n : shape.nodes) {
    json nj{{"id", n.id}, {"label", n.label}, {"children", n.children}};
    if (!n.points.empty()) {
      json pts = json::array();
      for (const auto& p : n.points) pts.push_back(vec3_json(p));
      nj["points"] = std::move(pts);
    }
    if (with_obb && n.obb) nj["obb"] = obb_json(*n.obb);
    nodes.push_back(std::move(nj));
  }
  const json j{{"id", shape.id},
               {"category", shape.category},
               {"up_axis", vec3_json(shape.up_axis)},
               {"root", shape.root},
               {"nodes", std::move(nodes)}};
  write_file(j, path);
}

namespace {

constexpr std::initializer_list<const char*> kEdgeKeys = {
    "src", "ref", "type", "dir", "pos",
    "score", "s_f", "s_d", "s_p", "candidate_source"};

PredEdge read_pred_edge(const json& ej, const std::string& where,
                        bool strict_fine) {
  check_keys(ej, kEdgeKeys, where);
  PredEdge e;
  e.src = require_string(ej, "src", where);
  e.ref = require_string(ej, "ref", where);
  const std::string type_str = require_string(ej, "type", where);
  e.type_fine = parse_motion_type(type_str);
  if (!e.type_fine) {
    e.type_coarse = parse_coarse_type(type_str);
    if (strict_fine || !e.type_coarse) {
      throw ParseError(where + ": unknown motion type \"" + type_str + "\"");
    }
  }
  if (ej.contains("dir")) e.dir = read_vec3(ej["dir"], where + ".dir");
  if (ej.contains("pos")) e.pos = read_vec3(ej["pos"], where + ".pos");
  for (const char* k : {"score", "s_f", "s_d", "s_p"}) {
    if (ej.contains(k)) {
      if (!ej[k].is_number()) throw ParseError(where + ": " + k + " must be a number");
      const double v = ej[k].get<double>();
      if (k[0] == 's' && k[1] == 'c') e.score = v;
      else if (k[2] == 'f') e.s_f = v;
      else if (k[2] == 'd') e.s_d = v;
      else e.s_p = v;
    }
  }
  if (ej.contains("candidate_source")) {
    e.candidate_source = require_string(ej, "candidate_source", where);
  }
  return e;
}

}  // namespace

AnnotationSet load_annotations(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_object()) throw ParseError(path + ": top level must be an object");
  check_keys(j, {"shape_id", "edges"}, path);
  AnnotationSet set;
  set.shape_id = require_string(j, "shape_id", path);
  if (!j.contains("edges") || !j["edges"].is_array()) {
    throw ParseError(path + ": missing edges array");
  }
  for (const auto& ej : j["edges"]) {
    const PredEdge pe = read_pred_edge(ej, path + ".edges", /*strict_fine=*/true);
    SiblingEdge edge;
    edge.src = pe.src;
    edge.ref = pe.ref;
    MotionParams mp;
    mp.mtype = *pe.type_fine;
    if (is_mobile(mp.mtype)) {
      if (!pe.dir) throw ParseError(path + ": mobile edge needs dir");
      mp.dir = pe.dir;
      if (has_pivot(mp.mtype)) {
        if (!pe.pos) throw ParseError(path + ": pivot type needs pos");
        mp.pos = pe.pos;
      }
    }
    edge.gt = mp;
    if (edge.src == edge.ref) {
      throw ParseError(path + ": self edge on " + edge.src);
    }
    set.edges.push_back(std::move(edge));
  }
  return set;
}

void save_annotations(const AnnotationSet& set, const std::string& path) {
  json edges = json::array();
  for (const auto& e : set.edges) {
    if (!e.gt) continue;
    json ej{{"src", e.src}, {"ref", e.ref}, {"type", to_string(e.gt->mtype)}};
    if (e.gt->dir && e.gt->dir_meaningful()) ej["dir"] = vec3_json(*e.gt->dir);
    if (e.gt->pos && e.gt->pos_meaningful()) ej["pos"] = vec3_json(*e.gt->pos);
    edges.push_back(std::move(ej));
  }
  write_file(json{{"shape_id", set.shape_id}, {"edges", std::move(edges)}}, path);
}

PredictionSet load_predictions(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_object()) throw ParseError(path + ": top level must be an object");
  check_keys(j, {"shape_id", "edges"}, path);
  PredictionSet set;
  set.shape_id = require_string(j, "shape_id", path);
  if (!j.contains("edges") || !j["edges"].is_array()) {
    throw ParseError(path + ": missing edges array");
  }
  for (const auto& ej : j["edges"]) {
    set.edges.push_back(read_pred_edge(ej, path + ".edges", /*strict_fine=*/false));
  }
  return set;
}

void save_predictions(const PredictionSet& set, const std::string& path) {
  json edges = json::array();
  for (const auto& e : set.edges) {
    json ej{{"src", e.src}, {"ref", e.ref}};
    if (e.type_fine) ej["type"] = to_string(*e.type_fine);
    else if (e.type_coarse) ej["type"] = to_string(*e.type_coarse);
    if (e.dir) ej["dir"] = vec3_json(*e.dir);
    if (e.pos) ej["pos"] = vec3_json(*e.pos);
    if (e.score) ej["score"] = *e.score;
    if (e.s_f) ej["s_f"] = *e.s_f;
    if (e.s_d) ej["s_d"] = *e.s_d;
    if (e.s_p) ej["s_p"] = *e.s_p;
    if (e.candidate_source) ej["candidate_source"] = *e.candidate_source;
    edges.push_back(std::move(ej));
  }
  write_file(json{{"shape_id", set.shape_id}, {"edges", std::move(edges)}}, path);
}

}  // namespace kinemo
