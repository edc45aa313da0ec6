#include "kinemo/config.hpp"

#include <fstream>

#include "kinemo/io.hpp"

namespace kinemo {

using nlohmann::json;

json Config::to_json() const {
  return json{
      {"adjacency_eps", adjacency_eps},
      {"interaction_delta", interaction_delta},
      {"min_extent", min_extent},
      {"snap_angle_deg", snap_angle_deg},
      {"symmetry_hausdorff", symmetry_hausdorff},
      {"n_points", n_points},
      {"pair_points", pair_points},
      {"synth_points", synth_points},
      {"rot_aug_deg", rot_aug_deg},
      {"feature_dim", feature_dim},
      {"edge_feat_dim", edge_feat_dim},
      {"rounds", rounds},
      {"point_hidden", point_hidden},
      {"head_hidden", head_hidden},
      {"dir_loss_squared", dir_loss_squared},
      {"w_cls", w_cls},
      {"w_dir", w_dir},
      {"w_pos", w_pos},
      {"feas_enc_hidden", feas_enc_hidden},
      {"feas_enc_out", feas_enc_out},
      {"feas_head_hidden", feas_head_hidden},
      {"n_neg", n_neg},
      {"amounts_per_edge", amounts_per_edge},
      {"rev_amount_lo", rev_amount_lo},
      {"rev_amount_hi", rev_amount_hi},
      {"pri_amount_lo", pri_amount_lo},
      {"pri_amount_hi", pri_amount_hi},
      {"lr", lr},
      {"beta1", beta1},
      {"beta2", beta2},
      {"epochs", epochs},
      {"feas_epochs", feas_epochs},
      {"batch_size", batch_size},
      {"feas_batch", feas_batch},
      {"w_f", w_f},
      {"w_d", w_d},
      {"w_p", w_p},
      {"tau", tau},
      {"infer_rev_amount", infer_rev_amount},
      {"infer_pri_amount", infer_pri_amount},
      {"pos_scale", pos_scale},
      {"filter_per_node", filter_per_node},
      {"merge_by_points", merge_by_points},
      {"seed", seed},
  };
}

Config Config::from_json(const json& j) {
  const json defaults = Config{}.to_json();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!defaults.contains(it.key())) {
      throw ParseError("config: unknown key \"" + it.key() + "\"");
    }
  }
  Config c;
  c.adjacency_eps = j.value("adjacency_eps", c.adjacency_eps);
  c.interaction_delta = j.value("interaction_delta", c.interaction_delta);
  c.min_extent = j.value("min_extent", c.min_extent);
  c.snap_angle_deg = j.value("snap_angle_deg", c.snap_angle_deg);
  c.symmetry_hausdorff = j.value("symmetry_hausdorff", c.symmetry_hausdorff);
  c.n_points = j.value("n_points", c.n_points);
  c.pair_points = j.value("pair_points", c.pair_points);
  c.synth_points = j.value("synth_points", c.synth_points);
  c.rot_aug_deg = j.value("rot_aug_deg", c.rot_aug_deg);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.edge_feat_dim = j.value("edge_feat_dim", c.edge_feat_dim);
  c.rounds = j.value("rounds", c.rounds);
  c.point_hidden = j.value("point_hidden", c.point_hidden);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.dir_loss_squared = j.value("dir_loss_squared", c.dir_loss_squared);
  c.w_cls = j.value("w_cls", c.w_cls);
  c.w_dir = j.value("w_dir", c.w_dir);
  c.w_pos = j.value("w_pos", c.w_pos);
  c.feas_enc_hidden = j.value("feas_enc_hidden", c.feas_enc_hidden);
  c.feas_enc_out = j.value("feas_enc_out", c.feas_enc_out);
  c.feas_head_hidden = j.value("feas_head_hidden", c.feas_head_hidden);
  c.n_neg = j.value("n_neg", c.n_neg);
  c.amounts_per_edge = j.value("amounts_per_edge", c.amounts_per_edge);
  c.rev_amount_lo = j.value("rev_amount_lo", c.rev_amount_lo);
  c.rev_amount_hi = j.value("rev_amount_hi", c.rev_amount_hi);
  c.pri_amount_lo = j.value("pri_amount_lo", c.pri_amount_lo);
  c.pri_amount_hi = j.value("pri_amount_hi", c.pri_amount_hi);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epochs = j.value("epochs", c.epochs);
  c.feas_epochs = j.value("feas_epochs", c.feas_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.feas_batch = j.value("feas_batch", c.feas_batch);
  c.w_f = j.value("w_f", c.w_f);
  c.w_d = j.value("w_d", c.w_d);
  c.w_p = j.value("w_p", c.w_p);
  c.tau = j.value("tau", c.tau);
  c.infer_rev_amount = j.value("infer_rev_amount", c.infer_rev_amount);
  c.infer_pri_amount = j.value("infer_pri_amount", c.infer_pri_amount);
  c.pos_scale = j.value("pos_scale", c.pos_scale);
  c.filter_per_node = j.value("filter_per_node", c.filter_per_node);
  c.merge_by_points = j.value("merge_by_points", c.merge_by_points);
  c.seed = j.value("seed", c.seed);
  return c;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_json(j);
}

ObbOptions Config::obb_options() const {
  ObbOptions o;
  o.min_extent = min_extent;
  o.snap_angle_deg = snap_angle_deg;
  o.symmetry_hausdorff = symmetry_hausdorff;
  return o;
}

ContextOptions Config::context_options() const {
  ContextOptions o;
  o.adjacency_eps = adjacency_eps;
  o.n_points = n_points;
  o.seed = seed;
  o.obb = obb_options();
  return o;
}

GnnConfig Config::gnn_config(TypeMode mode) const {
  GnnConfig c;
  c.feature_dim = feature_dim;
  c.edge_feat_dim = edge_feat_dim;
  c.rounds = rounds;
  c.point_hidden = point_hidden;
  c.head_hidden = head_hidden;
  c.n_points = n_points;
  c.mode = mode;
  c.dir_loss_squared = dir_loss_squared;
  c.w_cls = w_cls;
  c.w_dir = w_dir;
  c.w_pos = w_pos;
  return c;
}

FeasConfig Config::feas_config() const {
  FeasConfig c;
  c.pair_points = pair_points;
  c.enc_hidden = feas_enc_hidden;
  c.enc_out = feas_enc_out;
  c.head_hidden = feas_head_hidden;
  c.rev_amount_lo = rev_amount_lo;
  c.rev_amount_hi = rev_amount_hi;
  c.pri_amount_lo = pri_amount_lo;
  c.pri_amount_hi = pri_amount_hi;
  c.amounts_per_edge = amounts_per_edge;
  c.n_neg = n_neg;
  c.infer_rev_amount = infer_rev_amount;
  c.infer_pri_amount = infer_pri_amount;
  return c;
}

SelectOptions Config::select_options() const {
  SelectOptions o;
  o.weights = {w_f, w_d, w_p};
  o.interaction_delta = interaction_delta;
  o.infer_rev_amount = infer_rev_amount;
  o.infer_pri_amount = infer_pri_amount;
  o.pair_points = pair_points;
  o.pos_scale = pos_scale;
  o.seed = seed;
  return o;
}

AdamOptions Config::adam_options() const {
  AdamOptions o;
  o.lr = lr;
  o.beta1 = beta1;
  o.beta2 = beta2;
  return o;
}

}  // namespace kinemo
