#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "kinemo/feasnet.hpp"
#include "kinemo/geometry.hpp"
#include "kinemo/graphnet.hpp"
#include "kinemo/refine.hpp"
#include "kinemo/synthdata.hpp"

namespace kinemo {

/// Every tunable of the pipeline with its documented default, loadable from
/// one JSON file; unknown keys are rejected.
struct Config {
  // geometry
  double adjacency_eps = 0.02;
  double interaction_delta = 0.03;
  double min_extent = 0.01;
  double snap_angle_deg = 5.0;
  double symmetry_hausdorff = 0.02;
  // sampling
  int n_points = 1024;     // leaf sample for the hierarchy encoder
  int pair_points = 512;   // per-part points for the feasibility net
  int synth_points = 2000; // generated points per leaf
  double rot_aug_deg = 0.0;
  // graph net
  int feature_dim = 64;
  int edge_feat_dim = 16;
  int rounds = 3;
  int point_hidden = 32;
  int head_hidden = 64;
  bool dir_loss_squared = true;
  double w_cls = 1.0, w_dir = 1.0, w_pos = 1.0;
  // feasibility net
  int feas_enc_hidden = 64;
  int feas_enc_out = 128;
  int feas_head_hidden = 64;
  int n_neg = 4;
  int amounts_per_edge = 2;
  double rev_amount_lo = 0.2, rev_amount_hi = 1.2;
  double pri_amount_lo = 0.1, pri_amount_hi = 0.4;
  // training
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  int epochs = 200;
  int feas_epochs = 30;
  int batch_size = 8;      // shapes per GNN step
  int feas_batch = 32;     // pairs per feasibility step
  // refinement
  double w_f = 0.5, w_d = 0.3, w_p = 0.2;
  double tau = 0.6;
  double infer_rev_amount = 0.6;
  double infer_pri_amount = 0.25;
  double pos_scale = 1.7320508075688772;
  bool filter_per_node = false;
  bool merge_by_points = false;
  // misc
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static Config from_json(const nlohmann::json& j);
  static Config from_file(const std::string& path);

  ObbOptions obb_options() const;
  ContextOptions context_options() const;
  GnnConfig gnn_config(TypeMode mode) const;
  FeasConfig feas_config() const;
  SelectOptions select_options() const;
  AdamOptions adam_options() const;
};

}  // namespace kinemo
