#include "kinemo/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "kinemo/geometry.hpp"

namespace kinemo {

double angle_error(const Vec3& gt_dir, const Vec3& pred_dir) {
  return line_angle_deg(gt_dir, pred_dir);
}

double axis_distance_error(const MotionParams& gt, const MotionParams& pred) {
  if (!has_pivot(gt.mtype)) {
    throw std::invalid_argument("axis_distance_error: no pivot for prismatic");
  }
  if (!gt.dir || !gt.pos || !pred.dir || !pred.pos) {
    throw std::invalid_argument("axis_distance_error: missing axis parameters");
  }
  return line_to_line_distance({*gt.dir, *gt.pos}, {*pred.dir, *pred.pos});
}

std::vector<EvalRecord> evaluate_shape(const Shape& shape,
                                       const AnnotationSet& gt,
                                       const PredictionSet& preds) {
  std::map<std::pair<std::string, std::string>, const PredEdge*> by_pair;
  for (const auto& e : preds.edges) by_pair[{e.src, e.ref}] = &e;

  std::vector<EvalRecord> records;
  for (const auto& g : gt.edges) {
    if (!g.gt) continue;
    auto it = by_pair.find({g.src, g.ref});
    if (it == by_pair.end()) continue;
    const PredEdge& p = *it->second;

    EvalRecord rec;
    rec.shape_id = shape.id;
    rec.edge_id = g.src + "->" + g.ref;
    rec.category = shape.category;
    rec.gt = *g.gt;
    if (rec.gt.dir) rec.gt.dir = rec.gt.dir->normalized();
    if (rec.gt.pos) rec.gt.pos = shape.norm.to_normalized(*rec.gt.pos);

    if (p.type_fine) {
      rec.type_correct = *p.type_fine == rec.gt.mtype;
    } else if (p.type_coarse) {
      rec.type_correct = *p.type_coarse == to_coarse(rec.gt.mtype);
    }

    if (is_mobile(rec.gt.mtype) && rec.gt.dir && p.dir) {
      rec.angle_err_deg = angle_error(*rec.gt.dir, *p.dir);
      if (has_pivot(rec.gt.mtype) && rec.gt.pos && p.pos) {
        MotionParams pred_mp;
        pred_mp.mtype = rec.gt.mtype;
        pred_mp.dir = p.dir->normalized();
        pred_mp.pos = shape.norm.to_normalized(*p.pos);
        rec.dist_err = axis_distance_error(rec.gt, pred_mp);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

struct Bucket {
  int n_edges = 0, n_correct = 0;
  std::vector<double> angles, dists;
};

ReportRow row_from_bucket(const std::string& name, Bucket& b) {
  ReportRow row;
  row.category = name;
  row.n_edges = b.n_edges;
  row.n_angle = static_cast<int>(b.angles.size());
  row.n_dist = static_cast<int>(b.dists.size());
  row.type_accuracy = b.n_edges ? static_cast<double>(b.n_correct) / b.n_edges : 0.0;
  auto stats = [](std::vector<double>& v) -> std::pair<double, double> {
    double sum = 0;
    for (double x : v) sum += x;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return {sum / n, median};
  };
  if (!b.angles.empty()) {
    const auto [mean, median] = stats(b.angles);
    row.mean_angle = mean;
    row.median_angle = median;
  }
  if (!b.dists.empty()) {
    const auto [mean, median] = stats(b.dists);
    row.mean_dist = mean;
    row.median_dist = median;
  }
  return row;
}

}  // namespace

Report aggregate_report(const std::vector<EvalRecord>& records) {
  std::map<std::string, Bucket> buckets;  // name-ordered
  Bucket overall;
  for (const auto& r : records) {
    for (Bucket* b : {&buckets[r.category], &overall}) {
      b->n_edges++;
      if (r.type_correct) b->n_correct++;
      if (r.angle_err_deg) b->angles.push_back(*r.angle_err_deg);
      if (r.dist_err) b->dists.push_back(*r.dist_err);
    }
  }
  Report report;
  for (auto& [name, bucket] : buckets) {
    report.rows.push_back(row_from_bucket(name, bucket));
  }
  report.overall = row_from_bucket("mean", overall);
  return report;
}

std::string render_text(const Report& report) {
  std::ostringstream os;
  auto cell = [](const std::optional<double>& v, int prec = 3) {
    if (!v) return std::string("-");
    std::ostringstream c;
    c << std::fixed << std::setprecision(prec) << *v;
    return c.str();
  };
  os << std::left << std::setw(20) << "category" << std::right << std::setw(8)
     << "edges" << std::setw(10) << "type_acc" << std::setw(12) << "angle_err"
     << std::setw(12) << "med_angle" << std::setw(12) << "dist_err"
     << std::setw(12) << "med_dist" << "\n";
  auto line = [&](const ReportRow& row) {
    std::ostringstream acc;
    acc << std::fixed << std::setprecision(3) << row.type_accuracy;
    os << std::left << std::setw(20) << row.category << std::right << std::setw(8)
       << row.n_edges << std::setw(10) << acc.str() << std::setw(12)
       << cell(row.mean_angle, 2) << std::setw(12) << cell(row.median_angle, 2)
       << std::setw(12) << cell(row.mean_dist) << std::setw(12)
       << cell(row.median_dist) << "\n";
  };
  for (const auto& row : report.rows) line(row);
  line(report.overall);
  return os.str();
}

nlohmann::json report_json(const Report& report) {
  using nlohmann::json;
  auto row_json = [](const ReportRow& row) {
    json j{{"category", row.category},
           {"n_edges", row.n_edges},
           {"n_angle", row.n_angle},
           {"n_dist", row.n_dist},
           {"type_accuracy", row.type_accuracy}};
    j["mean_angle"] = row.mean_angle ? json(*row.mean_angle) : json(nullptr);
    j["median_angle"] = row.median_angle ? json(*row.median_angle) : json(nullptr);
    j["mean_dist"] = row.mean_dist ? json(*row.mean_dist) : json(nullptr);
    j["median_dist"] = row.median_dist ? json(*row.median_dist) : json(nullptr);
    return j;
  };
  json rows = nlohmann::json::array();
  for (const auto& row : report.rows) rows.push_back(row_json(row));
  return json{{"categories", rows}, {"overall", row_json(report.overall)}};
}

}  // namespace kinemo
