#include <limits>

#include "kinemo/kernels.hpp"

// Reference implementations. Kept branch-free and simple: these are the
// ground truth the SIMD variants are tested against.

namespace kinemo::kernels::detail {
namespace {

void matvec_scalar(const double* W, const double* b, const double* x,
                   double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc + (b ? b[r] : 0.0);
  }
}

void matvec_t_acc_scalar(const double* W, const double* dy, double* dx,
                         int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    const double g = dy[r];
    for (int c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

void ger_acc_scalar(double* dW, double* db, const double* dy, const double* x,
                    int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = dW + static_cast<std::size_t>(r) * cols;
    const double g = dy[r];
    for (int c = 0; c < cols; ++c) row[c] += g * x[c];
    if (db) db[r] += g;
  }
}

double dot_scalar(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void nearest_dist2_scalar(const double* a, int na, const double* b, int nb,
                          double* out) {
  for (int i = 0; i < na; ++i) {
    const double ax = a[3 * i], ay = a[3 * i + 1], az = a[3 * i + 2];
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < nb; ++j) {
      const double dx = ax - b[3 * j];
      const double dy = ay - b[3 * j + 1];
      const double dz = az - b[3 * j + 2];
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best) best = d2;
    }
    out[i] = best;
  }
}

double min_dist2_scalar(const double* a, int na, const double* b, int nb) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < na; ++i) {
    const double ax = a[3 * i], ay = a[3 * i + 1], az = a[3 * i + 2];
    for (int j = 0; j < nb; ++j) {
      const double dx = ax - b[3 * j];
      const double dy = ay - b[3 * j + 1];
      const double dz = az - b[3 * j + 2];
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best) best = d2;
    }
  }
  return best;
}

void transform_points_scalar(const double* pts, int n, const double* R,
                             const double* t, double* out) {
  for (int i = 0; i < n; ++i) {
    const double x = pts[3 * i], y = pts[3 * i + 1], z = pts[3 * i + 2];
    out[3 * i] = R[0] * x + R[1] * y + R[2] * z + t[0];
    out[3 * i + 1] = R[3] * x + R[4] * y + R[5] * z + t[1];
    out[3 * i + 2] = R[6] * x + R[7] * y + R[8] * z + t[2];
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table table{
      matvec_scalar,        matvec_t_acc_scalar, ger_acc_scalar,
      dot_scalar,           axpy_scalar,         nearest_dist2_scalar,
      min_dist2_scalar,     transform_points_scalar,
  };
  return table;
}

}  // namespace kinemo::kernels::detail
