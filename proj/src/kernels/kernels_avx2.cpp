#include "kinemo/kernels.hpp"

// AVX2+FMA variants. This TU is compiled with -mavx2 -mfma on x86_64; the
// dispatcher only installs the table after a runtime CPU probe, so the rest
// of the binary stays baseline.

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <limits>
#include <vector>

namespace kinemo::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

inline double hmin(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_min_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_min_sd(lo, swap));
}

double dot_avx2(const double* a, const double* b, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void matvec_avx2(const double* W, const double* b, const double* x,
                 double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    y[r] = dot_avx2(row, x, cols) + (b ? b[r] : 0.0);
  }
}

void matvec_t_acc_avx2(const double* W, const double* dy, double* dx,
                       int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = W + static_cast<std::size_t>(r) * cols;
    const __m256d g = _mm256_set1_pd(dy[r]);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d acc = _mm256_loadu_pd(dx + c);
      acc = _mm256_fmadd_pd(g, _mm256_loadu_pd(row + c), acc);
      _mm256_storeu_pd(dx + c, acc);
    }
    for (; c < cols; ++c) dx[c] += row[c] * dy[r];
  }
}

void ger_acc_avx2(double* dW, double* db, const double* dy, const double* x,
                  int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = dW + static_cast<std::size_t>(r) * cols;
    const __m256d g = _mm256_set1_pd(dy[r]);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d acc = _mm256_loadu_pd(row + c);
      acc = _mm256_fmadd_pd(g, _mm256_loadu_pd(x + c), acc);
      _mm256_storeu_pd(row + c, acc);
    }
    for (; c < cols; ++c) row[c] += dy[r] * x[c];
    if (db) db[r] += dy[r];
  }
}

void axpy_avx2(double alpha, const double* x, double* y, int n) {
  const __m256d a = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_loadu_pd(y + i);
    acc = _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Deinterleave xyz points into component arrays so the inner distance loop
// streams full vectors.
struct Soa {
  std::vector<double> x, y, z;
  explicit Soa(const double* pts, int n) : x(n), y(n), z(n) {
    for (int i = 0; i < n; ++i) {
      x[i] = pts[3 * i];
      y[i] = pts[3 * i + 1];
      z[i] = pts[3 * i + 2];
    }
  }
};

inline double nearest_one(double ax, double ay, double az, const Soa& b,
                          int nb) {
  const __m256d vax = _mm256_set1_pd(ax);
  const __m256d vay = _mm256_set1_pd(ay);
  const __m256d vaz = _mm256_set1_pd(az);
  __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  int j = 0;
  for (; j + 4 <= nb; j += 4) {
    const __m256d dx = _mm256_sub_pd(vax, _mm256_loadu_pd(b.x.data() + j));
    const __m256d dy = _mm256_sub_pd(vay, _mm256_loadu_pd(b.y.data() + j));
    const __m256d dz = _mm256_sub_pd(vaz, _mm256_loadu_pd(b.z.data() + j));
    __m256d d2 = _mm256_mul_pd(dx, dx);
    d2 = _mm256_fmadd_pd(dy, dy, d2);
    d2 = _mm256_fmadd_pd(dz, dz, d2);
    best = _mm256_min_pd(best, d2);
  }
  double out = hmin(best);
  for (; j < nb; ++j) {
    const double dx = ax - b.x[j], dy = ay - b.y[j], dz = az - b.z[j];
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < out) out = d2;
  }
  return out;
}

void nearest_dist2_avx2(const double* a, int na, const double* b, int nb,
                        double* out) {
  const Soa soa(b, nb);
  for (int i = 0; i < na; ++i) {
    out[i] = nearest_one(a[3 * i], a[3 * i + 1], a[3 * i + 2], soa, nb);
  }
}

double min_dist2_avx2(const double* a, int na, const double* b, int nb) {
  const Soa soa(b, nb);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < na; ++i) {
    const double d2 = nearest_one(a[3 * i], a[3 * i + 1], a[3 * i + 2], soa, nb);
    if (d2 < best) best = d2;
  }
  return best;
}

void transform_points_avx2(const double* pts, int n, const double* R,
                           const double* t, double* out) {
  const Soa soa(pts, n);
  const __m256d r0 = _mm256_set1_pd(R[0]), r1 = _mm256_set1_pd(R[1]), r2 = _mm256_set1_pd(R[2]);
  const __m256d r3 = _mm256_set1_pd(R[3]), r4 = _mm256_set1_pd(R[4]), r5 = _mm256_set1_pd(R[5]);
  const __m256d r6 = _mm256_set1_pd(R[6]), r7 = _mm256_set1_pd(R[7]), r8 = _mm256_set1_pd(R[8]);
  const __m256d t0 = _mm256_set1_pd(t[0]), t1 = _mm256_set1_pd(t[1]), t2 = _mm256_set1_pd(t[2]);
  int i = 0;
  alignas(32) double ox[4], oy[4], oz[4];
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(soa.x.data() + i);
    const __m256d y = _mm256_loadu_pd(soa.y.data() + i);
    const __m256d z = _mm256_loadu_pd(soa.z.data() + i);
    __m256d vx = _mm256_fmadd_pd(r0, x, t0);
    vx = _mm256_fmadd_pd(r1, y, vx);
    vx = _mm256_fmadd_pd(r2, z, vx);
    __m256d vy = _mm256_fmadd_pd(r3, x, t1);
    vy = _mm256_fmadd_pd(r4, y, vy);
    vy = _mm256_fmadd_pd(r5, z, vy);
    __m256d vz = _mm256_fmadd_pd(r6, x, t2);
    vz = _mm256_fmadd_pd(r7, y, vz);
    vz = _mm256_fmadd_pd(r8, z, vz);
    _mm256_store_pd(ox, vx);
    _mm256_store_pd(oy, vy);
    _mm256_store_pd(oz, vz);
    for (int k = 0; k < 4; ++k) {
      out[3 * (i + k)] = ox[k];
      out[3 * (i + k) + 1] = oy[k];
      out[3 * (i + k) + 2] = oz[k];
    }
  }
  for (; i < n; ++i) {
    const double x = pts[3 * i], y = pts[3 * i + 1], z = pts[3 * i + 2];
    out[3 * i] = R[0] * x + R[1] * y + R[2] * z + t[0];
    out[3 * i + 1] = R[3] * x + R[4] * y + R[5] * z + t[1];
    out[3 * i + 2] = R[6] * x + R[7] * y + R[8] * z + t[2];
  }
}

}  // namespace

const Table* avx2_table() {
  static const Table table{
      matvec_avx2,      matvec_t_acc_avx2, ger_acc_avx2,
      dot_avx2,         axpy_avx2,         nearest_dist2_avx2,
      min_dist2_avx2,   transform_points_avx2,
  };
  return &table;
}

}  // namespace kinemo::kernels::detail

#else

namespace kinemo::kernels::detail {
const Table* avx2_table() { return nullptr; }
}  // namespace kinemo::kernels::detail

#endif
