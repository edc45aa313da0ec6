#pragma once

#include <cstddef>

namespace kinemo::kernels {

// Data-parallel inner loops behind the geometry and network code. Every
// kernel has a scalar reference implementation and may have SIMD variants;
// the active variant is chosen once at runtime (CPU probe, overridable via
// the KINEMO_KERNELS env var or set_backend). SIMD results may differ from
// scalar in the last bits (FMA, reassociated reductions); the equivalence
// tests pin the tolerance.

enum class Backend { Scalar, Avx2 };

Backend active_backend();
/// Force a backend. Returns false (and leaves the state unchanged) if the
/// requested backend is not available on this CPU/build.
bool set_backend(Backend b);
const char* backend_name(Backend b);
bool avx2_available();

/// y = W x + b. W is row-major [rows x cols], x has cols entries, y rows.
void matvec(const double* W, const double* b, const double* x, double* y,
            int rows, int cols);

/// dx += W^T dy.
void matvec_t_acc(const double* W, const double* dy, double* dx,
                  int rows, int cols);

/// dW += dy x^T and db += dy (rank-1 gradient accumulation).
void ger_acc(double* dW, double* db, const double* dy, const double* x,
             int rows, int cols);

double dot(const double* a, const double* b, int n);

/// y += alpha * x.
void axpy(double alpha, const double* x, double* y, int n);

/// Points are xyz-interleaved. For each point of `a`, the squared distance
/// to its nearest point of `b`.
void nearest_dist2(const double* a, int na, const double* b, int nb,
                   double* out);

/// Minimum squared distance between two point sets.
double min_dist2(const double* a, int na, const double* b, int nb);

/// out_i = R p_i + t for xyz-interleaved points; R row-major 3x3.
void transform_points(const double* pts, int n, const double* R,
                      const double* t, double* out);

/// Column-wise max over the rows of X [n x f]; argmax (first maximal row)
/// per column when `argmax` is non-null. Not dispatched: the pooling pass is
/// cheap next to the matvecs feeding it, and backward needs the indices.
void colwise_max_argmax(const double* X, int n, int f, double* out,
                        int* argmax);

namespace detail {
struct Table {
  void (*matvec)(const double*, const double*, const double*, double*, int, int);
  void (*matvec_t_acc)(const double*, const double*, double*, int, int);
  void (*ger_acc)(double*, double*, const double*, const double*, int, int);
  double (*dot)(const double*, const double*, int);
  void (*axpy)(double, const double*, double*, int);
  void (*nearest_dist2)(const double*, int, const double*, int, double*);
  double (*min_dist2)(const double*, int, const double*, int);
  void (*transform_points)(const double*, int, const double*, const double*, double*);
};
const Table& scalar_table();
const Table* avx2_table();  // nullptr when the build or CPU lacks AVX2
}  // namespace detail

}  // namespace kinemo::kernels
