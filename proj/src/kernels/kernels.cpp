#include "kinemo/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <limits>

namespace kinemo::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct Dispatch {
  const detail::Table* table;
  Backend backend;

  Dispatch() {
    table = &detail::scalar_table();
    backend = Backend::Scalar;
    const bool have_avx2 = detail::avx2_table() != nullptr && cpu_has_avx2();
    const char* env = std::getenv("KINEMO_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return;
    if (have_avx2) {
      table = detail::avx2_table();
      backend = Backend::Avx2;
    }
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

bool avx2_available() {
  return detail::avx2_table() != nullptr && cpu_has_avx2();
}

bool set_backend(Backend b) {
  if (b == Backend::Avx2) {
    if (!avx2_available()) return false;
    dispatch().table = detail::avx2_table();
  } else {
    dispatch().table = &detail::scalar_table();
  }
  dispatch().backend = b;
  return true;
}

const char* backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

void matvec(const double* W, const double* b, const double* x, double* y,
            int rows, int cols) {
  dispatch().table->matvec(W, b, x, y, rows, cols);
}

void matvec_t_acc(const double* W, const double* dy, double* dx, int rows,
                  int cols) {
  dispatch().table->matvec_t_acc(W, dy, dx, rows, cols);
}

void ger_acc(double* dW, double* db, const double* dy, const double* x,
             int rows, int cols) {
  dispatch().table->ger_acc(dW, db, dy, x, rows, cols);
}

double dot(const double* a, const double* b, int n) {
  return dispatch().table->dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, int n) {
  dispatch().table->axpy(alpha, x, y, n);
}

void nearest_dist2(const double* a, int na, const double* b, int nb,
                   double* out) {
  dispatch().table->nearest_dist2(a, na, b, nb, out);
}

double min_dist2(const double* a, int na, const double* b, int nb) {
  return dispatch().table->min_dist2(a, na, b, nb);
}

void transform_points(const double* pts, int n, const double* R,
                      const double* t, double* out) {
  dispatch().table->transform_points(pts, n, R, t, out);
}

void colwise_max_argmax(const double* X, int n, int f, double* out,
                        int* argmax) {
  for (int c = 0; c < f; ++c) {
    out[c] = -std::numeric_limits<double>::infinity();
    if (argmax) argmax[c] = 0;
  }
  for (int i = 0; i < n; ++i) {
    const double* row = X + static_cast<std::size_t>(i) * f;
    for (int c = 0; c < f; ++c) {
      if (row[c] > out[c]) {
        out[c] = row[c];
        if (argmax) argmax[c] = i;
      }
    }
  }
}

}  // namespace kinemo::kernels
