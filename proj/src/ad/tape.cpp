#include "kinemo/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "kinemo/kernels.hpp"

namespace kinemo::ad {

namespace kk = kinemo::kernels;

Tape::Id Tape::push(Tensor val, bool needs_grad,
                    std::function<void(Tape&, Id)> back) {
  Node n;
  n.val = std::move(val);
  n.needs_grad = grad_enabled_ && needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::accumulate(Id input, const double* dy, int n) {
  if (!needs(input)) return;
  Tensor& g = grad(input);
  kk::axpy(1.0, dy, g.v.data(), n);
}

Tape::Id Tape::constant(Tensor t) { return push(std::move(t), false, {}); }

Tape::Id Tape::param(const Tensor& value, Tensor* grad_sink) {
  const Id id = push(value, grad_sink != nullptr, {});
  nodes_[id].sink = grad_enabled_ ? grad_sink : nullptr;
  return id;
}

Tape::Id Tape::matmul_rows(Id X, Id W, Id b) {
  const Tensor& x = value(X);
  const Tensor& w = value(W);
  const int n = x.rows, in = x.cols, out = w.rows;
  if (w.cols != in) throw std::invalid_argument("matmul_rows: shape mismatch");
  const double* bias = b >= 0 ? value(b).v.data() : nullptr;
  if (b >= 0 && value(b).size() != out) {
    throw std::invalid_argument("matmul_rows: bias size");
  }
  Tensor y(n, out);
  for (int i = 0; i < n; ++i) {
    kk::matvec(w.v.data(), bias, x.row_ptr(i), y.row_ptr(i), out, in);
  }
  const bool ng = needs(X) || needs(W) || (b >= 0 && needs(b));
  return push(std::move(y), ng, [X, W, b, n, in, out](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    const Tensor& xv = t.value(X);
    const Tensor& wv = t.value(W);
    if (t.needs(W) || (b >= 0 && t.needs(b))) {
      double* dw = t.needs(W) ? t.grad(W).v.data() : nullptr;
      double* db = (b >= 0 && t.needs(b)) ? t.grad(b).v.data() : nullptr;
      for (int i = 0; i < n; ++i) {
        if (dw) {
          kk::ger_acc(dw, db, dy.row_ptr(i), xv.row_ptr(i), out, in);
        } else if (db) {
          kk::axpy(1.0, dy.row_ptr(i), db, out);
        }
      }
    }
    if (t.needs(X)) {
      Tensor& dx = t.grad(X);
      for (int i = 0; i < n; ++i) {
        kk::matvec_t_acc(wv.v.data(), dy.row_ptr(i), dx.row_ptr(i), out, in);
      }
    }
  });
}

Tape::Id Tape::tanh_(Id x) {
  const Tensor& in = value(x);
  Tensor y(in.rows, in.cols);
  for (int i = 0; i < in.size(); ++i) y.v[i] = std::tanh(in.v[i]);
  return push(std::move(y), needs(x), [x](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& dx = t.grad(x);
    for (int i = 0; i < y.size(); ++i) dx.v[i] += dy.v[i] * (1.0 - y.v[i] * y.v[i]);
  });
}

Tape::Id Tape::sigmoid_(Id x) {
  const Tensor& in = value(x);
  Tensor y(in.rows, in.cols);
  for (int i = 0; i < in.size(); ++i) {
    const double v = in.v[i];
    y.v[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  }
  return push(std::move(y), needs(x), [x](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& dx = t.grad(x);
    for (int i = 0; i < y.size(); ++i) dx.v[i] += dy.v[i] * y.v[i] * (1.0 - y.v[i]);
  });
}

Tape::Id Tape::relu_(Id x) {
  const Tensor& in = value(x);
  Tensor y(in.rows, in.cols);
  for (int i = 0; i < in.size(); ++i) y.v[i] = in.v[i] > 0 ? in.v[i] : 0.0;
  return push(std::move(y), needs(x), [x](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& dx = t.grad(x);
    for (int i = 0; i < y.size(); ++i) dx.v[i] += y.v[i] > 0 ? dy.v[i] : 0.0;
  });
}

Tape::Id Tape::colmax(Id X) {
  const Tensor& x = value(X);
  Tensor y(1, x.cols);
  std::vector<int> argmax(x.cols);
  kk::colwise_max_argmax(x.v.data(), x.rows, x.cols, y.v.data(), argmax.data());
  return push(std::move(y), needs(X), [X, argmax](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    Tensor& dx = t.grad(X);
    for (int c = 0; c < dy.cols; ++c) {
      dx.row_ptr(argmax[c])[c] += dy.v[c];
    }
  });
}

Tape::Id Tape::mean_rows(Id X) {
  const Tensor& x = value(X);
  Tensor y(1, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    kk::axpy(1.0 / x.rows, x.row_ptr(i), y.v.data(), x.cols);
  }
  return push(std::move(y), needs(X), [X](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    Tensor& dx = t.grad(X);
    for (int i = 0; i < dx.rows; ++i) {
      kk::axpy(1.0 / dx.rows, dy.v.data(), dx.row_ptr(i), dx.cols);
    }
  });
}

Tape::Id Tape::concat(const std::vector<Id>& rows) {
  int total = 0;
  bool ng = false;
  for (Id id : rows) {
    if (value(id).rows != 1) throw std::invalid_argument("concat: row vectors only");
    total += value(id).cols;
    ng = ng || needs(id);
  }
  Tensor y(1, total);
  int off = 0;
  for (Id id : rows) {
    const Tensor& part = value(id);
    std::copy(part.v.begin(), part.v.end(), y.v.begin() + off);
    off += part.cols;
  }
  return push(std::move(y), ng, [rows](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    int off = 0;
    for (Id id : rows) {
      const int n = t.value(id).cols;
      if (t.needs(id)) t.accumulate(id, dy.v.data() + off, n);
      off += n;
    }
  });
}

Tape::Id Tape::stack_rows(const std::vector<Id>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty");
  const int cols = value(rows[0]).cols;
  Tensor y(static_cast<int>(rows.size()), cols);
  bool ng = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& part = value(rows[i]);
    if (part.rows != 1 || part.cols != cols) {
      throw std::invalid_argument("stack_rows: shape mismatch");
    }
    std::copy(part.v.begin(), part.v.end(), y.row_ptr(static_cast<int>(i)));
    ng = ng || needs(rows[i]);
  }
  return push(std::move(y), ng, [rows, cols](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      t.accumulate(rows[i], dy.row_ptr(static_cast<int>(i)), cols);
    }
  });
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rows != bv.rows || av.cols != bv.cols) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Tensor y = av;
  kk::axpy(1.0, bv.v.data(), y.v.data(), y.size());
  return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    t.accumulate(a, dy.v.data(), dy.size());
    t.accumulate(b, dy.v.data(), dy.size());
  });
}

Tape::Id Tape::scale(Id a, double s) {
  Tensor y = value(a);
  for (double& v : y.v) v *= s;
  return push(std::move(y), needs(a), [a, s](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    if (!t.needs(a)) return;
    Tensor& da = t.grad(a);
    kk::axpy(s, dy.v.data(), da.v.data(), dy.size());
  });
}

Tape::Id Tape::mean_of(const std::vector<Id>& rows) {
  if (rows.empty()) throw std::invalid_argument("mean_of: empty");
  Tensor y(value(rows[0]).rows, value(rows[0]).cols);
  bool ng = false;
  for (Id id : rows) {
    kk::axpy(1.0 / rows.size(), value(id).v.data(), y.v.data(), y.size());
    ng = ng || needs(id);
  }
  return push(std::move(y), ng, [rows](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    for (Id id : rows) {
      if (!t.needs(id)) continue;
      Tensor& g = t.grad(id);
      kk::axpy(1.0 / rows.size(), dy.v.data(), g.v.data(), dy.size());
    }
  });
}

Tape::Id Tape::softmax(Id logits) {
  const Tensor& z = value(logits);
  Tensor p(1, z.cols);
  double zmax = z.v[0];
  for (double v : z.v) zmax = std::max(zmax, v);
  double sum = 0.0;
  for (int i = 0; i < z.cols; ++i) {
    p.v[i] = std::exp(z.v[i] - zmax);
    sum += p.v[i];
  }
  for (double& v : p.v) v /= sum;
  return push(std::move(p), needs(logits), [logits](Tape& t, Id self) {
    const Tensor& dp = t.grad(self);
    const Tensor& p = t.value(self);
    Tensor& dz = t.grad(logits);
    const double inner = kk::dot(dp.v.data(), p.v.data(), p.size());
    for (int i = 0; i < p.size(); ++i) dz.v[i] += p.v[i] * (dp.v[i] - inner);
  });
}

Tape::Id Tape::pick_neglog(Id probs, int index) {
  const Tensor& p = value(probs);
  if (index < 0 || index >= p.size()) throw std::invalid_argument("pick_neglog: index");
  Tensor y(1, 1);
  const double pv = std::max(p.v[index], 1e-300);
  y.v[0] = -std::log(pv);
  return push(std::move(y), needs(probs), [probs, index, pv](Tape& t, Id self) {
    const double dy = t.grad(self).v[0];
    t.grad(probs).v[index] += -dy / pv;
  });
}

Tape::Id Tape::l2_normalize(Id v, double eps) {
  const Tensor& x = value(v);
  const double s = std::sqrt(kk::dot(x.v.data(), x.v.data(), x.size()) + eps * eps);
  Tensor y(1, x.cols);
  for (int i = 0; i < x.size(); ++i) y.v[i] = x.v[i] / s;
  return push(std::move(y), needs(v), [v, s](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& dx = t.grad(v);
    const double inner = kk::dot(dy.v.data(), y.v.data(), y.size());
    for (int i = 0; i < y.size(); ++i) dx.v[i] += (dy.v[i] - y.v[i] * inner) / s;
  });
}

Tape::Id Tape::sq_norm_diff(Id v, const std::vector<double>& target) {
  const Tensor& x = value(v);
  if (static_cast<int>(target.size()) != x.size()) {
    throw std::invalid_argument("sq_norm_diff: size");
  }
  Tensor y(1, 1);
  for (int i = 0; i < x.size(); ++i) {
    const double d = x.v[i] - target[i];
    y.v[0] += d * d;
  }
  return push(std::move(y), needs(v), [v, target](Tape& t, Id self) {
    const double dy = t.grad(self).v[0];
    const Tensor& x = t.value(v);
    Tensor& dx = t.grad(v);
    for (int i = 0; i < x.size(); ++i) dx.v[i] += 2.0 * (x.v[i] - target[i]) * dy;
  });
}

Tape::Id Tape::norm_diff(Id v, const std::vector<double>& target, double eps) {
  const Tensor& x = value(v);
  if (static_cast<int>(target.size()) != x.size()) {
    throw std::invalid_argument("norm_diff: size");
  }
  double sq = eps * eps;
  for (int i = 0; i < x.size(); ++i) {
    const double d = x.v[i] - target[i];
    sq += d * d;
  }
  const double val = std::sqrt(sq);
  Tensor y(1, 1);
  y.v[0] = val;
  return push(std::move(y), needs(v), [v, target, val](Tape& t, Id self) {
    const double dy = t.grad(self).v[0];
    const Tensor& x = t.value(v);
    Tensor& dx = t.grad(v);
    for (int i = 0; i < x.size(); ++i) {
      dx.v[i] += (x.v[i] - target[i]) / val * dy;
    }
  });
}

Tape::Id Tape::line_distance(Id p, const Vec3& p_hat, const Vec3& d_hat) {
  const Tensor& x = value(p);
  if (x.size() != 3) throw std::invalid_argument("line_distance: 1x3 input");
  const double dn = d_hat.norm();
  if (dn < 1e-8) throw std::invalid_argument("line_distance: degenerate axis");
  const Vec3 pv{x.v[0], x.v[1], x.v[2]};
  const Vec3 c = (pv - p_hat).cross(d_hat);
  const double cn = c.norm();
  Tensor y(1, 1);
  y.v[0] = cn / dn;
  return push(std::move(y), needs(p), [p, d_hat, c, cn, dn](Tape& t, Id self) {
    if (cn < 1e-12) return;  // on the line: subgradient 0
    const double dy = t.grad(self).v[0];
    const Vec3 g = d_hat.cross(c) * (dy / (cn * dn));
    Tensor& dx = t.grad(p);
    dx.v[0] += g.x;
    dx.v[1] += g.y;
    dx.v[2] += g.z;
  });
}

Tape::Id Tape::bce_with_logits(Id z, double label) {
  const Tensor& x = value(z);
  if (x.size() != 1) throw std::invalid_argument("bce_with_logits: scalar input");
  const double v = x.v[0];
  // softplus(v) - label * v, computed stably
  const double loss = std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))) - label * v;
  Tensor y(1, 1);
  y.v[0] = loss;
  return push(std::move(y), needs(z), [z, label](Tape& t, Id self) {
    const double dy = t.grad(self).v[0];
    const double v = t.value(z).v[0];
    const double sig = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                              : std::exp(v) / (1.0 + std::exp(v));
    t.grad(z).v[0] += (sig - label) * dy;
  });
}

Tape::Id Tape::add_weighted(const std::vector<Id>& scalars,
                            const std::vector<double>& w) {
  if (scalars.size() != w.size()) throw std::invalid_argument("add_weighted: sizes");
  Tensor y(1, 1);
  bool ng = false;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (value(scalars[i]).size() != 1) {
      throw std::invalid_argument("add_weighted: scalar inputs only");
    }
    y.v[0] += w[i] * value(scalars[i]).v[0];
    ng = ng || needs(scalars[i]);
  }
  return push(std::move(y), ng, [scalars, w](Tape& t, Id self) {
    const double dy = t.grad(self).v[0];
    for (std::size_t i = 0; i < scalars.size(); ++i) {
      if (t.needs(scalars[i])) t.grad(scalars[i]).v[0] += w[i] * dy;
    }
  });
}

void Tape::backward(Id root) {
  if (!grad_enabled_) throw std::logic_error("backward on a no-grad tape");
  if (value(root).size() != 1) throw std::invalid_argument("backward: scalar root");
  for (auto& n : nodes_) {
    if (n.needs_grad) n.grad = Tensor(n.val.rows, n.val.cols);
  }
  if (!nodes_[root].needs_grad) return;  // root independent of parameters
  nodes_[root].grad.v[0] = 1.0;
  for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; --id) {
    if (nodes_[id].needs_grad && nodes_[id].back) nodes_[id].back(*this, id);
  }
  for (auto& n : nodes_) {
    if (n.sink && n.needs_grad) {
      kk::axpy(1.0, n.grad.v.data(), n.sink->v.data(), n.grad.size());
    }
  }
}

}  // namespace kinemo::ad
