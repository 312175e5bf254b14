#include "vgsa/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>

namespace vgsa {

const Matrix& Var::value() const { return graph_->value(*this); }
const Matrix& Var::grad() const { return graph_->grad(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("scalar(): value has shape " + v.shape_string());
  }
  return v[0];
}

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  bound_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::lookup(Parameter& table, std::size_t row) {
  if (row >= table.value.rows()) {
    throw std::out_of_range("lookup: row " + std::to_string(row) + " outside table " +
                            table.value.shape_string());
  }
  Node n;
  n.value = Matrix::column(table.value.row_span(row));
  n.param = &table;
  n.lookup_row = row;
  n.is_lookup = true;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Graph::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.graph() != this) throw std::logic_error("record: input belongs to another graph");
    n.inputs.push_back(v.id());
    n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Matrix& Graph::value(Var v) const { return node_value(v.id()); }

const Matrix& Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? empty_ : n.grad;
}

void Graph::backward(Var loss) {
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  for (Node& n : nodes_) n.grad = Matrix();
  nodes_[loss.id()].grad = Matrix(1, 1, 1.0);

  std::vector<Matrix*> slots;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (!p.grad.same_shape(p.value)) p.zero_grad();
      if (n.is_lookup) {
        auto dst = p.grad.row_span(n.lookup_row);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad[j];
      } else {
        p.grad += n.grad;
      }
      continue;
    }
    if (!n.backward) continue;
    slots.assign(n.inputs.size(), nullptr);
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      Node& in = nodes_[n.inputs[i]];
      if (!in.needs_grad) continue;
      if (in.grad.empty()) {
        const Matrix& iv = node_value(n.inputs[i]);
        in.grad = Matrix(iv.rows(), iv.cols());
      }
      slots[i] = &in.grad;
    }
    n.backward(node_value(id), n.grad, slots);
  }
}

namespace ad {
namespace {

using Slots = std::span<Matrix* const>;

bool is_empty(const Matrix& m) { return m.size() == 0; }

void require_vector(const Matrix& m, const char* what) {
  if (m.rows() != 1 && m.cols() != 1) {
    throw ShapeError(std::string(what) + ": expected a vector, got " + m.shape_string());
  }
}

// Elementwise op whose derivative is expressed through its output value.
template <typename F, typename D>
Var pointwise(Var x, F f, D dydx) {
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.graph().record(std::move(out), {x},
                          [dydx](const Matrix& y, const Matrix& g, Slots in) {
                            Matrix& dx = *in[0];
                            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * dydx(y[i]);
                          });
}

void log_guard_once() {
  static std::atomic<bool> logged{false};
  if (!logged.exchange(true)) {
    std::clog << "vgsa: cosine similarity hit a zero-norm vector; using norm floor "
              << kCosineEps << "\n";
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: shape mismatch " + av.shape_string() + " x " + bv.shape_string());
  }
  Matrix out(av.rows(), bv.cols());
  gemm(false, false, 1.0, av, bv, 0.0, out);
  return a.graph().record(std::move(out), {a, b}, [a, b](const Matrix&, const Matrix& g, Slots in) {
    if (in[0]) gemm(false, true, 1.0, g, b.value(), 1.0, *in[0]);
    if (in[1]) gemm(true, false, 1.0, a.value(), g, 1.0, *in[1]);
  });
}

Var transpose(Var x) {
  return x.graph().record(x.value().transposed(), {x}, [](const Matrix&, const Matrix& g, Slots in) {
    Matrix& dx = *in[0];
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) dx(j, i) += g(i, j);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  out += b.value();
  return a.graph().record(std::move(out), {a, b}, [](const Matrix&, const Matrix& g, Slots in) {
    if (in[0]) *in[0] += g;
    if (in[1]) *in[1] += g;
  });
}

Var mul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "mul");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](const Matrix&, const Matrix& g, Slots in) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (in[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * bv[i];
    if (in[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * av[i];
  });
}

Var max2(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "max2");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] >= bv[i] ? av[i] : bv[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](const Matrix&, const Matrix& g, Slots in) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      Matrix* dst = av[i] >= bv[i] ? in[0] : in[1];
      if (dst) (*dst)[i] += g[i];
    }
  });
}

Var scale(Var x, double s) {
  Matrix out = x.value();
  out *= s;
  return x.graph().record(std::move(out), {x}, [s](const Matrix&, const Matrix& g, Slots in) {
    for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += s * g[i];
  });
}

Var tanh(Var x) {
  return pointwise(x, [](double v) { return std::tanh(v); },
                   [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return pointwise(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var relu(Var x) {
  return pointwise(x, [](double v) { return v > 0.0 ? v : 0.0; },
                   [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.graph().record(Matrix(1, 1, s), {x}, [](const Matrix&, const Matrix& g, Slots in) {
    for (double& d : in[0]->data()) d += g[0];
  });
}

Var add_n(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: empty list");
  Matrix out = xs.front().value();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require_same_shape(out, xs[i].value(), "add_n");
    out += xs[i].value();
  }
  return xs.front().graph().record(std::move(out), xs, [](const Matrix&, const Matrix& g, Slots in) {
    for (Matrix* d : in)
      if (d) *d += g;
  });
}

Var softmax_rows(Var x) {
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto src = xv.row_span(r);
    auto dst = out.row_span(r);
    if (src.empty()) continue;
    const double mx = *std::max_element(src.begin(), src.end());
    double z = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) z += (dst[j] = std::exp(src[j] - mx));
    for (double& v : dst) v /= z;
  }
  return x.graph().record(std::move(out), {x}, [](const Matrix& y, const Matrix& g, Slots in) {
    Matrix& dx = *in[0];
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(r, j) * y(r, j);
      for (std::size_t j = 0; j < y.cols(); ++j) dx(r, j) += y(r, j) * (g(r, j) - dot);
    }
  });
}

Var reduce_max_rows(Var x) {
  const Matrix& xv = x.value();
  if (xv.rows() == 0) throw std::invalid_argument("reduce_max_rows: empty input");
  Matrix out(1, xv.cols());
  std::vector<std::size_t> arg(xv.cols(), 0);
  for (std::size_t c = 0; c < xv.cols(); ++c) {
    double best = xv(0, c);
    for (std::size_t r = 1; r < xv.rows(); ++r) {
      if (xv(r, c) > best) {
        best = xv(r, c);
        arg[c] = r;
      }
    }
    out(0, c) = best;
  }
  return x.graph().record(std::move(out), {x},
                          [arg = std::move(arg)](const Matrix&, const Matrix& g, Slots in) {
                            for (std::size_t c = 0; c < arg.size(); ++c) (*in[0])(arg[c], c) += g(0, c);
                          });
}

Var concat_rows(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if ((!is_empty(av) && av.rows() != 1) || (!is_empty(bv) && bv.rows() != 1)) {
    throw ShapeError("concat_rows: expected row vectors, got " + av.shape_string() + " and " +
                     bv.shape_string());
  }
  const std::size_t p = av.size();
  const std::size_t q = bv.size();
  Matrix out(1, p + q);
  std::copy(av.data().begin(), av.data().end(), out.data().begin());
  std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(p));
  return a.graph().record(std::move(out), {a, b}, [p, q](const Matrix&, const Matrix& g, Slots in) {
    if (in[0])
      for (std::size_t i = 0; i < p; ++i) (*in[0])[i] += g[i];
    if (in[1])
      for (std::size_t i = 0; i < q; ++i) (*in[1])[i] += g[p + i];
  });
}

Var concat_cols(std::span<const Var> columns) {
  if (columns.empty()) throw std::invalid_argument("concat_cols: no columns");
  const std::size_t d = columns.front().rows();
  Matrix out(d, columns.size());
  for (std::size_t t = 0; t < columns.size(); ++t) {
    const Matrix& c = columns[t].value();
    if (c.rows() != d || c.cols() != 1) {
      throw ShapeError("concat_cols: expected [" + std::to_string(d) + "x1] column, got " +
                       c.shape_string());
    }
    for (std::size_t r = 0; r < d; ++r) out(r, t) = c[r];
  }
  return columns.front().graph().record(std::move(out), columns,
                                        [](const Matrix&, const Matrix& g, Slots in) {
                                          for (std::size_t t = 0; t < in.size(); ++t) {
                                            if (!in[t]) continue;
                                            for (std::size_t r = 0; r < g.rows(); ++r)
                                              (*in[t])[r] += g(r, t);
                                          }
                                        });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
  const std::size_t d = rows.front().cols();
  Matrix out(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Matrix& r = rows[i].value();
    if (r.rows() != 1 || r.cols() != d) {
      throw ShapeError("stack_rows: expected [1x" + std::to_string(d) + "] row, got " +
                       r.shape_string());
    }
    std::copy(r.data().begin(), r.data().end(), out.row_span(i).begin());
  }
  return rows.front().graph().record(std::move(out), rows,
                                     [](const Matrix&, const Matrix& g, Slots in) {
                                       for (std::size_t i = 0; i < in.size(); ++i) {
                                         if (!in[i]) continue;
                                         auto src = g.row_span(i);
                                         for (std::size_t j = 0; j < src.size(); ++j) (*in[i])[j] += src[j];
                                       }
                                     });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Matrix& xv = x.value();
  if (begin + count > xv.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + xv.shape_string());
  }
  Matrix out(count, xv.cols());
  std::copy_n(xv.data().begin() + static_cast<std::ptrdiff_t>(begin * xv.cols()), count * xv.cols(),
              out.data().begin());
  return x.graph().record(std::move(out), {x}, [begin](const Matrix&, const Matrix& g, Slots in) {
    double* dst = in[0]->data().data() + begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Matrix& xv = x.value();
  if (begin + count > xv.cols()) {
    throw ShapeError("slice_cols: cols [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + xv.shape_string());
  }
  Matrix out(xv.rows(), count);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = xv(r, begin + c);
  return x.graph().record(std::move(out), {x}, [begin](const Matrix&, const Matrix& g, Slots in) {
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) (*in[0])(r, begin + c) += g(r, c);
  });
}

Var dropout(Var x, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (p == 0.0) return x;
  const Matrix& xv = x.value();
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(xv.rows(), xv.cols());
  Matrix out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u < p ? 0.0 : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return x.graph().record(std::move(out), {x},
                          [mask = std::move(mask)](const Matrix&, const Matrix& g, Slots in) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * mask[i];
                          });
}

Var softmax_cross_entropy(Var logits, std::size_t target) {
  const Matrix& lv = logits.value();
  require_vector(lv, "softmax_cross_entropy");
  if (target >= lv.size()) {
    throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(target) +
                            " outside " + lv.shape_string());
  }
  const double mx = *std::max_element(lv.data().begin(), lv.data().end());
  double z = 0.0;
  for (double v : lv.data()) z += std::exp(v - mx);
  const double nll = mx + std::log(z) - lv[target];
  return logits.graph().record(
      Matrix(1, 1, nll), {logits}, [logits, target, mx, z](const Matrix&, const Matrix& g, Slots in) {
        const Matrix& lv = logits.value();
        Matrix& dx = *in[0];
        for (std::size_t i = 0; i < lv.size(); ++i) {
          const double p = std::exp(lv[i] - mx) / z;
          dx[i] += g[0] * (p - (i == target ? 1.0 : 0.0));
        }
      });
}

Var cosine_similarity(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError("cosine_similarity: feature widths differ " + av.shape_string() + " vs " +
                     bv.shape_string());
  }
  const std::size_t m = av.rows();
  const std::size_t n = bv.rows();
  const std::size_t d = av.cols();

  struct Normalized {
    Matrix unit;
    std::vector<double> norm;
    std::vector<bool> guarded;
  };
  auto normalize = [d](const Matrix& x) {
    Normalized r{Matrix(x.rows(), d), std::vector<double>(x.rows()), std::vector<bool>(x.rows())};
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (double v : x.row_span(i)) s += v * v;
      double nrm = std::sqrt(s);
      if (nrm < kCosineEps) {
        log_guard_once();
        nrm = kCosineEps;
        r.guarded[i] = true;
      }
      r.norm[i] = nrm;
      for (std::size_t j = 0; j < d; ++j) r.unit(i, j) = x(i, j) / nrm;
    }
    return r;
  };
  Normalized na = normalize(av);
  Normalized nb = normalize(bv);
  Matrix s(m, n);
  gemm(false, true, 1.0, na.unit, nb.unit, 0.0, s);

  return a.graph().record(
      std::move(s), {a, b},
      [na = std::move(na), nb = std::move(nb)](const Matrix& s, const Matrix& g, Slots in) {
        const std::size_t m = s.rows();
        const std::size_t n = s.cols();
        if (in[0]) {
          Matrix proj(m, na.unit.cols());
          gemm(false, false, 1.0, g, nb.unit, 0.0, proj);  // sum_j g_ij * b̂_j
          for (std::size_t i = 0; i < m; ++i) {
            double gs = 0.0;
            if (!na.guarded[i])
              for (std::size_t j = 0; j < n; ++j) gs += g(i, j) * s(i, j);
            for (std::size_t k = 0; k < proj.cols(); ++k)
              (*in[0])(i, k) += (proj(i, k) - gs * na.unit(i, k)) / na.norm[i];
          }
        }
        if (in[1]) {
          Matrix proj(n, nb.unit.cols());
          gemm(true, false, 1.0, g, na.unit, 0.0, proj);  // sum_i g_ij * â_i
          for (std::size_t j = 0; j < n; ++j) {
            double gs = 0.0;
            if (!nb.guarded[j])
              for (std::size_t i = 0; i < m; ++i) gs += g(i, j) * s(i, j);
            for (std::size_t k = 0; k < proj.cols(); ++k)
              (*in[1])(j, k) += (proj(j, k) - gs * nb.unit(j, k)) / nb.norm[j];
          }
        }
      });
}

Var cosine_sim(Var u, Var v) {
  require_vector(u.value(), "cosine_sim");
  require_vector(v.value(), "cosine_sim");
  if (u.value().size() != v.value().size()) {
    throw ShapeError("cosine_sim: lengths differ " + u.value().shape_string() + " vs " +
                     v.value().shape_string());
  }
  Var ur = u.rows() == 1 ? u : transpose(u);
  Var vr = v.rows() == 1 ? v : transpose(v);
  return cosine_similarity(ur, vr);
}

}  // namespace ad

double cosine_sim_strict(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine_sim_strict: lengths differ");
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw std::domain_error("cosine_sim_strict: zero-norm vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace vgsa
