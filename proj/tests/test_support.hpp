#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "vgsa/autodiff.hpp"

namespace vgsa::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

// Central differences of a scalar function of one matrix, computed without
// touching any backward code.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix x,
                               double eps = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double plus = f(x);
    x[i] = saved - eps;
    const double minus = f(x);
    x[i] = saved;
    g[i] = (plus - minus) / (2.0 * eps);
  }
  return g;
}

inline double max_relative_error(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Reverse-mode gradient of sum(op(x) .* w) with respect to x.
inline Matrix analytic_gradient(const std::function<Var(Var)>& op, const Matrix& x, const Matrix& w) {
  Parameter p("x", x);
  Graph g;
  Var y = op(g.param(p));
  g.backward(ad::sum(ad::mul(y, g.constant(w))));
  return p.grad;
}

inline double weighted_value(const std::function<Var(Var)>& op, const Matrix& x, const Matrix& w) {
  Graph g;
  Var y = op(g.constant(x));
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += y.value()[i] * w[i];
  return s;
}

inline double unary_fd_error(const std::function<Var(Var)>& op, const Matrix& x, std::mt19937_64& rng) {
  Graph probe;
  const Matrix y = op(probe.constant(x)).value();
  const Matrix w = random_matrix(y.rows(), y.cols(), rng);
  const Matrix numeric = numeric_gradient([&](const Matrix& m) { return weighted_value(op, m, w); }, x);
  return max_relative_error(analytic_gradient(op, x, w), numeric);
}

}  // namespace vgsa::testing
