#include "vgsa/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace vgsa {
namespace {

double evaluate(const ScalarFn& f) {
  Graph g;
  return f(g).scalar();
}

}  // namespace

double grad_check(const ScalarFn& f, std::span<Parameter* const> params, double eps) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    Var out = f(g);
    (void)out.scalar();  // rejects non-scalar outputs
    g.backward(out);
  }

  double worst = 0.0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double plus = evaluate(f);
      p->value[i] = saved - eps;
      const double minus = evaluate(f);
      p->value[i] = saved;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double denom = std::max(1e-12, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

double grad_check(const ScalarFn& f, Parameter& theta, double eps) {
  Parameter* one[] = {&theta};
  return grad_check(f, one, eps);
}

}  // namespace vgsa
