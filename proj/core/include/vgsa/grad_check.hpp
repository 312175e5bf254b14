#pragma once

#include <functional>
#include <span>

#include "vgsa/autodiff.hpp"

namespace vgsa {

/// Builds a fresh graph and returns a 1x1 node. Called repeatedly by the
/// checker, so it must be a pure function of the bound parameters.
using ScalarFn = std::function<Var(Graph&)>;

/// Maximum over all entries of the given parameters of
///   |analytic - central difference| / max(1e-12, |analytic| + |numeric|).
/// Parameter gradients are overwritten. Throws ShapeError if f is not 1x1.
double grad_check(const ScalarFn& f, std::span<Parameter* const> params, double eps = 1e-5);
double grad_check(const ScalarFn& f, Parameter& theta, double eps = 1e-5);

}  // namespace vgsa
