#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vgsa {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t points = 0;
  bool passed = false;
};

struct GradientSuiteOptions {
  std::uint64_t seed = 7;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::size_t points = 10;  // random evaluation points per check
};

/// Central-difference checks of every differentiable operation and of the
/// three training objectives at tiny dimensions (d_cell=4, d_a=3, n_a=2,
/// d_e=4, d_img=5, B=3, T<=5), in double precision.
std::vector<GradCheckResult> run_gradient_suite(const GradientSuiteOptions& options = {});

}  // namespace vgsa
