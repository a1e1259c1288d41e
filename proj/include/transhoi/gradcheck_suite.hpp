#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace transhoi {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckCase {
  std::string name;
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  std::size_t kinks = 0;
  std::string worst_param;
  double worst_analytic = 0;
  double worst_numeric = 0;
};

struct GradCheckSuite {
  std::vector<GradCheckCase> cases;

  double max_relative_error() const;
  bool passed(double tolerance = kGradCheckTolerance) const { return max_relative_error() <= tolerance; }
};

// Finite-difference checks of every trainable operation on small random instances.
GradCheckSuite run_gradcheck_suite(std::uint64_t seed);

}  // namespace transhoi
