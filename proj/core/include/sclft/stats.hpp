#pragma once

#include <span>

#include "sclft/error.hpp"

namespace sclft {

double mean(std::span<const double> xs);

/// Population standard deviation (divisor n), the convention used in
/// report tables.
double population_std(std::span<const double> xs);

/// Sample variance (divisor n-1), as Welch's test requires.
double sample_variance(std::span<const double> xs);

/// Regularized incomplete beta function I_x(a, b) via the Lentz continued
/// fraction; |error| < ~1e-14 for moderate a, b.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Welch's unequal-variance two-sample t-test. Degenerate zero-variance
/// groups: equal means give p = 1, different means give p = 0.
/// Requires at least 2 observations per group.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace sclft
