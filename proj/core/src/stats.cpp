#include "sclft/stats.hpp"

#include <cmath>

namespace sclft {

double mean(std::span<const double> xs) {
  require(!xs.empty(), Errc::insufficient_runs, "mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

double sample_variance(std::span<const double> xs) {
  require(xs.size() >= 2, Errc::insufficient_runs, "sample_variance: need at least 2 values");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, Errc::invalid_argument,
          "regularized_incomplete_beta: a, b must be positive");
  require(x >= 0.0 && x <= 1.0, Errc::invalid_argument,
          "regularized_incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  require(df > 0.0, Errc::invalid_argument, "student_t_two_sided_p: df must be positive");
  if (std::isinf(t)) return 0.0;
  // 2 * (1 - F(|t|)) = I_{df/(df+t^2)}(df/2, 1/2)
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 2 && b.size() >= 2, Errc::insufficient_runs,
          "welch_t_test: need at least 2 observations per group");
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a) / static_cast<double>(a.size());
  const double vb = sample_variance(b) / static_cast<double>(b.size());
  const double se2 = va + vb;

  WelchResult r;
  if (se2 == 0.0) {
    // both groups constant
    r.t = ma == mb ? 0.0 : (ma > mb ? HUGE_VAL : -HUGE_VAL);
    r.df = static_cast<double>(a.size() + b.size() - 2);
    r.p_value = ma == mb ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  const double denom = va * va / static_cast<double>(a.size() - 1) +
                       vb * vb / static_cast<double>(b.size() - 1);
  r.df = denom == 0.0 ? static_cast<double>(a.size() + b.size() - 2) : se2 * se2 / denom;
  r.p_value = student_t_two_sided_p(r.t, r.df);
  return r;
}

}  // namespace sclft
