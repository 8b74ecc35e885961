#include "ope/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace ope {

namespace {

// Acklam's rational approximation to the normal inverse CDF.
double acklam(double p) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  }
  double x = acklam(p);
  // One Halley step against the exact CDF expressed through erfc.
  constexpr double sqrt2 = 1.4142135623730951;
  constexpr double sqrt_2pi = 2.5066282746310002;
  double e = 0.5 * std::erfc(-x / sqrt2) - p;
  double u = e * sqrt_2pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

double binomial_cdf(long long k, long long n, double q) {
  if (q <= 0.0) return 1.0;
  if (q >= 1.0) return k >= n ? 1.0 : 0.0;
  // Sum P[X = i] for i <= k in log space; n stays small in our use.
  double cdf = 0.0;
  double log_q = std::log(q);
  double log_1mq = std::log1p(-q);
  double log_coef = 0.0;  // log C(n, 0)
  for (long long i = 0; i <= k; ++i) {
    if (i > 0) {
      log_coef += std::log(static_cast<double>(n - i + 1)) - std::log(static_cast<double>(i));
    }
    cdf += std::exp(log_coef + static_cast<double>(i) * log_q +
                    static_cast<double>(n - i) * log_1mq);
  }
  return cdf < 1.0 ? cdf : 1.0;
}

}  // namespace

double binomial_upper_bound(long long successes, long long trials, double level) {
  if (trials <= 0 || successes < 0 || successes > trials) {
    throw std::invalid_argument("binomial_upper_bound: bad counts");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("binomial_upper_bound: level must lie in (0, 1)");
  }
  if (successes == trials) return 1.0;
  // Smallest q with P[Bin(trials, q) <= successes] <= 1 - level.
  double lo = static_cast<double>(successes) / static_cast<double>(trials);
  double hi = 1.0;
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (binomial_cdf(successes, trials, mid) > 1.0 - level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace ope
