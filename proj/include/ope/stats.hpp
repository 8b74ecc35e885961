#pragma once

#include <cmath>
#include <cstddef>

namespace ope {

// Inverse CDF of the standard normal distribution. Rational approximation
// polished with one Halley step on erfc; absolute error is well below 1e-9
// over (0, 1). Throws std::domain_error outside (0, 1).
double normal_quantile(double p);

// Kahan-Babuska (Neumaier) compensated accumulator. Summation order is fixed
// by the caller; the compensation keeps long reductions reproducible to
// ~1e-12 regardless of how the terms were produced.
class NeumaierSum {
 public:
  void add(double x) noexcept {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// One-sided upper confidence bound for a binomial proportion (exact
// Clopper-Pearson): the largest q such that P[Bin(n, q) <= k] >= 1 - level
// fails, found by bisection on the CDF. Used for miscoverage assertions.
double binomial_upper_bound(long long successes, long long trials, double level);

}  // namespace ope
