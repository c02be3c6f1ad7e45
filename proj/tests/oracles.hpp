#pragma once

#include <cmath>
#include <functional>

namespace oracle {

/// Root of a monotone function on [lo, hi] by bisection until the bracket stops shrinking.
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Default probability that equates the expected return of a risky bond with
/// the risk-free rate: (1 - p) * yield - p * loss = riskfree.
inline double equilibrium_probability(double yield, double riskfree, double loss) {
  return bisect([&](double p) { return (1.0 - p) * yield - p * loss - riskfree; }, -10.0, 10.0);
}

}  // namespace oracle
