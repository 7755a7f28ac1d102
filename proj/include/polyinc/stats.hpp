#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "polyinc/core.hpp"

namespace polyinc {

/// Least-squares line through (log x, log |y|): {slope, intercept, rms residual}.
inline std::array<double, 3> loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n) throw Error(ErrorCode::InvalidInput, "log-log fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double X = std::log(xs[i]), Y = std::log(std::abs(ys[i]));
    sx += X;
    sy += Y;
    sxx += X * X;
    sxy += X * Y;
  }
  const double nn = static_cast<double>(n);
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / nn;
  double res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::log(std::abs(ys[i])) - (icpt + slope * std::log(xs[i]));
    res += e * e;
  }
  return {slope, icpt, std::sqrt(res / nn)};
}

inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) { return loglog_fit(xs, ys)[0]; }

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre01(int n) {
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2 * k - 1) * z * p1 - (k - 1) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = 0.5 * (1 - z);
    w[static_cast<std::size_t>(i)] = 1.0 / ((1 - z * z) * dp * dp);
  }
  return {x, w};
}

}  // namespace polyinc
