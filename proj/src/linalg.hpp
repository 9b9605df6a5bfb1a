#ifndef SDDD_SRC_LINALG_HPP
#define SDDD_SRC_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sddd/errors.hpp"

namespace sddd {

// Gaussian elimination with partial pivoting on a small dense system.
// Throws CollinearityError naming labels[k] when column k yields no usable
// pivot. Intended for Gram systems whose dimension is the number of event
// times, so no effort is spent on large-n performance.
inline std::vector<double> solve_dense(std::vector<double> a,
                                       std::vector<double> b,
                                       const std::vector<std::string> &labels) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw ConfigError("solve_dense: shape mismatch");
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::fabs(v));
  const double tol = 1e-12 * std::max(scale, 1.0);

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::fabs(a[perm[k] * n + k]);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double v = std::fabs(a[perm[r] * n + k]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best <= tol) {
      const std::string what =
          k < labels.size() ? labels[k] : std::to_string(k);
      throw CollinearityError("singular system: column '" + what +
                              "' is linearly dependent");
    }
    std::swap(perm[k], perm[pivot]);
    const double akk = a[perm[k] * n + k];
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = a[perm[r] * n + k] / akk;
      if (f == 0.0) continue;
      for (std::size_t c = k; c < n; ++c) {
        a[perm[r] * n + c] -= f * a[perm[k] * n + c];
      }
      b[perm[r]] -= f * b[perm[k]];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[perm[k]];
    for (std::size_t c = k + 1; c < n; ++c) s -= a[perm[k] * n + c] * x[c];
    x[k] = s / a[perm[k] * n + k];
  }
  return x;
}

}  // namespace sddd

#endif  // SDDD_SRC_LINALG_HPP
