#include "sddd/rng.hpp"

#include "sddd/stats.hpp"

namespace sddd {

double Rng::normal() {
  // Keep the uniform strictly inside (0,1); 2^-54 is below the resolution of
  // uniform() so the clamp only guards the exact-zero draw.
  double u = uniform();
  if (u <= 0.0) u = 0x1.0p-54;
  return normal_quantile(u);
}

}  // namespace sddd
