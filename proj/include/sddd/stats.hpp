#ifndef SDDD_STATS_HPP
#define SDDD_STATS_HPP

namespace sddd {

// Quantile of the standard normal distribution (inverse CDF). Wichura's
// AS 241 rational approximation, accurate to about 1e-15 over (0, 1).
double normal_quantile(double p);

// Standard normal CDF.
double normal_cdf(double x);

// Upper tail probability P(X > x) for a chi-square distribution with
// dof degrees of freedom, via the regularized incomplete gamma function.
double chi_square_upper_tail(double x, int dof);

}  // namespace sddd

#endif  // SDDD_STATS_HPP
