#pragma once

#include <vector>

namespace paclab {

enum class BoundMethod { clt, hoeffding, betting };

// An i.i.d. sample of nonnegative reals together with an a-priori upper bound
// B' on its support. Importance-weighted loss samples have B' = B / min_i pi_i.
struct BoundedSample {
    std::vector<double> values;
    double support_max = 1.0;
};

// (p)-quantile of the standard normal, accurate to well below 1e-8
// (Acklam's rational approximation plus one Halley refinement via erfc).
double normal_quantile(double p);

// mean + z_{1-alpha} * sd / sqrt(m), sd with the (m-1) denominator
// (sd taken as 0 when m == 1). Asymptotically valid.
double mean_ub_clt(const BoundedSample& sample, double alpha);

// mean + B' * sqrt(ln(1/alpha) / (2m)). Valid for any m.
double mean_ub_hoeffding(const BoundedSample& sample, double alpha);

// Test-martingale bound: values are rescaled to [0,1] by B', each candidate
// mean q on a uniform grid is tested with the capital process
//   K_t(q) = prod_t (1 + lambda_t(q) (z_t - q)),
// with a predictable plug-in bet lambda_t(q) clipped so the capital stays
// positive, and q is rejected once K_t >= 1/alpha (Ville). The bound is the
// largest surviving grid point plus one grid step, times B'. Valid for any m.
double mean_ub_betting(const BoundedSample& sample, double alpha, int grid_size = 1000);

double mean_ub(BoundMethod method, const BoundedSample& sample, double alpha,
               int grid_size = 1000);

}  // namespace paclab
