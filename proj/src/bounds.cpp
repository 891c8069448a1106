#include "paclab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "paclab/errors.hpp"

namespace paclab {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Bet tuning: fraction of the positivity limit the bet may use, and the
// variance floor in the plug-in denominator.
constexpr double kBetClipFraction = 0.75;
constexpr double kBetVarianceFloor = 0.01;

double sample_mean(const std::vector<double>& values) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

void require_nonempty(const BoundedSample& sample) {
    if (sample.values.empty()) throw ValidationError("mean bound needs a nonempty sample");
}

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal quantile needs p in (0,1)");

    // Acklam's rational approximation (|rel err| < 1.2e-9), then one Halley
    // step against erfc brings it to near machine precision.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;

    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * kPi) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

double mean_ub_clt(const BoundedSample& sample, double alpha) {
    require_nonempty(sample);
    require_alpha(alpha);
    const std::size_t m = sample.values.size();
    const double mu = sample_mean(sample.values);
    double sd = 0.0;
    if (m > 1) {
        double ss = 0.0;
        for (double v : sample.values) ss += (v - mu) * (v - mu);
        sd = std::sqrt(ss / static_cast<double>(m - 1));
    }
    return mu + normal_quantile(1.0 - alpha) * sd / std::sqrt(static_cast<double>(m));
}

double mean_ub_hoeffding(const BoundedSample& sample, double alpha) {
    require_nonempty(sample);
    require_alpha(alpha);
    if (!std::isfinite(sample.support_max))
        throw ValidationError("Hoeffding bound needs a finite support bound");
    const double m = static_cast<double>(sample.values.size());
    return sample_mean(sample.values) +
           sample.support_max * std::sqrt(std::log(1.0 / alpha) / (2.0 * m));
}

double mean_ub_betting(const BoundedSample& sample, double alpha, int grid_size) {
    require_nonempty(sample);
    require_alpha(alpha);
    if (grid_size < 2) throw ValidationError("betting bound needs a grid of at least 2");
    if (!std::isfinite(sample.support_max) || sample.support_max < 0.0)
        throw ValidationError("betting bound needs a finite nonnegative support bound");

    const double scale = sample.support_max;
    const std::size_t m = sample.values.size();

    std::vector<double> z(m);
    for (std::size_t t = 0; t < m; ++t) {
        const double v = sample.values[t];
        if (!(v >= 0.0) || v > scale * (1.0 + 1e-12))
            throw ValidationError("sample value outside [0, support_max]");
        z[t] = scale > 0.0 ? std::min(v / scale, 1.0) : 0.0;
    }
    if (scale == 0.0) return 0.0;  // all values are exactly 0

    // Predictable plug-in statistics: running mean anchored at 1/2 and running
    // mean squared deviation; bet t sees only z_1..z_{t-1}.
    std::vector<double> mean_prev(m), var_prev(m);
    {
        double sum = 0.0, sq = 0.0, mu = 0.5;
        for (std::size_t t = 0; t < m; ++t) {
            mean_prev[t] = mu;
            var_prev[t] = t > 0 ? sq / static_cast<double>(t) : 0.0;
            sum += z[t];
            mu = (0.5 + sum) / static_cast<double>(t + 2);
            sq += (z[t] - mu) * (z[t] - mu);
        }
    }

    const double reject_at = 1.0 / alpha;
    const double step = 1.0 / static_cast<double>(grid_size - 1);
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(m);

    // Scan candidates from the top; the first survivor is the supremum, and
    // everything below it is irrelevant to an upper bound.
    for (int j = grid_size - 1; j >= 0; --j) {
        const double q = static_cast<double>(j) * step;
        const double clip_hi = q > 0.0 ? kBetClipFraction / q : 1e12;
        const double clip_lo = q < 1.0 ? -kBetClipFraction / (1.0 - q) : -1e12;
        double capital = 1.0;
        bool rejected = false;
        for (std::size_t t = 0; t < m; ++t) {
            double lam = (mean_prev[t] - q) / (var_prev[t] + kBetVarianceFloor);
            lam = std::clamp(lam, clip_lo, clip_hi);
            capital *= 1.0 + lam * (z[t] - q);
            if (capital >= reject_at) {
                rejected = true;
                break;
            }
        }
        // Floored at the sample mean: raising the bound keeps it valid, and at
        // loose alpha the capital can otherwise knock out candidates just above
        // a late-rising mean.
        if (!rejected) return scale * std::max(std::min(1.0, q + step), mean);
    }
    return scale;  // every candidate was rejected; fall back to the support bound
}

double mean_ub(BoundMethod method, const BoundedSample& sample, double alpha,
               int grid_size) {
    switch (method) {
        case BoundMethod::clt:
            return mean_ub_clt(sample, alpha);
        case BoundMethod::hoeffding:
            return mean_ub_hoeffding(sample, alpha);
        case BoundMethod::betting:
            return mean_ub_betting(sample, alpha, grid_size);
    }
    throw Error("unreachable bound method");
}

}  // namespace paclab
