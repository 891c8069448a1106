#include "paclab/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "paclab/errors.hpp"

namespace paclab {

EstimationSample draw_estimation_sample(const Dataset& data, const LossFn& loss,
                                        const PacConfig& config, ExpertOracle& oracle,
                                        SplitRng& rng) {
    const std::size_t n = data.size();
    config.validate(n);

    EstimationSample sample;
    sample.draws.reserve(config.m);
    for (std::size_t j = 0; j < config.m; ++j) {
        EstimationDraw draw;
        draw.index = rng.next_index(n);
        draw.weight = config.weight(draw.index);
        draw.included = rng.bernoulli(draw.weight);
        const DataPoint& point = data.points[draw.index];
        draw.uncertainty = point.uncertainty;
        if (draw.included) {
            const Label& truth = oracle.query(point.id);
            draw.loss = loss_eval(loss, truth, point.predicted);
        }
        sample.draws.push_back(std::move(draw));
    }
    return sample;
}

LubCurve compute_lub_curve(const EstimationSample& sample, const Dataset& data,
                           const LossFn& loss, const PacConfig& config,
                           const MeanUbFn& mean_ub_override) {
    if (sample.draws.empty()) throw ValidationError("estimation sample is empty");

    const std::size_t m = sample.draws.size();
    const double support = loss.bound() / config.min_weight(data.size());

    LubCurve curve;
    curve.breakpoints.reserve(data.size());
    for (const auto& p : data.points) curve.breakpoints.push_back(p.uncertainty);
    std::sort(curve.breakpoints.begin(), curve.breakpoints.end());
    curve.breakpoints.erase(
        std::unique(curve.breakpoints.begin(), curve.breakpoints.end()),
        curve.breakpoints.end());

    // Sample uncertainties sorted once; breakpoints between which no sample
    // uncertainty falls share the same masked multiset, so one bound serves
    // the whole run of breakpoints.
    std::vector<double> sample_u(m);
    for (std::size_t j = 0; j < m; ++j) sample_u[j] = sample.draws[j].uncertainty;
    std::sort(sample_u.begin(), sample_u.end());

    const auto bound_fn = [&](const BoundedSample& s) {
        if (mean_ub_override) return mean_ub_override(s, config.alpha);
        return mean_ub(config.bound_method, s, config.alpha, config.betting_grid);
    };

    curve.bounds.resize(curve.breakpoints.size());
    std::size_t last_active = m + 1;  // sentinel: not computed yet
    double last_bound = 0.0;
    BoundedSample masked;
    masked.values.resize(m);
    masked.support_max = support;
    for (std::size_t bi = 0; bi < curve.breakpoints.size(); ++bi) {
        const double u = curve.breakpoints[bi];
        const std::size_t active = static_cast<std::size_t>(
            std::upper_bound(sample_u.begin(), sample_u.end(), u) - sample_u.begin());
        if (active != last_active) {
            for (std::size_t j = 0; j < m; ++j) {
                const auto& d = sample.draws[j];
                const bool open = d.uncertainty <= u;
                masked.values[j] = (open && d.included) ? d.loss / d.weight : 0.0;
            }
            last_bound = bound_fn(masked);
            last_active = active;
        }
        curve.bounds[bi] = last_bound;
    }
    return curve;
}

double select_threshold(const LubCurve& curve, double epsilon) {
    if (curve.breakpoints.empty()) throw ValidationError("bound curve is empty");
    for (std::size_t i = 0; i < curve.breakpoints.size(); ++i)
        if (curve.bounds[i] > epsilon) return curve.breakpoints[i];
    return kNoThreshold;
}

LabeledOutput run_pac_labeling(const Dataset& data, const LossFn& loss,
                               const PacConfig& config, ExpertOracle& oracle,
                               SplitRng& rng) {
    data.validate();
    config.validate(data.size());

    const std::size_t queries_before = oracle.distinct_queries();
    const EstimationSample sample =
        draw_estimation_sample(data, loss, config, oracle, rng);
    const LubCurve curve = compute_lub_curve(sample, data, loss, config);
    const double u_hat = select_threshold(curve, config.epsilon);

    LabeledOutput out;
    out.threshold = u_hat;
    out.labels.reserve(data.size());
    out.provenance.reserve(data.size());
    for (const auto& p : data.points) {
        if (p.uncertainty >= u_hat) {
            out.labels.push_back(oracle.query(p.id));
            out.provenance.push_back(Provenance::expert);
        } else {
            out.labels.push_back(p.predicted);
            out.provenance.push_back(Provenance::model);
        }
    }
    // Estimation draws with xi = 1 already paid for their expert label; keep it.
    for (const auto& d : sample.draws) {
        if (!d.included) continue;
        out.labels[d.index] = oracle.query(data.points[d.index].id);
        out.provenance[d.index] = Provenance::expert;
    }

    out.expert_count = oracle.distinct_queries() - queries_before;
    out.total_cost = oracle.cost_per_query() * static_cast<double>(out.expert_count);
    return out;
}

LabeledOutput run_pac_labeling(const Dataset& data, const LossFn& loss,
                               const PacConfig& config, ExpertOracle& oracle) {
    SplitRng rng(config.seed);
    return run_pac_labeling(data, loss, config, oracle, rng);
}

}  // namespace paclab
