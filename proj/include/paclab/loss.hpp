#pragma once

#include <functional>

#include "paclab/label.hpp"

namespace paclab {

enum class LossKind { zero_one, squared, custom_bounded };

// Bounded per-pair loss. bound() is the maximum attainable value B, which the
// nonasymptotic mean bounds and the importance reweighting both need.
class LossFn {
 public:
    using CustomFn = std::function<double(const Label&, const Label&)>;

    static LossFn zero_one();
    // Squared loss for continuous labels declared to lie in [lo, hi];
    // B = (hi - lo)^2.
    static LossFn squared(double lo, double hi);
    static LossFn custom_bounded(CustomFn fn, double bound, LabelKind accepts);

    LossKind kind() const { return kind_; }
    LabelKind label_kind() const { return label_kind_; }
    double bound() const { return bound_; }
    double range_lo() const { return lo_; }
    double range_hi() const { return hi_; }
    const CustomFn& custom() const { return custom_; }

 private:
    LossFn(LossKind kind, LabelKind label_kind, double bound)
        : kind_(kind), label_kind_(label_kind), bound_(bound) {}

    LossKind kind_;
    LabelKind label_kind_;
    double bound_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    CustomFn custom_;
};

double loss_eval(const LossFn& loss, const Label& y, const Label& yhat);

// loss_eval(y, yhat) * 1{u_i <= u}; the mask comparison is inclusive.
double masked_loss(const LossFn& loss, const Label& y, const Label& yhat,
                   double u_i, double u);

}  // namespace paclab
