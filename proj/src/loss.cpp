#include "paclab/loss.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "paclab/errors.hpp"

namespace paclab {

LossFn LossFn::zero_one() {
    return LossFn(LossKind::zero_one, LabelKind::discrete, 1.0);
}

LossFn LossFn::squared(double lo, double hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi)) || !(hi > lo))
        throw ValidationError("squared loss needs a finite range with hi > lo");
    LossFn fn(LossKind::squared, LabelKind::continuous, (hi - lo) * (hi - lo));
    fn.lo_ = lo;
    fn.hi_ = hi;
    return fn;
}

LossFn LossFn::custom_bounded(CustomFn fn, double bound, LabelKind accepts) {
    if (!fn) throw ValidationError("custom loss needs a callable");
    if (!(std::isfinite(bound) && bound > 0.0))
        throw ValidationError("custom loss bound must be finite and positive");
    LossFn out(LossKind::custom_bounded, accepts, bound);
    out.custom_ = std::move(fn);
    return out;
}

namespace {

void check_kind(const LossFn& loss, const Label& label, const char* which) {
    if (label.kind() != loss.label_kind())
        throw KindMismatchError(std::string("loss expects ") +
                                (loss.label_kind() == LabelKind::discrete
                                     ? "discrete"
                                     : "continuous") +
                                " labels, got the other kind for " + which);
}

void check_range(const LossFn& loss, const Label& label, const char* which) {
    const double v = label.value();
    if (!(v >= loss.range_lo() && v <= loss.range_hi()))
        throw LabelRangeError(std::string(which) + " label " + std::to_string(v) +
                              " outside the declared range [" +
                              std::to_string(loss.range_lo()) + ", " +
                              std::to_string(loss.range_hi()) + "]");
}

}  // namespace

double loss_eval(const LossFn& loss, const Label& y, const Label& yhat) {
    check_kind(loss, y, "y");
    check_kind(loss, yhat, "yhat");
    switch (loss.kind()) {
        case LossKind::zero_one:
            return y == yhat ? 0.0 : 1.0;
        case LossKind::squared: {
            check_range(loss, y, "y");
            check_range(loss, yhat, "yhat");
            const double d = y.value() - yhat.value();
            return d * d;
        }
        case LossKind::custom_bounded: {
            const double v = loss.custom()(y, yhat);
            if (!(v >= 0.0 && v <= loss.bound()))
                throw LabelRangeError("custom loss returned a value outside [0, B]");
            return v;
        }
    }
    throw Error("unreachable loss kind");
}

double masked_loss(const LossFn& loss, const Label& y, const Label& yhat,
                   double u_i, double u) {
    const double value = loss_eval(loss, y, yhat);
    return u_i <= u ? value : 0.0;
}

}  // namespace paclab
