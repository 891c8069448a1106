#pragma once

#include <string>
#include <utility>
#include <variant>

#include "paclab/errors.hpp"

namespace paclab {

enum class LabelKind { discrete, continuous };

// A label is either a categorical token or a real scalar. A dataset is
// homogeneous: every label in it has the same kind.
class Label {
 public:
    Label() : value_(std::string{}) {}
    explicit Label(std::string token) : value_(std::move(token)) {}
    explicit Label(const char* token) : value_(std::string(token)) {}
    explicit Label(double value) : value_(value) {}

    LabelKind kind() const {
        return std::holds_alternative<std::string>(value_) ? LabelKind::discrete
                                                           : LabelKind::continuous;
    }

    const std::string& token() const {
        if (kind() != LabelKind::discrete)
            throw KindMismatchError("label is continuous, token() is undefined");
        return std::get<std::string>(value_);
    }

    double value() const {
        if (kind() != LabelKind::continuous)
            throw KindMismatchError("label is discrete, value() is undefined");
        return std::get<double>(value_);
    }

    bool operator==(const Label& other) const { return value_ == other.value_; }
    bool operator!=(const Label& other) const { return !(*this == other); }

 private:
    std::variant<std::string, double> value_;
};

}  // namespace paclab
