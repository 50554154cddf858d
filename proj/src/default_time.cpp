#include "palab/default_time.hpp"

#include <cmath>
#include <sstream>

#include "palab/errors.hpp"
#include "palab/numerics.hpp"

namespace palab {

std::string_view to_string(DefaultFamily family) {
    switch (family) {
        case DefaultFamily::Beta: return "beta";
        case DefaultFamily::Uniform: return "uniform";
        case DefaultFamily::Exponential: return "exponential";
        case DefaultFamily::None: return "none";
    }
    return "unknown";
}

DefaultFamily default_family_from_string(std::string_view name) {
    if (name == "beta") return DefaultFamily::Beta;
    if (name == "uniform") return DefaultFamily::Uniform;
    if (name == "exponential") return DefaultFamily::Exponential;
    if (name == "none") return DefaultFamily::None;
    throw ConfigError("family", "unknown default family '" + std::string(name) + "'");
}

DefaultModel::DefaultModel(DefaultFamily family, double a, double b, double rate, double horizon,
                           double hazard_cap)
    : family_(family), a_(a), b_(b), rate_(rate), horizon_(horizon), hazard_cap_(hazard_cap) {
    if (!(horizon_ > 0.0)) throw DomainError("default: horizon must be positive");
    if (!(hazard_cap_ > 0.0)) throw DomainError("default: hazard_cap must be positive");
    if (family_ == DefaultFamily::Beta && !(a_ > 0.0 && b_ > 0.0))
        throw DomainError("default: beta parameters must be positive");
    if (family_ == DefaultFamily::Exponential && !(rate_ > 0.0))
        throw DomainError("default: exponential rate must be positive");
}

DefaultModel DefaultModel::beta(double a, double b, double horizon, double hazard_cap) {
    return {DefaultFamily::Beta, a, b, 0.0, horizon, hazard_cap};
}

DefaultModel DefaultModel::uniform(double horizon, double hazard_cap) {
    return {DefaultFamily::Uniform, 1.0, 1.0, 0.0, horizon, hazard_cap};
}

DefaultModel DefaultModel::exponential(double rate, double horizon, double hazard_cap) {
    return {DefaultFamily::Exponential, 0.0, 0.0, rate, horizon, hazard_cap};
}

DefaultModel DefaultModel::none(double horizon) {
    return {DefaultFamily::None, 0.0, 0.0, 0.0, horizon, kDefaultHazardCap};
}

double DefaultModel::pdf(double t) const {
    if (t < 0.0) return 0.0;
    switch (family_) {
        case DefaultFamily::Uniform:
            return t <= horizon_ ? 1.0 / horizon_ : 0.0;
        case DefaultFamily::Beta: {
            if (t > horizon_) return 0.0;
            const double s = t / horizon_;
            if ((s == 0.0 && a_ < 1.0) || (s == 1.0 && b_ < 1.0))
                return std::numeric_limits<double>::infinity();
            return std::pow(s, a_ - 1.0) * std::pow(1.0 - s, b_ - 1.0) /
                   (numerics::beta_function(a_, b_) * horizon_);
        }
        case DefaultFamily::Exponential:
            return rate_ * std::exp(-rate_ * t);
        case DefaultFamily::None:
            return 0.0;
    }
    return 0.0;
}

double DefaultModel::survival(double t) const {
    if (t <= 0.0) return 1.0;
    switch (family_) {
        case DefaultFamily::Uniform:
            return t >= horizon_ ? 0.0 : 1.0 - t / horizon_;
        case DefaultFamily::Beta:
            return t >= horizon_ ? 0.0 : numerics::incomplete_beta_complement(a_, b_, t / horizon_);
        case DefaultFamily::Exponential:
            return std::exp(-rate_ * t);
        case DefaultFamily::None:
            return 1.0;
    }
    return 1.0;
}

double DefaultModel::cdf(double t) const {
    if (t <= 0.0) return 0.0;
    switch (family_) {
        case DefaultFamily::Uniform:
            return t >= horizon_ ? 1.0 : t / horizon_;
        case DefaultFamily::Beta:
            return t >= horizon_ ? 1.0 : numerics::incomplete_beta(a_, b_, t / horizon_);
        case DefaultFamily::Exponential:
            return -std::expm1(-rate_ * t);
        case DefaultFamily::None:
            return 0.0;
    }
    return 0.0;
}

double DefaultModel::hazard_uncapped(double t) const {
    if (t < 0.0) return 0.0;
    switch (family_) {
        case DefaultFamily::None: return 0.0;
        case DefaultFamily::Exponential: return rate_;
        case DefaultFamily::Uniform:
            return t >= horizon_ ? std::numeric_limits<double>::infinity() : 1.0 / (horizon_ - t);
        case DefaultFamily::Beta: {
            const double surv = survival(t);
            if (surv <= 0.0) return std::numeric_limits<double>::infinity();
            return pdf(t) / surv;
        }
    }
    return 0.0;
}

double DefaultModel::hazard(double t) const {
    if (family_ == DefaultFamily::None || t < 0.0) return 0.0;
    if (survival(t) <= kSurvivalFloor) return hazard_cap_;
    return std::min(hazard_uncapped(t), hazard_cap_);
}

double DefaultModel::cumulative_hazard(double t) const {
    if (t <= 0.0) return 0.0;
    switch (family_) {
        case DefaultFamily::None: return 0.0;
        case DefaultFamily::Exponential: return rate_ * t;
        case DefaultFamily::Uniform:
            return t >= horizon_ ? std::numeric_limits<double>::infinity()
                                 : -std::log1p(-t / horizon_);
        case DefaultFamily::Beta:
            if (t >= horizon_) return std::numeric_limits<double>::infinity();
            // Integrated in w = -ln(1 - s / T), where the integrand stays bounded up to the horizon.
            return numerics::adaptive_simpson(
                [this](double w) {
                    const double s = -horizon_ * std::expm1(-w);
                    return hazard_uncapped(s) * (horizon_ - s);
                },
                0.0, -std::log1p(-t / horizon_), 1e-12, 60);
    }
    return 0.0;
}

double DefaultModel::mean() const {
    switch (family_) {
        case DefaultFamily::Uniform: return 0.5 * horizon_;
        case DefaultFamily::Beta: return horizon_ * a_ / (a_ + b_);
        case DefaultFamily::Exponential: return 1.0 / rate_;
        case DefaultFamily::None: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

std::string DefaultModel::label() const {
    std::ostringstream os;
    switch (family_) {
        case DefaultFamily::Beta: os << "beta" << a_ << b_; break;
        case DefaultFamily::Uniform: os << "uniform"; break;
        case DefaultFamily::Exponential: os << "exponential" << rate_; break;
        case DefaultFamily::None: os << "none"; break;
    }
    return os.str();
}

}  // namespace palab
