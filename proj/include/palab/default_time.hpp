#pragma once

#include <limits>
#include <random>
#include <string>
#include <string_view>

namespace palab {

enum class DefaultFamily { Beta, Uniform, Exponential, None };

std::string_view to_string(DefaultFamily family);
DefaultFamily default_family_from_string(std::string_view name);

/// Law of the exogenous default time tau, independent of the market noise.
///
/// Beta and Uniform laws live on [0, horizon] (bounded default: the cumulative
/// hazard explodes at the horizon). Exponential has unbounded support and None
/// means tau = +infinity. The hazard used by the solvers is capped at
/// `hazard_cap`; the cumulative hazard is always the uncapped integral.
class DefaultModel {
public:
    static constexpr double kSurvivalFloor = 1e-12;
    static constexpr double kDefaultHazardCap = 10000.0;

    static DefaultModel beta(double a, double b, double horizon = 1.0,
                             double hazard_cap = kDefaultHazardCap);
    static DefaultModel uniform(double horizon = 1.0, double hazard_cap = kDefaultHazardCap);
    static DefaultModel exponential(double rate, double horizon = 1.0,
                                    double hazard_cap = kDefaultHazardCap);
    static DefaultModel none(double horizon = 1.0);

    DefaultFamily family() const noexcept { return family_; }
    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    double rate() const noexcept { return rate_; }
    double horizon() const noexcept { return horizon_; }
    double hazard_cap() const noexcept { return hazard_cap_; }

    /// True for laws supported in [0, horizon].
    bool is_bounded() const noexcept {
        return family_ == DefaultFamily::Beta || family_ == DefaultFamily::Uniform;
    }

    double pdf(double t) const;
    double cdf(double t) const;
    double survival(double t) const;  ///< 1 - cdf, computed without cancellation
    double hazard(double t) const;    ///< min(pdf / survival, hazard_cap)
    double hazard_uncapped(double t) const;
    double cumulative_hazard(double t) const;
    double mean() const;

    /// Short label such as "beta24", "uniform", "exponential2", "none".
    std::string label() const;

    /// Draws tau; returns +infinity for the None family.
    template <class Engine>
    double sample(Engine& engine) const {
        switch (family_) {
            case DefaultFamily::Uniform: {
                std::uniform_real_distribution<double> u(0.0, horizon_);
                return u(engine);
            }
            case DefaultFamily::Beta: {
                std::gamma_distribution<double> ga(a_, 1.0);
                std::gamma_distribution<double> gb(b_, 1.0);
                const double x = ga(engine);
                const double y = gb(engine);
                return horizon_ * x / (x + y);
            }
            case DefaultFamily::Exponential: {
                std::exponential_distribution<double> e(rate_);
                return e(engine);
            }
            case DefaultFamily::None:
                break;
        }
        return std::numeric_limits<double>::infinity();
    }

private:
    DefaultModel(DefaultFamily family, double a, double b, double rate, double horizon,
                 double hazard_cap);

    DefaultFamily family_;
    double a_;
    double b_;
    double rate_;
    double horizon_;
    double hazard_cap_;
};

}  // namespace palab
