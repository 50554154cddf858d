#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "palab/default_time.hpp"
#include "palab/errors.hpp"
#include "palab/numerics.hpp"

using namespace palab;

namespace {

std::vector<DefaultModel> families() {
    return {DefaultModel::beta(2, 4), DefaultModel::uniform(), DefaultModel::beta(4, 2), DefaultModel::exponential(2)};
}

}  // namespace

TEST(Pdf, Examples) {
    EXPECT_DOUBLE_EQ(DefaultModel::uniform().pdf(0.5), 1.0);
    // 0.5 (1 - 0.5)^3 / B(2, 4) with B(2, 4) = 1 / 20
    EXPECT_NEAR(DefaultModel::beta(2, 4).pdf(0.5), 1.25, 1e-13);
    EXPECT_DOUBLE_EQ(DefaultModel::exponential(2).pdf(0.0), 2.0);
    EXPECT_DOUBLE_EQ(DefaultModel::none().pdf(0.3), 0.0);
    EXPECT_DOUBLE_EQ(DefaultModel::uniform().pdf(1.5), 0.0);
}

TEST(Pdf, IntegratesToOne) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    for (const auto& m : families()) {
        const double upper = m.is_bounded() ? m.horizon() : 40.0;
        const double mass = GK::integrate([&](double t) { return m.pdf(t); }, 0.0, upper, 15, 1e-12);
        EXPECT_NEAR(mass, 1.0, 1e-6) << m.label();
    }
}

TEST(Cdf, Examples) {
    const auto b11 = DefaultModel::beta(1, 1);
    for (double t : {0.0, 0.1, 0.37, 0.9, 1.0}) EXPECT_NEAR(b11.cdf(t), t, 1e-14);
    EXPECT_NEAR(DefaultModel::exponential(2).cdf(1.0), 1.0 - std::exp(-2.0), 1e-15);
    EXPECT_NEAR(DefaultModel::exponential(2).cdf(1.0), 0.864664, 1e-6);
    for (double t : {0.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(DefaultModel::none().cdf(t), 0.0);
}

TEST(Cdf, MonotoneAndMatchesQuadratureOfPdf) {
    for (const auto& m : families()) {
        double prev = 0.0;
        for (int k = 0; k <= 100; ++k) {
            const double t = 0.01 * k;
            const double c = m.cdf(t);
            EXPECT_GE(c, prev);
            prev = c;
            const double q = numerics::adaptive_simpson([&](double s) { return m.pdf(s); }, 0.0, t, 1e-13);
            EXPECT_NEAR(c, q, 1e-9) << m.label() << " t=" << t;
        }
    }
}

TEST(Hazard, Examples) {
    EXPECT_NEAR(DefaultModel::uniform().hazard(0.5), 2.0, 1e-14);
    EXPECT_DOUBLE_EQ(DefaultModel::exponential(2).hazard(0.0), 2.0);
    EXPECT_DOUBLE_EQ(DefaultModel::exponential(2).hazard(0.77), 2.0);
    EXPECT_DOUBLE_EQ(DefaultModel::uniform().hazard(0.99999), 10000.0);
    EXPECT_DOUBLE_EQ(DefaultModel::uniform().hazard(1.0), 10000.0);
    EXPECT_DOUBLE_EQ(DefaultModel::none().hazard(0.5), 0.0);
}

TEST(Hazard, RatioOfPdfAndSurvivalThenCapped) {
    for (const auto& m : families())
        for (int k = 0; k <= 1000; ++k) {
            const double t = 0.001 * k;
            const double h = m.hazard(t);
            EXPECT_GE(h, 0.0);
            EXPECT_LE(h, m.hazard_cap());
            if (m.survival(t) > 1e-6 && m.pdf(t) / m.survival(t) < m.hazard_cap())
                EXPECT_NEAR(h, m.pdf(t) / (1.0 - m.cdf(t)), 1e-9 * (1.0 + h)) << m.label() << " t=" << t;
        }
}

TEST(CumulativeHazard, Examples) {
    EXPECT_NEAR(DefaultModel::uniform().cumulative_hazard(0.5), std::log(2.0), 1e-15);
    EXPECT_NEAR(DefaultModel::exponential(2).cumulative_hazard(1.0), 2.0, 1e-15);
    for (const auto& m : families()) EXPECT_DOUBLE_EQ(m.cumulative_hazard(0.0), 0.0);
    EXPECT_DOUBLE_EQ(DefaultModel::none().cumulative_hazard(0.0), 0.0);
}

TEST(CumulativeHazard, SurvivalIdentity) {
    for (const auto& m : families()) {
        double worst = 0.0;
        for (int k = 0; k <= 999; ++k) {
            const double t = 0.001 * k;
            worst = std::max(worst, std::abs(std::exp(-m.cumulative_hazard(t)) - (1.0 - m.cdf(t))));
        }
        EXPECT_LT(worst, 1e-8) << m.label();
    }
}

TEST(CumulativeHazard, BoundedLawsExplodeAtTheHorizon) {
    EXPECT_GT(DefaultModel::uniform().cumulative_hazard(1.0 - 1e-6), 10.0);
    EXPECT_GT(DefaultModel::beta(2, 4).cumulative_hazard(1.0 - 1e-6), 10.0);
    EXPECT_GT(DefaultModel::beta(4, 2).cumulative_hazard(1.0 - 1e-6), 10.0);
    EXPECT_TRUE(std::isfinite(DefaultModel::exponential(2).cumulative_hazard(1.0)));
}

TEST(Classification, BoundedFamilies) {
    EXPECT_TRUE(DefaultModel::beta(2, 4).is_bounded());
    EXPECT_TRUE(DefaultModel::uniform().is_bounded());
    EXPECT_FALSE(DefaultModel::exponential(2).is_bounded());
    EXPECT_FALSE(DefaultModel::none().is_bounded());
}

TEST(Sample, UniformMean) {
    std::mt19937_64 rng(11);
    const auto m = DefaultModel::uniform();
    const int n = 100000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) sum += m.sample(rng);
    EXPECT_NEAR(sum / n, 0.5, 3.0 * 0.2887 / std::sqrt(n));
}

TEST(Sample, ExponentialMean) {
    std::mt19937_64 rng(12);
    const auto m = DefaultModel::exponential(2);
    const int n = 100000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) sum += m.sample(rng);
    EXPECT_NEAR(sum / n, 0.5, 3.0 * 0.5 / std::sqrt(n));
}

TEST(Sample, BetaMeanAndSupport) {
    std::mt19937_64 rng(13);
    const auto m = DefaultModel::beta(2, 4);
    const int n = 100000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double t = m.sample(rng);
        ASSERT_GE(t, 0.0);
        ASSERT_LE(t, 1.0);
        sum += t;
    }
    const double sd = std::sqrt(2.0 * 4.0 / (36.0 * 7.0));
    EXPECT_NEAR(sum / n, 1.0 / 3.0, 3.0 * sd / std::sqrt(n));
}

TEST(Sample, NoneNeverDefaults) {
    std::mt19937_64 rng(14);
    for (int k = 0; k < 100; ++k) EXPECT_TRUE(std::isinf(DefaultModel::none().sample(rng)));
}

TEST(DefaultModel, ConstructionErrors) {
    EXPECT_THROW(DefaultModel::beta(0.0, 1.0), DomainError);
    EXPECT_THROW(DefaultModel::exponential(-1.0), DomainError);
    EXPECT_THROW(DefaultModel::uniform(0.0), DomainError);
    EXPECT_THROW(default_family_from_string("gamma"), ConfigError);
}

TEST(DefaultModel, Labels) {
    EXPECT_EQ(DefaultModel::beta(2, 4).label(), "beta24");
    EXPECT_EQ(DefaultModel::exponential(2).label(), "exponential2");
    EXPECT_EQ(DefaultModel::none().label(), "none");
}
