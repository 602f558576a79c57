#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "difflab/errors.hpp"
#include "difflab/quad.hpp"
#include "difflab/scale_speed.hpp"

using namespace difflab;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double erfi_integral_0_1() {
    // integral of exp(t^2) over [0,1] = sum 1/(n! (2n+1))
    double sum = 0.0, fact = 1.0;
    for (int n = 0; n < 30; ++n) {
        if (n > 0) fact *= n;
        sum += 1.0 / (fact * (2 * n + 1));
    }
    return sum;
}

double dawson_asymptotic(double x) {
    // exp(-x^2) * integral of exp(t^2) over [0,x] for large x
    double term = 1.0 / (2 * x), sum = 0.0;
    for (int k = 0; k < 8; ++k) {
        sum += term;
        term *= (2 * k + 1) / (2 * x * x);
    }
    return sum;
}

}  // namespace

TEST(BuildScale, BrownianMotionIsIdentity) {
    const auto bm = catalog_lookup("bm").ito().coefficients;
    const auto s = build_scale(bm, 0.0);
    for (double x : {-1e6, -3.0, 0.0, 0.5, 1e9}) {
        EXPECT_EQ(s(x), x);
        EXPECT_EQ(s.derivative(x), 1.0);
    }
    const auto m = build_speed(bm, s);
    EXPECT_EQ(m.density(7.0), 1.0);
    EXPECT_NEAR(m.measure_of(-2.0, 3.0), 5.0, 1e-12);
    EXPECT_NEAR(m.measure_of(1e10, 1e10 + 1.0), 1.0, 1e-6);
}

TEST(BuildScale, BesselCloseForm) {
    const auto b3 = catalog_lookup("bes3").ito().coefficients;
    const auto s = build_scale(b3, 1.0);
    EXPECT_EQ(s(1.0), 0.0);
    for (double x : {1e-12, 1e-6, 0.01, 0.3, 0.9, 1.7, 2.0, 10.0, 1e3, 1e8}) {
        const double want = 1.0 - 1.0 / x;
        EXPECT_NEAR(s(x), want, 1e-10 * std::max(1.0, std::fabs(want))) << x;
        EXPECT_NEAR(s.derivative(x), 1.0 / (x * x), 1e-10 / (x * x)) << x;
    }
    const auto m = build_speed(b3, s);
    for (double x : {1e-6, 0.5, 3.0, 1e4}) EXPECT_NEAR(m.density(x), x * x, 1e-10 * x * x) << x;
    EXPECT_NEAR(m.measure_of(1.0, 2.0), 7.0 / 3.0, 1e-11);
    for (double z : {1e-9, 0.01, 0.5})
        EXPECT_NEAR(m.measure_of(z, 1.0), (1.0 - z * z * z) / 3.0, 1e-11) << z;
    EXPECT_TRUE(s.limit(Side::Right).finite());
    EXPECT_NEAR(s.end_value(Side::Right), 1.0, 1e-8);
    EXPECT_TRUE(s.limit(Side::Left).diverges());
    EXPECT_EQ(s.end_value(Side::Left), -inf);
}

TEST(BuildScale, OrnsteinUhlenbeck) {
    const auto ou = catalog_lookup("ou").ito().coefficients;
    const auto s = build_scale(ou, 0.0);
    const double oracle = erfi_integral_0_1();
    EXPECT_NEAR(s(1.0), oracle, 1e-11);
    EXPECT_NEAR(s(1.0), 1.46265, 1e-5);
    EXPECT_NEAR(s(-1.0), -oracle, 1e-11);
    EXPECT_NEAR(s.log_derivative(3.0), 9.0, 1e-10);
    for (double x : {10.0, 30.0, 60.0, 200.0, 1e4})
        EXPECT_NEAR(s.gap_ratio(x), dawson_asymptotic(x), 1e-8 * dawson_asymptotic(x)) << x;
    EXPECT_NEAR(s.gap_ratio(-30.0), -dawson_asymptotic(30.0), 1e-8 * dawson_asymptotic(30.0));
    const auto m = build_speed(ou, s);
    EXPECT_NEAR(m.measure_of(0.0, 3.0), 0.5 * std::sqrt(std::numbers::pi) * std::erf(3.0), 1e-11);
    EXPECT_TRUE(s.limit(Side::Right).diverges());
    EXPECT_TRUE(s.limit(Side::Left).diverges());
}

TEST(BuildSpeed, GeometricBrownianMotionDensity) {
    const auto gbm = catalog_lookup("gbm").ito().coefficients;
    const auto s = build_scale(gbm, 1.0);
    const auto m = build_speed(gbm, s);
    for (double x : {1e-8, 0.2, 1.0, 5.0, 1e7}) EXPECT_NEAR(m.density(x), 1.0 / (x * x), 1e-12 / (x * x));
    EXPECT_NEAR(m.measure_of(1.0, 2.0), 0.5, 1e-12);
    EXPECT_NEAR(m.measure_of(1e-6, 1.0), 1e6 - 1.0, 1e-3);
}

TEST(BuildSpeed, AtomIncludedAtClosedRightEnd) {
    const auto spec = make_ito("x", "0", "1", Interval(0.0, 1.0, false, true), {{Side::Right, AtomMass::finite(2.0)}});
    const auto ss = build_scale_speed(spec, 0.5);
    EXPECT_NEAR(ss.speed.measure_of(0.5, 1.0), 2.5, 1e-12);
    EXPECT_NEAR(ss.speed.measure_of(0.5, 0.75), 0.25, 1e-12);
    EXPECT_THROW(ss.speed.measure_of(0.5, 1.5), DomainError);
}

TEST(ScaleProperty, ReferencePointGauge) {
    for (const char* name : {"bes3", "ou", "gbm"}) {
        const auto spec = catalog_lookup(name);
        const auto& coeff = spec.ito().coefficients;
        const double c = std::isinf(spec.domain().left()) ? 0.0 : 1.0;
        const double c2 = c + 0.7;
        const auto s1 = build_scale(coeff, c);
        const auto s2 = build_scale(coeff, c2);
        for (double x : {c + 0.1, c + 0.5, c + 2.0, c + 4.0}) {
            const double want = (s1(x) - s1(c2)) / s1.derivative(c2);
            EXPECT_NEAR(s2(x), want, 1e-10 * std::max(1.0, std::fabs(want))) << name << " " << x;
        }
    }
}

TEST(ScaleProperty, InverseRoundTrip) {
    for (const char* name : {"bes3", "ou", "gbm", "bm"}) {
        const auto spec = catalog_lookup(name);
        const auto ss = build_scale_speed(spec);
        for (double x : sample_grid(spec.domain(), 41)) {
            const double y = ss.scale(x);
            if (!std::isfinite(y)) continue;
            const double back = ss.scale.inverse(y);
            const double conditioning = 8 * std::numeric_limits<double>::epsilon() * std::fabs(y) / ss.scale.derivative(x);
            EXPECT_NEAR(back, x, 1e-9 * std::max(1.0, std::fabs(x)) + conditioning) << name << " " << x;
        }
    }
}

TEST(ScaleProperty, MeasureAdditivity) {
    const auto spec = catalog_lookup("bes3");
    const auto ss = build_scale_speed(spec);
    for (double a : {0.001, 0.1, 0.9}) {
        for (double b : {1.1, 3.0, 50.0}) {
            const double c = 0.5 * (a + b);
            const double whole = ss.speed.measure_of(a, b);
            const double split = ss.speed.measure_of(a, c) + ss.speed.measure_of(c, b);
            EXPECT_NEAR(whole, split, 1e-11 * whole);
        }
    }
}

TEST(Natural, BesselPushForward) {
    const auto spec = catalog_lookup("bes3");
    const auto nat = to_natural_scale(spec, 1.0);
    EXPECT_TRUE(nat.natural);
    EXPECT_EQ(nat.domain.left(), -inf);
    EXPECT_NEAR(nat.domain.right(), 1.0, 1e-8);
    for (double y : {-100.0, -1.0, 0.0, 0.5, 0.99}) {
        const double want = std::pow(1.0 - y, -4.0);
        EXPECT_NEAR(nat.speed_density(y), want, 1e-8 * want) << y;
    }
}

TEST(Natural, MassConservation) {
    const auto spec = catalog_lookup("bes3");
    const auto ss = build_scale_speed(spec);
    const auto nat = to_natural_scale(spec);
    for (auto [a, b] : {std::pair{0.5, 2.0}, std::pair{1.2, 1.3}, std::pair{0.01, 0.02}}) {
        const double orig = ss.speed.measure_of(a, b);
        const auto pushed = quad::integrate_compact(nat.speed_density, ss.scale(a), ss.scale(b), {1e-10, 1e-300});
        EXPECT_NEAR(pushed.value, orig, 2 * (pushed.error + 1e-10 * orig)) << a << " " << b;
    }
}

TEST(Natural, AlreadyNaturalIsIdentity) {
    const auto spec = catalog_lookup("cev");
    const auto nat = to_natural_scale(spec);
    EXPECT_EQ(nat.domain, spec.domain());
    for (double y : {0.01, 1.0, 2.0, 100.0}) {
        EXPECT_EQ(nat.scale(y), y);
        EXPECT_NEAR(nat.speed_density(y), std::pow(y, -4.0), 1e-14 * std::pow(y, -4.0));
    }
    DiffusionSpec direct{nat, std::string("cev-natural")};
    const auto again = to_natural_scale(direct);
    for (double y : {0.01, 1.0, 2.0}) {
        EXPECT_EQ(again.scale(y), y);
        EXPECT_EQ(again.speed_density(y), nat.speed_density(y));
    }
}

TEST(DefaultReference, MidpointOfWindowImage) {
    const auto spec = catalog_lookup("bes3");
    const double c = default_reference_point(spec);
    // window [1,2], s = -1/x: midpoint of (-1, -1/2) is -3/4
    EXPECT_NEAR(c, 4.0 / 3.0, 1e-9);
    EXPECT_NEAR(default_reference_point(catalog_lookup("bm")), 0.0, 1e-15);
}

TEST(BuildScale, ConstructionIsFast) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const char* name : {"bes3", "ou"}) (void)build_scale_speed(catalog_lookup(name));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 5.0);
}
