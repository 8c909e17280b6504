#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dini/counterexamples.hpp"
#include "dini/quadrature.hpp"

using namespace dini;
using namespace dini::quadrature;
namespace cx = dini::counterexamples;

namespace {

const double pi = std::numbers::pi;

// Composite Simpson in s = log r, independent of the adaptive code.
template <class F>
double simpson_log(F f, double a, double b, int n = 20000) {
    const double sa = std::log(a), sb = std::log(b), h = (sb - sa) / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * f(std::exp(sa + i * h));
    }
    return s * h / 3.0;
}

// |D^2 u| of the W21 construction, n = 2, from the closed forms.
double w21_hess_norm(const cx::W21Params& p, double r) {
    const double L = cx::log_ratio(p.logR, r), g = p.gamma;
    return std::pow(r, -2) * std::pow(L, -g) * std::sqrt(std::pow(1 - g / L, 2) + 1);
}

double w21_field(const cx::W21Params& p, const Point2& x) {
    const double r = std::hypot(x[0], x[1]);
    return cx::radial_hessian_norm(cx::w21_derivs(p, r, 1e-6), r, 2);
}

double bmo_d12(const cx::BMOParams& p, const Point2& x) { return cx::bmo_solution<2>(p, {x[0], x[1]}).hess[0][1]; }

} // namespace

TEST(AnnulusLp, Area) {
    EXPECT_NEAR(annulus_lp([](const Point2&) { return 1.0; }, 1.0, 0.5, 1.0), 0.75 * pi, 1e-12);
}

TEST(AnnulusLp, InverseRadius) {
    for (double a : {0.5, 1e-3, 1e-9}) {
        auto f = [](const Point2& x) { return 1.0 / std::hypot(x[0], x[1]); };
        EXPECT_NEAR(annulus_lp(f, 1.0, a, 1.0), 2 * pi * (1 - a), 1e-10);
    }
}

TEST(AnnulusLp, W21MatchesRadialOracle) {
    const cx::W21Params p{2.0, 10.0, 2};
    for (double pp : {1.0, 1.5, 2.0}) {
        const double a = 1e-4;
        const double oracle =
            std::pow(2 * pi * simpson_log([&](double r) { return r * r * std::pow(w21_hess_norm(p, r), pp); }, a, 1.0),
                     1 / pp);
        auto f = [&](const Point2& x) { return w21_field(p, x); };
        EXPECT_NEAR(annulus_lp(f, pp, a, 1.0), oracle, 1e-8 * oracle);
    }
}

TEST(AnnulusLp, Additivity) {
    auto f = [](const Point2& x) { return 1.0 + x[0] * x[0] * std::exp(x[1]) + std::log(std::hypot(x[0], x[1])); };
    for (double p : {1.0, 2.5}) {
        const double ac = std::pow(annulus_lp(f, p, 0.01, 0.9), p);
        const double ab = std::pow(annulus_lp(f, p, 0.01, 0.3), p);
        const double bc = std::pow(annulus_lp(f, p, 0.3, 0.9), p);
        EXPECT_NEAR(ac, ab + bc, 1e-10 * ac);
    }
}

TEST(AnnulusLp, Deterministic) {
    const cx::W21Params p{2.0, 10.0, 2};
    auto f = [&](const Point2& x) { return w21_field(p, x) * (1 + x[0]); };
    const double a = annulus_lp(f, 1.3, 1e-3, 0.7), b = annulus_lp(f, 1.3, 1e-3, 0.7);
    EXPECT_EQ(a, b);
}

TEST(AnnulusLp, RejectsBadInput) {
    auto one = [](const Point2&) { return 1.0; };
    EXPECT_THROW(annulus_lp(one, 0.5, 0.1, 1.0), PreconditionError);
    EXPECT_THROW(annulus_lp(one, 1.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(annulus_lp(one, 1.0, 0.5, 0.4), DomainError);
    EXPECT_THROW(annulus_lp(one, 1.0, 0.5, 1.5), DomainError);
}

TEST(AnnulusPartition, DyadicCoversWithoutGaps) {
    const auto part = AnnulusPartition::dyadic(0, 12);
    ASSERT_EQ(part.size(), 13);
    for (int k = 0; k < part.size(); ++k) {
        EXPECT_GT(part.outer(k), part.inner(k));
        if (k + 1 < part.size()) {
            EXPECT_EQ(part.inner(k), part.outer(k + 1));
        }
    }
    EXPECT_EQ(part.outer(0), 1.0);
    EXPECT_EQ(part.inner(12), std::ldexp(1.0, -13));
}

TEST(RadialLp, SphereAreas) {
    EXPECT_NEAR(sphere_area(2), 2 * pi, 1e-14);
    EXPECT_NEAR(sphere_area(3), 4 * pi, 1e-14);
    EXPECT_NEAR(radial_lp_power([](double) { return 1.0; }, 1.0, 0.5, 1.0, 3), 4 * pi / 3 * (1 - 0.125), 1e-12);
}

TEST(LpProbe, ConstantIsConvergent) {
    const auto v = lp_divergence_probe([](const Point2&) { return 1.0; }, 1.0, 12);
    EXPECT_EQ(v.verdict, Verdict::convergent);
    for (std::size_t k = 0; k < v.increments.size(); ++k)
        EXPECT_NEAR(v.increments[k], 0.75 * pi * std::pow(4.0, -double(k)), 1e-12 * v.increments[k]);
}

TEST(LpProbe, BoundedFieldIsConvergent) {
    auto f = [](const Point2& x) { return 3 + std::sin(40 * x[0]) * std::cos(7 * x[1]); };
    EXPECT_EQ(lp_divergence_probe(f, 2.0, 14).verdict, Verdict::convergent);
}

TEST(LpProbe, W21BlowUp) {
    const cx::W21Params p{2.0, 10.0, 2};
    auto f = [&](const Point2& x) { return w21_field(p, x); };
    const auto one = lp_divergence_probe(f, 1.0, 20);
    EXPECT_EQ(one.verdict, Verdict::convergent);
    for (int k = 0; k <= 20; ++k) {
        const double oracle = 2 * pi *
                              simpson_log([&](double r) { return r * r * w21_hess_norm(p, r); }, std::ldexp(1.0, -k - 1),
                                          std::ldexp(1.0, -k), 2000);
        EXPECT_NEAR(one.increments[k], oracle, 1e-6 * oracle);
    }
    for (double pp : {1.1, 2.0}) {
        const auto v = lp_divergence_probe(f, pp, 20);
        EXPECT_EQ(v.verdict, Verdict::divergent) << pp;
        EXPECT_NEAR(v.fitted_ratio, std::pow(2.0, 2 * pp - 2), 0.1 * std::pow(2.0, 2 * pp - 2)) << pp;
    }
}

TEST(MeanOscillation, ConstantIsZero) {
    EXPECT_NEAR(mean_oscillation([](const Point2&) { return 2.5; }, {0.1, 0.2}, 0.3), 0.0, 1e-15);
}

TEST(MeanOscillation, ShiftInvariant) {
    auto f = [](const Point2& x) { return std::sin(3 * x[0]) + x[1] * x[1]; };
    for (double c : {1.0, -40.0, 1e3}) {
        auto g = [&](const Point2& x) { return f(x) + c; };
        const double a = mean_oscillation(f, {0.2, -0.1}, 0.5), b = mean_oscillation(g, {0.2, -0.1}, 0.5);
        EXPECT_NEAR(a, b, 1e-12 * (1 + std::abs(c)));
    }
}

TEST(MeanOscillation, RejectsBallOutsideUnitDisc) {
    EXPECT_THROW(mean_oscillation([](const Point2&) { return 1.0; }, {0.8, 0.0}, 0.5), DomainError);
}

TEST(MeanOscillation, LinearFunctionClosedForm) {
    // |x1| averaged over the unit-radius-r disc: 4r/(3 pi)
    const double r = 0.4;
    EXPECT_NEAR(mean_oscillation([](const Point2& x) { return x[0]; }, {0.0, 0.0}, r), 4 * r / (3 * pi), 1e-7);
}

TEST(BMOProbeTest, LogIsBMO) {
    // log|x| - avg = -(w - 1/2) with w ~ Exp(2), so the oscillation is 1/e
    auto f = [](const Point2& x) { return std::log(std::hypot(x[0], x[1])); };
    const auto pr = bmo_probe(f, {0.0, 0.0}, {2, 4, 6, 8, 10, 12});
    for (double v : pr.values) EXPECT_NEAR(v, std::exp(-1.0), 1e-6);
    EXPECT_NEAR(pr.growth_slope, 0.0, 1e-6);
}

TEST(BMOProbeTest, MixedDerivativeGrows) {
    const cx::BMOParams p{4.25, 2};
    auto f = [&](const Point2& x) { return bmo_d12(p, x); };
    std::vector<int> ks;
    for (int k = 5; k <= 15; ++k) ks.push_back(k);
    const auto pr = bmo_probe(f, {0.0, 0.0}, ks);
    for (std::size_t i = 1; i < pr.values.size(); ++i) EXPECT_GT(pr.values[i], pr.values[i - 1]);

    // leading order: f - avg = L_r (2(w - 1/2) + 4(q - 1/8)), w ~ Exp(2), q = sin^2 cos^2
    const int M = 2000;
    double e = 0.0;
    for (int i = 0; i < M; ++i) {
        const double w = -0.5 * std::log(1 - (i + 0.5) / M);
        for (int j = 0; j < M; ++j) {
            const double phi = 2 * pi * (j + 0.5) / M;
            const double q = std::pow(std::sin(phi) * std::cos(phi), 2);
            e += std::abs(2 * (w - 0.5) + 4 * (q - 0.125));
        }
    }
    e /= double(M) * M;
    const double predicted = std::numbers::ln2 * e;
    EXPECT_GE(pr.slope_per_level, 0.5 * predicted);
    EXPECT_NEAR(pr.slope_per_level, predicted, 0.2 * predicted);
}

TEST(ExpProbe, ZeroFieldGivesBallArea) {
    ProbeOptions opt;
    opt.first_level = 1;
    const int K = 20;
    const auto v = exp_integral_probe([](const Point2&) { return 0.0; }, 3.0, 0.0, K, opt);
    EXPECT_EQ(v.verdict, Verdict::convergent);
    EXPECT_NEAR(v.total(), pi * (0.25 - std::pow(4.0, -K - 1)), 1e-12);
}

TEST(ExpProbe, MixedDerivativeDiverges) {
    const cx::BMOParams p{4.25, 2};
    auto f = [&](const Point2& x) { return bmo_d12(p, x); };
    for (double N : {1.0, 0.25})
        for (double c : {0.0, 10.0, 100.0}) {
            const auto v = exp_integral_probe(f, N, c, 30);
            EXPECT_EQ(v.verdict, Verdict::divergent) << N << " " << c;
            EXPECT_TRUE(std::isfinite(v.log_increments.back()));
        }
}

TEST(DiscreteW2p, QuadraticMatchesClosedForm) {
    const auto grid = fd::make_disc(1.0, 1.0 / 40);
    const auto u = fd::GridFunction::sample(grid, [](double x, double) { return x * x; });
    const Region reg{0.1, -0.05, 0.6, 0.0};
    for (double p : {1.0, 2.0, 3.5}) {
        double s = 0;
        const double h = grid->h();
        for (int k = 0; k < grid->num_unknowns(); ++k) {
            const auto x = grid->unknown_position(k);
            if (std::hypot(x[0] - reg.cx, x[1] - reg.cy) > reg.radius) continue;
            s += h * h * (std::pow(x[0] * x[0], p) + std::pow(std::abs(2 * x[0]), p) + std::pow(2.0, p));
        }
        EXPECT_NEAR(discrete_w2p(u, p, reg), std::pow(s, 1 / p), 1e-12 * std::pow(s, 1 / p));
    }
}

TEST(DiscreteW2p, Homogeneous) {
    const auto grid = fd::make_square(32);
    auto f = [](double x, double y) { return std::sin(2 * x) * std::exp(y); };
    const auto u = fd::GridFunction::sample(grid, f);
    const auto v = fd::GridFunction::sample(grid, [&](double x, double y) { return -3.5 * f(x, y); });
    const Region reg{0.0, 0.0, 0.7, 0.0};
    EXPECT_NEAR(discrete_w2p(v, 1.7, reg), 3.5 * discrete_w2p(u, 1.7, reg), 1e-12 * discrete_w2p(v, 1.7, reg));
}

TEST(DiscreteW2p, RegionTouchingBoundaryRejected) {
    const auto grid = fd::make_disc(1.0, 1.0 / 32);
    const auto u = fd::GridFunction::sample(grid, [](double x, double) { return x; });
    EXPECT_THROW(discrete_w2p(u, 2.0, Region{0.0, 0.0, 0.98, 0.0}), DomainError);
    EXPECT_NO_THROW(discrete_w2p(u, 2.0, Region{0.0, 0.0, 0.9, 0.0}));
}

TEST(DiscreteW2p, W21SolutionTracksContinuumNorms) {
    const cx::W21Params p{2.0, 10.0, 2};
    const double u0 = std::pow(p.logR, 1 - p.gamma) / (p.gamma - 1);
    auto u_exact = [&](double r) { return u0 - std::pow(cx::log_ratio(p.logR, r), 1 - p.gamma) / (p.gamma - 1); };
    auto continuum = [&](double pp, double r_in) {
        auto integrand = [&](double r) {
            const double du = std::pow(r, -1) * std::pow(cx::log_ratio(p.logR, r), -p.gamma);
            return r * r *
                   (std::pow(std::abs(u_exact(r)), pp) + std::pow(du, pp) + std::pow(w21_hess_norm(p, r), pp));
        };
        return std::pow(2 * pi * simpson_log(integrand, r_in, 0.5, 40000), 1 / pp);
    };
    std::vector<double> n2;
    for (int m : {32, 64, 128, 256}) {
        const double h = 1.0 / m;
        const auto grid = fd::make_disc(1.0, h);
        const auto u = fd::GridFunction::sample(grid, [&](double x, double y) {
            const double r = std::hypot(x, y);
            return r == 0.0 ? u0 : u_exact(std::min(r, 1.0));
        });
        const Region reg{0.0, 0.0, 0.5, 1.5 * h};
        const double d1 = discrete_w2p(u, 1.0, reg);
        EXPECT_NEAR(d1, continuum(1.0, 1.5 * h), 0.15 * continuum(1.0, 1.5 * h)) << m;
        EXPECT_LT(d1, continuum(1.0, 1e-100));
        n2.push_back(discrete_w2p(u, 2.0, reg));
        EXPECT_NEAR(n2.back(), continuum(2.0, 1.5 * h), 0.3 * continuum(2.0, 1.5 * h)) << m;
    }
    EXPECT_GT(n2.back() / n2.front(), 2.0);
    for (std::size_t i = 1; i < n2.size(); ++i) EXPECT_GT(n2[i], n2[i - 1]);
}
