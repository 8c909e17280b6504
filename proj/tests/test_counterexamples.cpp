#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dini/counterexamples.hpp"
#include "dini/moduli.hpp"

using namespace dini;
using namespace dini::counterexamples;

namespace {

std::vector<double> log_radii(int n, double lo, double hi) {
    std::vector<double> r;
    for (int i = 0; i < n; ++i) r.push_back(lo * std::pow(hi / lo, i / (n - 1.0)));
    return r;
}

// n = 2 closed form of the defining integral: (logR^{1-g} - L(r)^{1-g})/(g-1)
double w21_u_closed_2d(const W21Params& p, double r) {
    const double g = p.gamma;
    return (std::pow(p.logR, 1 - g) - std::pow(log_ratio(p.logR, r), 1 - g)) / (g - 1);
}

template <int N>
Point<N> random_point(std::mt19937_64& rng, double rmin, double rmax) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(std::log(rmin), std::log(rmax));
    Point<N> x{};
    double s = 0;
    for (auto& v : x) {
        v = g(rng);
        s += v * v;
    }
    const double r = std::exp(u(rng)) / std::sqrt(s);
    for (auto& v : x) v *= r;
    return x;
}

template <int N>
double frob(const Matrix<N>& h) {
    double s = 0;
    for (const auto& row : h)
        for (double v : row) s += v * v;
    return std::sqrt(s);
}

} // namespace

TEST(W21, ParameterValidation) {
    EXPECT_THROW((W21Params{1.0, 10.0, 2}.validate()), PreconditionError);
    EXPECT_THROW((W21Params{2.0, 1.5, 2}.validate()), EllipticityError);
    EXPECT_NO_THROW((W21Params{2.0, 10.0, 2}.validate()));
    EXPECT_THROW(w21_derivs(W21Params{}, 0.0), DomainError);
    EXPECT_THROW(w21_derivs(W21Params{}, -1.0), DomainError);
}

TEST(W21, BoundaryValues) {
    const W21Params p{2.0, 10.0, 2};
    const auto d = w21_derivs(p, 1.0);
    EXPECT_EQ(d.u, 0.0);
    EXPECT_NEAR(d.du, -0.01, 1e-16);
    EXPECT_NEAR(w21_alpha(p, 1.0), 0.25, 1e-16);
}

TEST(W21, QuadratureMatchesClosedFormInTwoDimensions) {
    for (double g : {1.01, 2.0, 3.5}) {
        const W21Params p{g, 10.0, 2};
        for (double r : log_radii(50, 1e-12, 1.0)) {
            const double exact = w21_u_closed_2d(p, r);
            EXPECT_NEAR(w21_derivs(p, r).u, exact, 1e-12 * std::abs(exact) + 1e-300);
        }
    }
}

TEST(W21, DerivativesAgreeWithFiniteDifferences) {
    for (int n : {2, 3}) {
        const W21Params p{2.0, 10.0, n};
        for (double r : {0.01, 0.1, 0.5, 0.9}) {
            const double h = 1e-5 * r;
            const double du_fd = (w21_derivs(p, r + h).u - w21_derivs(p, r - h).u) / (2 * h);
            const double d2u_fd = (w21_derivs(p, r + h).du - w21_derivs(p, r - h).du) / (2 * h);
            const auto d = w21_derivs(p, r);
            EXPECT_NEAR(du_fd, d.du, 1e-7 * std::abs(d.du));
            EXPECT_NEAR(d2u_fd, d.d2u, 1e-7 * std::abs(d.d2u));
        }
    }
}

TEST(W21, SecondDerivativeDisplay) {
    const W21Params p{2.0, 10.0, 2};
    for (double r : log_radii(1000, 1e-12, 1.0)) {
        const auto d = w21_derivs(p, r, 1e-8);
        const double L = log_ratio(p.logR, r);
        const double display = std::pow(r, -2) * std::pow(L, -2) * (1 - 2 / L);
        EXPECT_NEAR(d.d2u - display, 0.0, 1e-13 * std::abs(display));
    }
}

TEST(W21, OdeResidualVanishes) {
    for (int n : {2, 3, 4}) {
        const W21Params p{2.0, 10.0, n};
        for (double r : log_radii(1000, 1e-6, 1.0)) {
            const auto d = w21_derivs(p, r, 1e-6);
            const double res = (w21_alpha(p, r) + 1) * d.d2u + (n - 1) * d.du / r;
            EXPECT_LE(std::abs(res), 1e-10 * std::abs(d.d2u));
        }
    }
}

TEST(W21, TraceFormReducesToRadialOde) {
    const W21Params p{2.0, 10.0, 2};
    const auto field = coefficient_field([&](double r) { return w21_alpha(p, r); }, 2);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto x = random_point<2>(rng, 1e-6, 1.0);
        const double r = norm<2>(x);
        const auto d = w21_derivs(p, r, 1e-6);
        const auto H = radial_hessian<2>(d, x);
        const double radial = (1 + field.alpha(r)) * d.d2u + d.du / r;
        EXPECT_NEAR(apply_operator<2>(field, H, x), radial, 1e-12 * frob<2>(H));
        EXPECT_LE(std::abs(apply_operator<2>(field, H, x)), 1e-9 * frob<2>(H));
    }
}

TEST(W21, HessianHasHomogeneousSingularity) {
    const W21Params p{2.0, 10.0, 2};
    // |D^2u| r^n L^gamma = sqrt((n-1-g/L)^2 + n-1) lies in [c, C]
    const double c = std::sqrt(std::pow(1 - 2.0 / 10.0, 2) + 1), C = std::sqrt(2.0);
    std::vector<double> xs, ys;
    for (double r : log_radii(200, 1e-12, 1.0)) {
        const double L = log_ratio(p.logR, r);
        const double m = radial_hessian_norm(w21_derivs(p, r, 1e-6), r, 2);
        const double scaled = m * r * r * std::pow(L, 2);
        EXPECT_GE(scaled, c * (1 - 1e-12));
        EXPECT_LE(scaled, C * (1 + 1e-12));
        xs.push_back(std::log(r));
        ys.push_back(std::log(m) + 2 * std::log(L));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    EXPECT_NEAR(sxy / sxx, -2.0, 0.02);
}

TEST(Counterexamples, AlphaProfilesAreNotDini) {
    const W21Params w{2.0, 10.0, 2};
    const BMOParams b{4.25, 2};
    const auto mw = moduli::empirical_modulus([&](double r) { return w21_alpha(w, r); });
    const auto mb = moduli::empirical_modulus([&](double r) { return bmo_alpha(b, r); });
    EXPECT_EQ(moduli::dini_integral(mw, std::ldexp(1.0, -40)).verdict, Verdict::divergent);
    EXPECT_EQ(moduli::dini_integral(mb, std::ldexp(1.0, -40)).verdict, Verdict::divergent);
}

TEST(Counterexamples, EllipticityBounds) {
    const W21Params w{2.0, 10.0, 2};
    const BMOParams b{4.25, 2};
    const auto fw = coefficient_field([&](double r) { return w21_alpha(w, r); }, 2);
    const auto fb = coefficient_field([&](double r) { return bmo_alpha(b, r); }, 2);
    for (double r : log_radii(1000, 1e-12, 1.0)) {
        EXPECT_GE(1 + w21_alpha(w, r), 1.0);
        EXPECT_LE(1 + w21_alpha(w, r), fw.lambda_max() * (1 + 1e-12));
        EXPECT_GE(1 + bmo_alpha(b, r), 1.0);
        EXPECT_LE(1 + bmo_alpha(b, r), fb.lambda_max() * (1 + 1e-12));
    }
    EXPECT_EQ(fw.lambda_min(), 1.0);
    EXPECT_THROW(coefficient_field([](double) { return -1.5; }, 2), EllipticityError);
}

TEST(CoefficientField, IdentityAndEigenvalues) {
    const auto id = coefficient_field([](double) { return 0.0; }, 2);
    const Matrix<2> H{{{2.0, 0.7}, {0.7, -5.0}}};
    EXPECT_DOUBLE_EQ(apply_operator<2>(id, H, {0.3, 0.1}), -3.0);

    const W21Params w{2.0, 10.0, 2};
    const auto f = coefficient_field([&](double r) { return w21_alpha(w, r); }, 2);
    const auto A = f.matrix<2>({0.5, 0.0});
    // 2x2 symmetric eigenvalues in closed form
    const double tr = A[0][0] + A[1][1], det = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    const double disc = std::sqrt(tr * tr / 4 - det);
    EXPECT_NEAR(tr / 2 + disc, 1 + w21_alpha(w, 0.5), 1e-15);
    EXPECT_NEAR(tr / 2 - disc, 1.0, 1e-15);
}

TEST(BMO, ParameterValidationAndSingularPoint) {
    EXPECT_THROW((BMOParams{2.5, 2}.validate()), EllipticityError);
    EXPECT_THROW(bmo_solution<2>(BMOParams{4.25, 2}, {0.0, 0.0}), DomainError);
    EXPECT_THROW(bmo_solution<2>(BMOParams{4.25, 3}, {0.1, 0.0}), PreconditionError);
}

TEST(BMO, AxisValues) {
    const BMOParams p{5.0, 2};
    for (double x1 : {-0.9, -0.01, 1e-5, 0.4}) {
        const auto e = bmo_solution<2>(p, {x1, 0.0});
        EXPECT_EQ(e.u, 0.0);
        EXPECT_EQ(e.hess[0][0], 0.0);
    }
}

TEST(BMO, HessianMatchesFiniteDifferences) {
    const BMOParams p{5.0, 2};
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const auto x = random_point<2>(rng, 0.05, 0.95);
        const auto e = bmo_solution<2>(p, x);
        const double h = 1e-5;
        for (int j = 0; j < 2; ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const auto ep = bmo_solution<2>(p, xp), em = bmo_solution<2>(p, xm);
            EXPECT_NEAR((ep.u - em.u) / (2 * h), e.grad[j], 1e-6 * std::max(1.0, std::abs(e.grad[j])));
            for (int k = 0; k < 2; ++k) {
                const double fd = (ep.grad[k] - em.grad[k]) / (2 * h);
                EXPECT_NEAR(fd, e.hess[k][j], 1e-6 * frob<2>(e.hess));
            }
        }
    }
}

TEST(BMO, HessianMatchesFiniteDifferencesIn3D) {
    const BMOParams p{5.0, 3};
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
        const auto x = random_point<3>(rng, 0.05, 0.95);
        const auto e = bmo_solution<3>(p, x);
        const double h = 1e-5;
        for (int j = 0; j < 3; ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const auto ep = bmo_solution<3>(p, xp), em = bmo_solution<3>(p, xm);
            for (int k = 0; k < 3; ++k)
                EXPECT_NEAR((ep.grad[k] - em.grad[k]) / (2 * h), e.hess[k][j], 1e-6 * frob<3>(e.hess));
        }
    }
}

TEST(BMO, OperatorAnnihilatesSolution) {
    std::mt19937_64 rng(5);
    auto run = [&](auto dim_tag) {
        constexpr int N = decltype(dim_tag)::value;
        const BMOParams p{4.25, N};
        const auto field = coefficient_field([&](double r) { return bmo_alpha(p, r); }, N);
        for (int i = 0; i < 1000; ++i) {
            const auto x = random_point<N>(rng, 1e-6, 1.0);
            const auto e = bmo_solution<N>(p, x);
            EXPECT_LE(std::abs(apply_operator<N>(field, e.hess, x)), 1e-9 * frob<N>(e.hess));
        }
    };
    run(std::integral_constant<int, 2>{});
    run(std::integral_constant<int, 3>{});
}

TEST(BMO, LogRSearchGivesHalfLogSquaredBound) {
    const auto s = find_bmo_logR<2>();
    // in 2D d12 u - L^2/2 = L^2/2 - 2L + (2+4L) sin^2 cos^2, so L >= 4 suffices
    EXPECT_GE(s.logR, 4.0);
    EXPECT_LE(s.logR, 4.25);
    const BMOParams p{s.logR, 2};
    std::mt19937_64 rng(9);
    for (int i = 0; i < 2000; ++i) {
        const auto x = random_point<2>(rng, 1e-9, 1.0);
        const double L = log_ratio(p.logR, norm<2>(x));
        EXPECT_GE(bmo_solution<2>(p, x).hess[0][1], 0.5 * L * L);
    }
}

TEST(BMO, AlphaSatisfiesLogModulusCondition) {
    const BMOParams p{4.25, 2};
    const double c = log_modulus_constant([&](double r) { return bmo_alpha(p, r); });
    EXPECT_TRUE(std::isfinite(c));
    EXPECT_LT(c, 20.0);
}

TEST(BMO, AlphaDecaysLikeInverseLogR) {
    for (double logR : {1e3, 1e5, 1e7}) {
        const BMOParams p{logR, 2};
        EXPECT_NEAR(bmo_alpha(p, 1.0), 4.0 / logR, 4.0 * 4.0 / (logR * logR));
    }
}
