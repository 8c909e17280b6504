#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dini/fdsolver.hpp"

using namespace dini;
using namespace dini::fd;

namespace {

const double pi = std::numbers::pi;

struct Quadratic {
    double c0, cx, cy, cxx, cxy, cyy;
    double operator()(double x, double y) const { return c0 + cx * x + cy * y + cxx * x * x + cxy * x * y + cyy * y * y; }
    // tr(A D^2 q)
    double trace(const Mat2& a) const { return 2 * cxx * a.a11 + cxy * (a.a12 + a.a21) + 2 * cyy * a.a22; }
};

Quadratic random_quadratic(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    return {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

} // namespace

TEST(Grid, SquareBoundaryGeometry) {
    const auto g = make_square(16);
    double total = 0;
    for (const auto& b : g->boundary_points()) {
        EXPECT_NEAR(std::hypot(b.nx, b.ny), 1.0, 1e-15);
        total += b.dsigma;
    }
    EXPECT_NEAR(total, 8.0, 1e-12);
    EXPECT_EQ(g->num_unknowns(), 15 * 15);
}

TEST(Grid, DiscBoundaryGeometry) {
    for (double h : {1.0 / 16, 1.0 / 37, 1.0 / 64}) {
        const auto g = make_disc(1.0, h);
        double total = 0;
        for (const auto& b : g->boundary_points()) {
            EXPECT_NEAR(std::hypot(b.x, b.y), 1.0, 1e-12);
            EXPECT_NEAR(std::hypot(b.nx, b.ny), 1.0, 1e-15);
            total += b.dsigma;
        }
        EXPECT_NEAR(total, 2 * pi, 1e-12);
        for (int u = 0; u < g->num_unknowns(); ++u)
            for (const auto& a : g->arms(u)) {
                EXPECT_GT(a.len, 0.0);
                EXPECT_LE(a.len, h);
                EXPECT_TRUE(bool(a.ref));
            }
    }
}

TEST(Assemble, IdentityIsFivePointLaplacian) {
    const auto g = make_square(8);
    const auto op = assemble(CoefficientField::identity(), g);
    const double h2 = g->h() * g->h();
    for (int u = 0; u < g->num_unknowns(); ++u) {
        EXPECT_NEAR(op.interior.at(u, u), -4.0 / h2, 1e-12);
        const auto& ptr = op.interior.row_ptr();
        for (int k = ptr[u]; k < ptr[u + 1]; ++k) {
            const int c = op.interior.col_idx()[k];
            const double v = op.interior.values()[k];
            if (c == u) continue;
            const auto a = g->unknown_position(u), b = g->unknown_position(c);
            const double d = std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]);
            if (d < 1.5 * g->h()) EXPECT_NEAR(v, 1.0 / h2, 1e-12);
            else EXPECT_NEAR(v, 0.0, 1e-12);
        }
    }
}

TEST(Assemble, MixedStencilExactOnBilinear) {
    const auto g = make_square(10);
    const auto op = assemble(CoefficientField::constant({1.0, 0.5, 0.5, 1.0}), g);
    const auto u = GridFunction::sample(g, [](double x, double y) { return x * y; });
    for (double v : op.apply(u)) EXPECT_NEAR(v, 1.0, 1e-11);
}

TEST(Assemble, QuadraticExactnessEverywhere) {
    std::mt19937_64 rng(1);
    const std::vector<CoefficientField> fields{CoefficientField::identity(), CoefficientField::holder(0.5),
                                               CoefficientField::smooth_radial(),
                                               CoefficientField::w21({2.0, 10.0, 2})};
    for (const auto& grid : {make_square(32), make_disc(1.0, 1.0 / 32), make_disc(0.83, 1.0 / 29)})
        for (const auto& field : fields) {
            const auto q = random_quadratic(rng);
            const auto op = assemble(field, grid);
            const auto qs = GridFunction::sample(grid, q);
            const auto lu = op.apply(qs);
            // rounding scale of each row: sum |w_k q_k|
            auto absop = op;
            for (double& v : absop.interior.values()) v = std::abs(v);
            for (double& v : absop.boundary.values()) v = std::abs(v);
            auto qa = qs;
            for (double& v : qa.interior) v = std::abs(v);
            for (double& v : qa.boundary) v = std::abs(v);
            const auto mag = absop.apply(qa);
            double worst = 0;
            for (int u = 0; u < grid->num_unknowns(); ++u) {
                const auto p = grid->unknown_position(u);
                const double exact = q.trace(field(p[0], p[1]));
                worst = std::max(worst, std::abs(lu[u] - exact) / mag[u]);
            }
            EXPECT_LE(worst, 1e-12) << field.name();
        }
}

TEST(Assemble, RejectsNonEllipticAndNonSymmetric) {
    const auto g = make_square(4);
    EXPECT_THROW(assemble(CoefficientField::constant({1.0, 2.0, 2.0, 1.0}), g), EllipticityError);
    EXPECT_THROW(assemble(CoefficientField::constant({1.0, 0.1, 0.0, 1.0}), g), EllipticityError);
    EXPECT_THROW(assemble(CoefficientField::constant({-1.0, 0.0, 0.0, -1.0}), g), EllipticityError);
}

TEST(Dirichlet, HarmonicPolynomialReproduced) {
    SolverConfig cfg;
    cfg.rel_tol = 1e-12;
    for (const auto& grid : {make_square(32), make_disc(1.0, 1.0 / 32)}) {
        const auto op = assemble(CoefficientField::identity(), grid);
        const auto g = GridFunction::sample(grid, [](double x, double y) { return x * x - y * y; });
        const auto sol = solve_dirichlet(op, std::vector<double>(grid->num_unknowns(), 0.0), g.boundary, cfg);
        for (int u = 0; u < grid->num_unknowns(); ++u) EXPECT_NEAR(sol.u.interior[u], g.interior[u], 1e-9);
        EXPECT_TRUE(sol.u.finite());
    }
}

TEST(Dirichlet, QuadraticWithSource) {
    const auto grid = make_square(24);
    const auto op = assemble(CoefficientField::identity(), grid);
    const auto g = GridFunction::sample(grid, [](double x, double) { return x * x; });
    SolverConfig cfg;
    cfg.rel_tol = 1e-12;
    const auto sol = solve_dirichlet(op, std::vector<double>(grid->num_unknowns(), 2.0), g.boundary, cfg);
    for (int u = 0; u < grid->num_unknowns(); ++u) EXPECT_NEAR(sol.u.interior[u], g.interior[u], 1e-9);
    EXPECT_LE(sol.stats.residual, 1e-12);
}

TEST(Dirichlet, ManufacturedSolutionSecondOrder) {
    const auto field = CoefficientField::smooth_radial();
    auto exact = [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
    auto rhs = [&](double x, double y) {
        const Mat2 a = field(x, y);
        const double uxx = -pi * pi * exact(x, y), uyy = uxx;
        const double uxy = pi * pi * std::cos(pi * x) * std::cos(pi * y);
        return a.a11 * uxx + (a.a12 + a.a21) * uxy + a.a22 * uyy;
    };
    std::vector<double> err;
    SolverConfig cfg;
    cfg.rel_tol = 1e-12;
    for (int cells : {32, 64, 128}) {
        const auto grid = make_square(cells);
        const auto op = assemble(field, grid);
        const auto f = GridFunction::sample(grid, rhs), g = GridFunction::sample(grid, exact);
        const auto sol = solve_dirichlet(op, f.interior, g.boundary, cfg);
        double e = 0;
        for (int u = 0; u < grid->num_unknowns(); ++u) e = std::max(e, std::abs(sol.u.interior[u] - g.interior[u]));
        err.push_back(e);
    }
    for (std::size_t i = 1; i < err.size(); ++i) EXPECT_GE(std::log2(err[i - 1] / err[i]), 1.9);
}

TEST(Dirichlet, SymmetricPathAgrees) {
    const auto grid = make_square(40);
    const auto op = assemble(CoefficientField::identity(), grid);
    const auto f = GridFunction::sample(grid, [](double x, double y) { return std::exp(x) * std::cos(3 * y); });
    SolverConfig a, b;
    a.rel_tol = b.rel_tol = 1e-12;
    b.method = sparse::Method::cg;
    const auto ua = solve_dirichlet(op, f.interior, std::vector<double>(grid->num_boundary(), 0.0), a);
    const auto ub = solve_dirichlet(op, f.interior, std::vector<double>(grid->num_boundary(), 0.0), b);
    for (int u = 0; u < grid->num_unknowns(); ++u) EXPECT_NEAR(ua.u.interior[u], ub.u.interior[u], 1e-8);
}

TEST(Dirichlet, MaximumPrincipleForLaplacian) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1, 1);
    for (const auto& grid : {make_square(20), make_disc(1.0, 1.0 / 20)}) {
        const auto op = assemble(CoefficientField::identity(), grid);
        for (int trial = 0; trial < 20; ++trial) {
            const double a = U(rng), b = U(rng), c = U(rng), k = 1 + 3 * std::abs(U(rng));
            auto gfun = [&](double x, double y) { return a * std::sin(k * x) + b * std::cos(k * y) + c * x * y; };
            const auto g = GridFunction::sample(grid, gfun);
            const double bmax = *std::max_element(g.boundary.begin(), g.boundary.end());
            const double bmin = *std::min_element(g.boundary.begin(), g.boundary.end());
            std::vector<double> f(grid->num_unknowns());
            for (double& v : f) v = std::abs(U(rng));
            SolverConfig cfg;
            cfg.rel_tol = 1e-12;
            const auto sub = solve_dirichlet(op, f, g.boundary, cfg);
            for (double v : sub.u.interior) EXPECT_LE(v, bmax + 1e-10);
            for (double& v : f) v = -v;
            const auto super = solve_dirichlet(op, f, g.boundary, cfg);
            for (double v : super.u.interior) EXPECT_GE(v, bmin - 1e-10);
        }
    }
}

TEST(Dirichlet, Deterministic) {
    const auto grid = make_disc(1.0, 1.0 / 40);
    const auto op = assemble(CoefficientField::holder(0.5), grid);
    const auto f = GridFunction::sample(grid, [](double x, double y) { return x - y * y; });
    const auto a = solve_dirichlet(op, f, f), b = solve_dirichlet(op, f, f);
    EXPECT_EQ(a.u.interior, b.u.interior);
}

TEST(Dirichlet, DataMismatchRejected) {
    const auto grid = make_square(8);
    const auto op = assemble(CoefficientField::identity(), grid);
    EXPECT_THROW(solve_dirichlet(op, std::vector<double>(3), std::vector<double>(grid->num_boundary())),
                 PreconditionError);
}

TEST(Flux, LinearOnSquareIsExact) {
    const auto grid = make_square(16);
    const auto u = GridFunction::sample(grid, [](double x, double) { return x; });
    const auto flux = boundary_flux(u, CoefficientField::identity());
    for (int b = 0; b < grid->num_boundary(); ++b) EXPECT_NEAR(flux[b], grid->boundary_point(b).nx, 1e-12);
}

TEST(Flux, RadialQuadraticOnDisc) {
    const auto grid = make_disc(1.0, 1.0 / 32);
    const auto u = GridFunction::sample(grid, [](double x, double y) { return x * x + y * y; });
    for (double v : boundary_flux(u, CoefficientField::identity())) EXPECT_NEAR(v, 2.0, 1e-9);
}

TEST(Flux, AnisotropicQuadraticOnDisc) {
    const auto grid = make_disc(1.0, 1.0 / 24);
    const auto field = CoefficientField::holder(0.5);
    const auto u = GridFunction::sample(grid, [](double x, double y) { return x * x - 3 * x * y + 0.5 * y; });
    const auto flux = boundary_flux(u, field);
    for (int b = 0; b < grid->num_boundary(); ++b) {
        const auto& p = grid->boundary_point(b);
        const Mat2 a = field(p.x, p.y);
        const double gx = 2 * p.x - 3 * p.y, gy = -3 * p.x + 0.5;
        EXPECT_NEAR(flux[b], (a.a11 * p.nx + a.a12 * p.ny) * gx + (a.a21 * p.nx + a.a22 * p.ny) * gy, 1e-8);
    }
}

TEST(Flux, DivergenceTheorem) {
    // u = x^4: int_B1 Laplacian = int 12 x^2 = 3 pi
    std::vector<double> err;
    for (int m : {16, 32, 64}) {
        const auto grid = make_disc(1.0, 1.0 / m);
        const auto u = GridFunction::sample(grid, [](double x, double) { return x * x * x * x; });
        const auto flux = boundary_flux(u, CoefficientField::identity());
        double s = 0;
        for (int b = 0; b < grid->num_boundary(); ++b) s += flux[b] * grid->boundary_point(b).dsigma;
        err.push_back(std::abs(s - 3 * pi));
        EXPECT_LE(err.back(), 10.0 / m);
    }
}

TEST(Interpolate, CubicsReproducedInside) {
    const auto grid = make_disc(1.0, 1.0 / 32);
    auto c = [](double x, double y) { return 1 + x - 2 * y + x * x * y - 0.7 * y * y * y + x * x * x; };
    const auto f = GridFunction::sample(grid, c);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-0.85, 0.85);
    for (int k = 0; k < 200; ++k) {
        const double x = U(rng), y = U(rng);
        if (std::hypot(x, y) > 0.85) continue;
        EXPECT_NEAR(f.interpolate(x, y), c(x, y), 1e-12);
    }
    EXPECT_THROW(f.interpolate(1.0, 0.5), DomainError);
}

TEST(Interpolate, NearBoundaryStaysAccurate) {
    const auto grid = make_disc(1.0, 1.0 / 32);
    auto c = [](double x, double y) { return std::exp(x) * std::sin(y); };
    const auto f = GridFunction::sample(grid, c);
    for (int k = 0; k < 100; ++k) {
        const double t = 2 * pi * k / 100, r = 0.999;
        EXPECT_NEAR(f.interpolate(r * std::cos(t), r * std::sin(t)), c(r * std::cos(t), r * std::sin(t)), 2e-2);
    }
}
