#pragma once

// Nine-point discretization of tr(A D^2 u) with Shortley-Weller arms at cut
// cells, Dirichlet solves, and discrete normal fluxes A grad u . nu.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dini/coefficients.hpp"
#include "dini/error.hpp"
#include "dini/grid.hpp"
#include "dini/sparse.hpp"

namespace dini::fd {

using sparse::SolverConfig;
using sparse::SolveStats;

struct Term {
    Ref ref;
    double w;
};

/// Weights of D11, D22, D12 at one unknown.
struct HessianStencil {
    std::vector<Term> d11, d22, d12;
};

/// Second differences with unequal arms (exact on quadratics) and the mixed
/// derivative averaged over the quadrants whose three corners carry values.
inline HessianStencil hessian_stencil(const Grid2D& g, int u) {
    HessianStencil s;
    const auto& arm = g.arms(u);
    const Ref self{Ref::unknown, u};
    auto second = [&](const Arm& plus, const Arm& minus, std::vector<Term>& out) {
        const double hp = plus.len, hm = minus.len;
        out.push_back({plus.ref, 2.0 / (hp * (hp + hm))});
        out.push_back({minus.ref, 2.0 / (hm * (hp + hm))});
        out.push_back({self, -2.0 / (hp * hm)});
    };
    second(arm[east], arm[west], s.d11);
    second(arm[north], arm[south], s.d22);

    const int n = g.node_of_unknown(u);
    const int i = g.node_i(n), j = g.node_j(n);
    std::vector<std::array<Ref, 3>> quads;
    std::vector<std::pair<int, int>> signs;
    for (int sy : {1, -1})
        for (int sx : {1, -1}) {
            const Ref X = g.node_ref(i + sx, j), Y = g.node_ref(i, j + sy), C = g.node_ref(i + sx, j + sy);
            if (X && Y && C) {
                quads.push_back({X, Y, C});
                signs.emplace_back(sx, sy);
            }
        }
    if (quads.empty()) throw PreconditionError("no quadrant available for the mixed derivative");
    const double h2 = g.h() * g.h();
    const double scale = 1.0 / (static_cast<double>(quads.size()) * h2);
    for (std::size_t q = 0; q < quads.size(); ++q) {
        const double sg = signs[q].first * signs[q].second * scale;
        s.d12.push_back({quads[q][2], sg});
        s.d12.push_back({quads[q][0], -sg});
        s.d12.push_back({quads[q][1], -sg});
        s.d12.push_back({self, sg});
    }
    return s;
}

/// Rows over the unknowns: (L u)_i = sum_j A_int(i,j) u_j + sum_b B(i,b) g_b.
struct StencilOperator {
    GridPtr grid;
    sparse::CsrMatrix interior; // unknowns x unknowns
    sparse::CsrMatrix boundary; // unknowns x boundary points
    std::string field_name;

    std::vector<double> apply(const GridFunction& u) const {
        auto y = interior * u.interior;
        const auto yb = boundary * u.boundary;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += yb[i];
        return y;
    }
};

/// Accumulates a*D11 + 2 b*D12 + c*D22 of one stencil into triplets.
inline void add_hessian_row(const HessianStencil& s, int row, double a11, double a12, double a22,
                            std::vector<sparse::Triplet>& ti, std::vector<sparse::Triplet>& tb) {
    auto put = [&](const std::vector<Term>& terms, double c) {
        if (c == 0.0) return;
        for (const auto& t : terms) {
            if (t.ref.kind == Ref::unknown) ti.push_back({row, t.ref.index, c * t.w});
            else tb.push_back({row, t.ref.index, c * t.w});
        }
    };
    put(s.d11, a11);
    put(s.d22, a22);
    put(s.d12, 2.0 * a12);
}

inline StencilOperator assemble(const CoefficientField& field, GridPtr grid) {
    const Grid2D& g = *grid;
    std::vector<sparse::Triplet> ti, tb;
    ti.reserve(9 * g.num_unknowns());
    for (int u = 0; u < g.num_unknowns(); ++u) {
        const auto p = g.unknown_position(u);
        const Mat2 a = field.checked(p[0], p[1]);
        // diagonal first so every row stores it even if weights cancel
        ti.push_back({u, u, 0.0});
        add_hessian_row(hessian_stencil(g, u), u, a.a11, 0.5 * (a.a12 + a.a21), a.a22, ti, tb);
    }
    StencilOperator op;
    op.grid = grid;
    op.interior = sparse::CsrMatrix::from_triplets(g.num_unknowns(), g.num_unknowns(), std::move(ti));
    op.boundary = sparse::CsrMatrix::from_triplets(g.num_unknowns(), g.num_boundary(), std::move(tb));
    op.field_name = field.name();
    return op;
}

struct DirichletSolution {
    GridFunction u;
    SolveStats stats;
};

/// Solves L_h u = f in the interior with u = g on the boundary points. The
/// residual is relative to ||f - B g||.
inline DirichletSolution solve_dirichlet(const StencilOperator& op, const std::vector<double>& f,
                                         const std::vector<double>& g, const SolverConfig& cfg = {}) {
    const Grid2D& grid = *op.grid;
    if (static_cast<int>(f.size()) != grid.num_unknowns() || static_cast<int>(g.size()) != grid.num_boundary())
        throw PreconditionError("solve_dirichlet: data does not match the grid");
    auto rhs = op.boundary * g;
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = f[i] - rhs[i];
    DirichletSolution out{GridFunction(op.grid), {}};
    out.u.boundary = g;
    out.stats = sparse::solve(op.interior, rhs, out.u.interior, cfg);
    return out;
}

inline DirichletSolution solve_dirichlet(const StencilOperator& op, const GridFunction& f, const GridFunction& g,
                                         const SolverConfig& cfg = {}) {
    return solve_dirichlet(op, f.interior, g.boundary, cfg);
}

/// Linear functionals flux_b = sum_j F(b,j) u_j + sum_c Fb(b,c) g_c giving
/// A grad u . nu at each boundary point (quadratic least-squares fit).
struct FluxOperator {
    GridPtr grid;
    sparse::CsrMatrix interior; // boundary x unknowns
    sparse::CsrMatrix boundary; // boundary x boundary

    std::vector<double> apply(const GridFunction& u) const {
        auto y = interior * u.interior;
        const auto yb = boundary * u.boundary;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += yb[i];
        return y;
    }
};

namespace detail {

// Solves the small dense system m z = rhs by partial pivoting.
template <std::size_t N>
bool dense_solve(std::array<std::array<double, N>, N> m, std::array<double, N>& z) {
    for (std::size_t c = 0; c < N; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < N; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (std::abs(m[piv][c]) < 1e-13) return false;
        std::swap(m[c], m[piv]);
        std::swap(z[c], z[piv]);
        for (std::size_t r = c + 1; r < N; ++r) {
            const double f = m[r][c] / m[c][c];
            for (std::size_t k = c; k < N; ++k) m[r][k] -= f * m[c][k];
            z[r] -= f * z[c];
        }
    }
    for (std::size_t r = N; r-- > 0;) {
        double s = z[r];
        for (std::size_t k = r + 1; k < N; ++k) s -= m[r][k] * z[k];
        z[r] = s / m[r][r];
    }
    return true;
}

} // namespace detail

inline FluxOperator flux_operator(const CoefficientField& field, GridPtr grid) {
    const Grid2D& g = *grid;
    const double h = g.h();
    // boundary points bucketed by cell
    std::map<std::pair<int, int>, std::vector<int>> bucket;
    auto cell = [&](double x, double y) {
        return std::pair{static_cast<int>(std::floor((x - g.x0()) / h)), static_cast<int>(std::floor((y - g.y0()) / h))};
    };
    for (int b = 0; b < g.num_boundary(); ++b) bucket[cell(g.boundary_point(b).x, g.boundary_point(b).y)].push_back(b);

    std::vector<sparse::Triplet> ti, tb;
    for (int b = 0; b < g.num_boundary(); ++b) {
        const auto& bp = g.boundary_point(b);
        const Mat2 a = field.checked(bp.x, bp.y);
        const double gx = (a.a11 * bp.nx + a.a12 * bp.ny) / h, gy = (a.a21 * bp.nx + a.a22 * bp.ny) / h;
        bool done = false;
        for (double reach = 2.5; reach <= 4.5 && !done; reach += 1.0) {
            std::vector<std::pair<Ref, std::array<double, 2>>> pts;
            const auto [ci, cj] = cell(bp.x, bp.y);
            const int span = static_cast<int>(std::ceil(reach)) + 1;
            for (int dj = -span; dj <= span; ++dj)
                for (int di = -span; di <= span; ++di) {
                    const int i = ci + di, j = cj + dj;
                    if (i < 0 || j < 0 || i >= g.nx() || j >= g.ny()) continue;
                    const int n = g.node(i, j);
                    const double X = (g.x(i) - bp.x) / h, Y = (g.y(j) - bp.y) / h;
                    if (std::hypot(X, Y) > reach) continue;
                    if (g.kind(n) == NodeKind::interior) pts.push_back({{Ref::unknown, g.unknown_of_node(n)}, {X, Y}});
                    if (g.kind(n) == NodeKind::boundary) pts.push_back({{Ref::boundary, g.boundary_of_node(n)}, {X, Y}});
                    const auto it = bucket.find({i, j});
                    if (it == bucket.end()) continue;
                    for (int c : it->second) {
                        const auto& q = g.boundary_point(c);
                        if (q.node >= 0) continue;
                        const double QX = (q.x - bp.x) / h, QY = (q.y - bp.y) / h;
                        if (std::hypot(QX, QY) <= reach) pts.push_back({{Ref::boundary, c}, {QX, QY}});
                    }
                }
            if (pts.size() < 8) continue;
            std::array<std::array<double, 6>, 6> vtv{};
            auto basis = [](const std::array<double, 2>& p) {
                return std::array<double, 6>{1.0, p[0], p[1], p[0] * p[0], p[0] * p[1], p[1] * p[1]};
            };
            for (const auto& [ref, p] : pts) {
                const auto v = basis(p);
                for (int r = 0; r < 6; ++r)
                    for (int c = 0; c < 6; ++c) vtv[r][c] += v[r] * v[c];
            }
            std::array<double, 6> z{0.0, gx, gy, 0.0, 0.0, 0.0};
            if (!detail::dense_solve(vtv, z)) continue;
            for (const auto& [ref, p] : pts) {
                const auto v = basis(p);
                double w = 0.0;
                for (int r = 0; r < 6; ++r) w += v[r] * z[r];
                if (ref.kind == Ref::unknown) ti.push_back({b, ref.index, w});
                else tb.push_back({b, ref.index, w});
            }
            done = true;
        }
        if (!done) throw PreconditionError("boundary flux: not enough points for a quadratic fit");
    }
    FluxOperator op;
    op.grid = grid;
    op.interior = sparse::CsrMatrix::from_triplets(g.num_boundary(), g.num_unknowns(), std::move(ti));
    op.boundary = sparse::CsrMatrix::from_triplets(g.num_boundary(), g.num_boundary(), std::move(tb));
    return op;
}

/// Discrete A grad u . nu at each boundary point.
inline std::vector<double> boundary_flux(const GridFunction& u, const CoefficientField& field) {
    return flux_operator(field, u.grid).apply(u);
}

} // namespace dini::fd
