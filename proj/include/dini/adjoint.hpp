#pragma once

// Adjoint solutions of L* w = div^2 Phi + eta by discrete transposition,
// harmonic replacement on shells, and the dyadic harmonic-approximation
// iteration that yields the continuity modulus of adjoint solutions.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dini/coefficients.hpp"
#include "dini/error.hpp"
#include "dini/fdsolver.hpp"
#include "dini/gauss_kronrod.hpp"
#include "dini/grid.hpp"
#include "dini/moduli.hpp"
#include "dini/quadrature.hpp"
#include "dini/sparse.hpp"

namespace dini::adjoint {

using fd::CoefficientField;
using fd::Grid2D;
using fd::GridFunction;
using fd::GridPtr;
using fd::Mat2;
using fd::Ref;
using sparse::SolverConfig;
using ScalarFn = std::function<double(double, double)>;

/// (sum over unknowns with |x| <= radius of |f|^p h^2)^{1/p}; p = inf gives the max.
inline double lp_norm(const GridFunction& f, double p, double radius = std::numeric_limits<double>::infinity()) {
    const Grid2D& g = *f.grid;
    const double h2 = g.h() * g.h();
    double s = 0.0;
    for (int u = 0; u < g.num_unknowns(); ++u) {
        const auto x = g.unknown_position(u);
        if (std::hypot(x[0], x[1]) > radius) continue;
        const double a = std::abs(f.interior[u]);
        if (std::isinf(p)) s = std::max(s, a);
        else s += std::pow(a, p) * h2;
    }
    return std::isinf(p) ? s : std::pow(s, 1.0 / p);
}

/// Data of the adjoint problem: Phi and eta per unknown, psi per boundary point.
struct AdjointData {
    std::vector<double> phi11, phi12, phi22;
    std::vector<double> eta_source;
    std::vector<double> psi;
    double p = 2.0;

    double conjugate() const { return p / (p - 1.0); }

    static AdjointData zero(const Grid2D& g, double p = 2.0) {
        AdjointData d;
        d.phi11.assign(g.num_unknowns(), 0.0);
        d.phi12.assign(g.num_unknowns(), 0.0);
        d.phi22.assign(g.num_unknowns(), 0.0);
        d.eta_source.assign(g.num_unknowns(), 0.0);
        d.psi.assign(g.num_boundary(), 0.0);
        d.p = p;
        return d;
    }

    /// Samples the data; empty functions mean zero.
    static AdjointData sample(const Grid2D& g, const std::function<Mat2(double, double)>& phi, const ScalarFn& eta,
                              const ScalarFn& psi, double p = 2.0) {
        AdjointData d = zero(g, p);
        for (int u = 0; u < g.num_unknowns(); ++u) {
            const auto x = g.unknown_position(u);
            if (phi) {
                const Mat2 m = phi(x[0], x[1]);
                d.phi11[u] = m.a11;
                d.phi12[u] = 0.5 * (m.a12 + m.a21);
                d.phi22[u] = m.a22;
            }
            if (eta) d.eta_source[u] = eta(x[0], x[1]);
        }
        if (psi)
            for (int b = 0; b < g.num_boundary(); ++b) d.psi[b] = psi(g.boundary_point(b).x, g.boundary_point(b).y);
        return d;
    }

    void validate(const Grid2D& g) const {
        const auto nu = static_cast<std::size_t>(g.num_unknowns());
        if (phi11.size() != nu || phi12.size() != nu || phi22.size() != nu || eta_source.size() != nu ||
            psi.size() != static_cast<std::size_t>(g.num_boundary()))
            throw PreconditionError("adjoint data does not match the grid");
        if (!(p > 1.0) || !std::isfinite(p)) throw PreconditionError("adjoint data needs 1 < p < inf");
    }

    bool has_psi() const {
        return std::any_of(psi.begin(), psi.end(), [](double v) { return v != 0.0; });
    }
};

/// r with <r, u> = sum h^2 tr(Phi D_h^2 u) + sum h^2 eta u + sum dsigma psi (A grad_h u . nu)
/// for every u vanishing on the boundary.
inline std::vector<double> assemble_adjoint_rhs(const AdjointData& data, const fd::StencilOperator& op,
                                                const CoefficientField& field) {
    const Grid2D& g = *op.grid;
    data.validate(g);
    const double h2 = g.h() * g.h();
    std::vector<double> r(g.num_unknowns(), 0.0);
    for (int q = 0; q < g.num_unknowns(); ++q) {
        r[q] += h2 * data.eta_source[q];
        const double c11 = data.phi11[q], c12 = data.phi12[q], c22 = data.phi22[q];
        if (c11 == 0.0 && c12 == 0.0 && c22 == 0.0) continue;
        const auto s = fd::hessian_stencil(g, q);
        auto put = [&](const std::vector<fd::Term>& terms, double c) {
            for (const auto& t : terms)
                if (t.ref.kind == Ref::unknown) r[t.ref.index] += h2 * c * t.w;
        };
        put(s.d11, c11);
        put(s.d22, c22);
        put(s.d12, 2.0 * c12);
    }
    if (data.has_psi()) {
        const auto flux = fd::flux_operator(field, op.grid);
        std::vector<double> weighted(g.num_boundary());
        for (int b = 0; b < g.num_boundary(); ++b) weighted[b] = data.psi[b] * g.boundary_point(b).dsigma;
        const auto add = flux.interior.multiply_transposed(weighted);
        for (int q = 0; q < g.num_unknowns(); ++q) r[q] += add[q];
    }
    return r;
}

struct AdjointSolution {
    GridFunction v;
    double duality_residual = 0.0;
    double norm_report = 0.0;
    sparse::SolveStats stats;
};

/// max over a seeded family of random u of |h^2 <v, A u> - <r, u>| / (||r|| ||u||).
inline double duality_defect(const fd::StencilOperator& op, const std::vector<double>& rhs,
                             const std::vector<double>& v, int members = 20, unsigned seed = 7) {
    const Grid2D& g = *op.grid;
    const double h2 = g.h() * g.h();
    const double rn = sparse::norm2(rhs);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst = 0.0;
    std::vector<double> u(g.num_unknowns());
    for (int m = 0; m < members; ++m) {
        for (double& x : u) x = uni(rng);
        const auto au = op.interior * u;
        const double lhs = h2 * sparse::dot(v, au), rr = sparse::dot(rhs, u);
        const double scale = rn * sparse::norm2(u);
        if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rr) / scale);
        else worst = std::max(worst, std::abs(lhs));
    }
    return worst;
}

/// Solves h^2 A_int^T v = r. The boundary trace of v is not a degree of
/// freedom; pass the continuum boundary value to store it for interpolation.
inline AdjointSolution solve_adjoint(const fd::StencilOperator& op, const std::vector<double>& rhs,
                                     const SolverConfig& cfg = {}, double p = 2.0,
                                     const std::vector<double>& boundary_trace = {}) {
    const Grid2D& g = *op.grid;
    if (static_cast<int>(rhs.size()) != g.num_unknowns()) throw PreconditionError("solve_adjoint: rhs does not match the grid");
    const double h2 = g.h() * g.h();
    std::vector<double> b(rhs.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rhs[i] / h2;
    AdjointSolution out{GridFunction(op.grid), 0.0, 0.0, {}};
    if (!boundary_trace.empty()) {
        if (static_cast<int>(boundary_trace.size()) != g.num_boundary())
            throw PreconditionError("solve_adjoint: boundary trace does not match the grid");
        out.v.boundary = boundary_trace;
    }
    out.stats = sparse::solve(op.interior.transpose(), b, out.v.interior, cfg);
    out.duality_residual = duality_defect(op, rhs, out.v.interior);
    out.norm_report = lp_norm(out.v, p);
    return out;
}

struct ShellChoice {
    double t = 0.0;
    double shell_norm = 0.0;
    double ball_norm = 0.0;
    std::vector<double> candidates;
    std::vector<double> norms;

    /// shell_norm / ball_norm; the averaging argument bounds it by (1/|window|)^{1/p}.
    double fubini_constant() const { return ball_norm > 0.0 ? shell_norm / ball_norm : 0.0; }
};

/// ||v||_{l^p(dB_t)} from interpolated values on max(64, 2 pi t / h) equally spaced nodes.
inline double shell_norm(const GridFunction& v, double p, double t) {
    const double h = v.grid->h();
    const int n = std::max(64, static_cast<int>(std::ceil(2.0 * std::numbers::pi * t / h)));
    const double dphi = 2.0 * std::numbers::pi / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double phi = i * dphi;
        const double a = std::abs(v.interpolate(t * std::cos(phi), t * std::sin(phi)));
        s += std::isinf(p) ? 0.0 : std::pow(a, p) * t * dphi;
        if (std::isinf(p)) s = std::max(s, a);
    }
    return std::isinf(p) ? s : std::pow(s, 1.0 / p);
}

/// Radius t in [lo, hi - 3h] on the grid spacing minimizing the shell norm;
/// ties go to the smallest t.
inline ShellChoice shell_select(const GridFunction& v, double p, double lo = 0.75, double hi = 1.0) {
    const double h = v.grid->h();
    const double top = std::min(hi, v.grid->radius()) - 3.0 * h;
    if (top < lo) throw DomainError("shell window contains no admissible radius");
    ShellChoice c;
    c.ball_norm = lp_norm(v, p, hi);
    for (int m = 0;; ++m) {
        const double t = lo + m * h;
        if (t > top + 1e-12 * h) break;
        c.candidates.push_back(t);
        c.norms.push_back(shell_norm(v, p, t));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.norms.size(); ++i)
        if (c.norms[i] < c.norms[best]) best = i;
    c.t = c.candidates[best];
    c.shell_norm = c.norms[best];
    return c;
}

struct HarmonicPiece {
    double t = 0.0;
    GridFunction h;
    sparse::SolveStats stats;
    double norm = 0.0;       // ||h||_{l^p(B_t)}
    double shell_norm = 0.0; // ||v||_{l^p(dB_t)}
    double local_constant() const { return shell_norm > 0.0 ? norm / shell_norm : 0.0; }
};

/// Discrete harmonic function on the disc of radius t about the origin with
/// boundary values interpolated from v; the solve starts from v.
inline HarmonicPiece harmonic_replacement(const GridFunction& v, double t, double p = 2.0,
                                          const SolverConfig& cfg = {}) {
    if (t > v.grid->radius()) throw DomainError("harmonic replacement ball leaves the grid");
    auto grid = fd::make_disc(t, v.grid->h());
    const auto op = fd::assemble(CoefficientField::identity(), grid);
    std::vector<double> g(grid->num_boundary());
    for (int b = 0; b < grid->num_boundary(); ++b) {
        const auto& bp = grid->boundary_point(b);
        g[b] = v.interpolate(bp.x, bp.y);
    }
    // warm start from v itself
    GridFunction h(grid);
    h.boundary = g;
    for (int u = 0; u < grid->num_unknowns(); ++u) {
        const auto x = grid->unknown_position(u);
        h.interior[u] = v.interpolate(x[0], x[1]);
    }
    auto rhs = op.boundary * g;
    for (double& r : rhs) r = -r;
    const auto stats = sparse::solve(op.interior, rhs, h.interior, cfg);
    HarmonicPiece out{t, std::move(h), stats, 0.0, 0.0};
    out.norm = lp_norm(out.h, p);
    out.shell_norm = shell_norm(v, p, t);
    return out;
}

/// Modulus theta of the coefficients in the frame at hand, omega = t^2 + theta.
struct Omega {
    std::function<double(double)> theta;

    double operator()(double t) const { return t * t + theta(t); }

    /// int_0^delta omega(t)/t dt
    double dini(double delta) const {
        gk::Options q;
        q.rel_tol = 1e-10;
        q.abs_tol = 1e-300;
        const auto th = theta;
        return 0.5 * delta * delta +
               gk::integrate_to_infinity([&th](double u) { return th(std::exp(-u)); }, -std::log(delta), q).value;
    }

    static Omega zero() {
        return {[](double) { return 0.0; }};
    }

    /// theta(t) = c * spec(min(scale t, 1)) * gain, from the field's modulus.
    static Omega of(const CoefficientField& field, double scale = 1.0, double gain = 1.0) {
        if (!field.modulus() || field.modulus_constant() == 0.0) return zero();
        const auto spec = *field.modulus();
        const double c = field.modulus_constant() * gain;
        return {[spec, c, scale](double t) { return c * spec(std::min(scale * t, 1.0)); }};
    }
};

struct RescaleState {
    double delta = 1.0;
    double delta_bar = 0.0;
    double M = 1.0;
    double v_norm = 0.0;        // ||v||_{l^p(B_1)}
    double zeta_sup = 0.0;      // ||zeta||_inf on B_1
    double v_delta_norm = 0.0;  // ||v_delta||_{l^p(B_1)}
    double zeta_delta_sup = 0.0;
    double v_bound = 0.0;       // M^{-1} omega(delta)
    double zeta_bound = 0.0;    // M^{-1} delta^2 omega(delta)
    GridFunction v_delta;
    ScalarFn zeta_delta;

    bool within(double slack = 0.05) const {
        return v_delta_norm <= v_bound * (1.0 + slack) && zeta_delta_sup <= zeta_bound * (1.0 + slack);
    }
};

/// v_delta(x) = delta_bar v(delta x), zeta_delta(x) = delta_bar delta^2 zeta(delta x) with
/// delta_bar = M^{-1} delta^{n/p} omega(delta) / (1 + ||v|| + ||zeta||_inf).
inline RescaleState rescale(const GridFunction& v, const ScalarFn& zeta, double delta, double p, double M,
                            const Omega& omega, GridPtr target = nullptr) {
    if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("rescale needs 0 < delta <= 1");
    if (!(M > 0.0)) throw PreconditionError("rescale needs M > 0");
    if (!target) target = v.grid;
    RescaleState s;
    s.delta = delta;
    s.M = M;
    s.v_norm = lp_norm(v, p, 1.0);
    const ScalarFn z = zeta ? zeta : ScalarFn([](double, double) { return 0.0; });
    auto sup_on = [](const Grid2D& g, const ScalarFn& f) {
        double m = 0.0;
        for (int u = 0; u < g.num_unknowns(); ++u) {
            const auto x = g.unknown_position(u);
            if (std::hypot(x[0], x[1]) <= 1.0) m = std::max(m, std::abs(f(x[0], x[1])));
        }
        for (const auto& bp : g.boundary_points())
            if (std::hypot(bp.x, bp.y) <= 1.0 + 1e-12) m = std::max(m, std::abs(f(bp.x, bp.y)));
        return m;
    };
    s.zeta_sup = sup_on(*v.grid, z);
    const double om = omega(delta);
    s.delta_bar = std::pow(delta, 2.0 / p) * om / (M * (1.0 + s.v_norm + s.zeta_sup));
    const double db = s.delta_bar;
    if (delta == 1.0 && target == v.grid) {
        s.v_delta = v;
        for (double& x : s.v_delta.interior) x *= db;
        for (double& x : s.v_delta.boundary) x *= db;
    } else {
        s.v_delta = GridFunction::sample(target, [&](double x, double y) { return db * v.interpolate(delta * x, delta * y); });
    }
    s.zeta_delta = [z, db, delta](double x, double y) { return db * delta * delta * z(delta * x, delta * y); };
    s.v_delta_norm = lp_norm(s.v_delta, p, 1.0);
    s.zeta_delta_sup = sup_on(*target, s.zeta_delta);
    s.v_bound = om / M;
    s.zeta_bound = delta * delta * om / M;
    return s;
}

inline Mat2 inverse(const Mat2& a) {
    const double det = a.a11 * a.a22 - a.a12 * a.a21;
    return {a.a22 / det, -a.a12 / det, -a.a21 / det, a.a11 / det};
}

inline Mat2 product(const Mat2& a, const Mat2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22, a.a21 * b.a11 + a.a22 * b.a21,
            a.a21 * b.a12 + a.a22 * b.a22};
}

/// Symmetric square root of an SPD matrix: (A + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
inline Mat2 sqrt_spd(const Mat2& a) {
    const double s = std::sqrt(a.a11 * a.a22 - a.a12 * a.a21);
    const double t = std::sqrt(a.a11 + a.a22 + 2.0 * s);
    return {(a.a11 + s) / t, a.a12 / t, a.a21 / t, (a.a22 + s) / t};
}

/// y = center + rho T x with T = A(center)^{1/2}, so the local coefficients
/// T^{-1} A(y) T^{-1} equal I at x = 0.
struct LocalFrame {
    double cx = 0.0, cy = 0.0, rho = 0.25;
    Mat2 T, Tinv;

    std::array<double, 2> to_global(double x, double y) const {
        return {cx + rho * (T.a11 * x + T.a12 * y), cy + rho * (T.a21 * x + T.a22 * y)};
    }
};

struct Localized {
    LocalFrame frame;
    GridFunction v;
    CoefficientField field;
    ScalarFn zeta;
    Omega omega;
};

/// Transports v, A and zeta to the unit disc about (cx, cy) with A(0) = I.
/// v is resampled on a disc of radius 1 and spacing h_local; zeta picks up rho^2.
inline Localized localize(const GridFunction& v, const CoefficientField& field, const ScalarFn& zeta, double cx,
                          double cy, double rho, double h_local) {
    if (!(rho > 0.0)) throw PreconditionError("localize needs rho > 0");
    LocalFrame fr;
    fr.cx = cx;
    fr.cy = cy;
    fr.rho = rho;
    const Mat2 a0 = field.checked(cx, cy);
    fr.T = sqrt_spd(a0);
    fr.Tinv = inverse(fr.T);
    auto fn = [field, fr](double x, double y) {
        const auto p = fr.to_global(x, y);
        return product(fr.Tinv, product(field(p[0], p[1]), fr.Tinv));
    };
    CoefficientField local(field.name() + "@local", fn);
    const double lmax = a0.max_eigenvalue(), lmin = a0.min_eigenvalue();
    const Omega om = Omega::of(field, rho * std::sqrt(lmax), 1.0 / lmin);
    if (field.modulus()) local.with_modulus(*field.modulus(), field.modulus_constant() / lmin);
    auto grid = fd::make_disc(1.0, h_local);
    auto vl = GridFunction::sample(grid, [&](double x, double y) {
        const auto p = fr.to_global(x, y);
        return v.interpolate(p[0], p[1]);
    });
    ScalarFn z;
    if (zeta)
        z = [zeta, fr](double x, double y) {
            const auto p = fr.to_global(x, y);
            return fr.rho * fr.rho * zeta(p[0], p[1]);
        };
    return {fr, std::move(vl), std::move(local), std::move(z), om};
}

/// Constants of the local shell estimate and of the harmonic interior estimate,
/// measured by calibrate() and frozen here.
inline constexpr double kLocalConstant = 0.75;
inline constexpr double kHarmonicConstant = 2.5;

/// C = 2 C(n,p) [4^{2+n/p} M + 1] in the plane.
inline double induction_constant(double M, double harmonic_constant, double p) {
    return 2.0 * harmonic_constant * (std::pow(4.0, 2.0 + 2.0 / p) * M + 1.0);
}

/// Largest delta in (0, 1] with 2M[32 |B_1|^{1/p} C int_0^delta omega/t + omega(delta)] <= 1.
inline double select_delta(const Omega& omega, double M, double C, double p) {
    const double b1 = std::pow(std::numbers::pi, 1.0 / p);
    auto excess = [&](double ld) {
        const double d = std::exp(ld);
        return 2.0 * M * (32.0 * b1 * C * omega.dini(d) + omega(d)) - 1.0;
    };
    if (excess(0.0) <= 0.0) return 1.0;
    double lo = -700.0, hi = 0.0;
    if (excess(lo) > 0.0) throw DomainError("no admissible delta: the smallness condition fails at every scale");
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) <= 0.0 ? lo : hi) = mid;
    }
    return std::exp(lo);
}

struct IterationConfig {
    int levels = 4;
    double delta = 1.0; // <= 0 selects delta by the smallness condition
    double p = 2.0;
    double M = kLocalConstant;
    double harmonic_constant = kHarmonicConstant;
    int min_nodes = 16;
    SolverConfig solver;
};

/// Level quantities in the level frame x -> 4^{-k} x, where norms over B_1
/// equal 4^{kn/p} times the norms over 4^{-k} B_1.
struct LevelRecord {
    int k = 0;
    double scale = 1.0;       // 4^{-k} delta
    double omega = 0.0;       // omega(4^{-k} delta)
    double theta = 0.0;       // theta(4^{-k} delta)
    double t = 0.0;
    double w_norm = 0.0;      // ||W_k||_{l^p(B_1)}
    double h_norm = 0.0;      // ||h~_k||_{l^p(B_3/4)}
    double tail_norm = 0.0;   // ||W_k - h~_k||_{l^p(B_1/4)}
    double gap_norm = 0.0;    // ||W_k - h~_k||_{l^p(B_3/4)}
    double sup_grad = 0.0;    // ||h~_k||_inf + ||grad h~_k||_inf on B_1/2
    double g_norm = 0.0;      // ||G_k||_{l^p(B_1)}
    double g_bound = 0.0;     // [32 C |B_1|^{1/p} int_0^delta omega/t] theta(4^{-k} delta)
    double local_constant = 0.0;
    double harmonic_constant = 0.0;
    double center_value = 0.0; // h~_k(0)
    double duality_residual = 0.0;
    int iterations = 0;

    double w_ratio() const { return w_norm / omega; }
    double h_ratio() const { return h_norm / omega; }
    double sup_grad_ratio() const { return sup_grad / omega; }
    double g_ratio() const { return theta > 0.0 ? g_norm / theta : 0.0; }
};

struct HarmonicSequence {
    RescaleState rescale;
    double delta = 1.0;
    double induction_C = 0.0;
    double dini_delta = 0.0; // int_0^delta omega/t
    std::vector<double> shells;
    std::vector<GridFunction> pieces;    // h~_k on B_{t_k}
    std::vector<GridFunction> residuals; // W_k on B_1
    std::vector<LevelRecord> levels;
    bool truncated = false;
    std::string notice;

    /// sum_j h~_j(0), in the rescaled units of v_delta.
    double partial_sum(std::size_t upto) const {
        double s = 0.0;
        for (std::size_t j = 0; j < std::min(upto, levels.size()); ++j) s += levels[j].center_value;
        return s;
    }
    /// a(center) in the units of v.
    double limit_value() const { return partial_sum(levels.size()) / rescale.delta_bar; }

    /// max / min of ||W_k|| / omega(4^{-k} delta) over k >= 1.
    double ratio_spread() const {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& l : levels)
            if (l.k >= 1) {
                lo = std::min(lo, l.w_ratio());
                hi = std::max(hi, l.w_ratio());
            }
        return hi > 0.0 ? hi / lo : 0.0;
    }
};

namespace detail {

inline double sup_grad_half(const GridFunction& h) {
    const Grid2D& g = *h.grid;
    double sup = 0.0, grad = 0.0;
    for (int u = 0; u < g.num_unknowns(); ++u) {
        const auto x = g.unknown_position(u);
        if (std::hypot(x[0], x[1]) > 0.5) continue;
        sup = std::max(sup, std::abs(h.interior[u]));
        const int n = g.node_of_unknown(u), i = g.node_i(n), j = g.node_j(n);
        double e, w, no, so;
        if (h.node_value(i + 1, j, e) && h.node_value(i - 1, j, w) && h.node_value(i, j + 1, no) &&
            h.node_value(i, j - 1, so))
            grad = std::max(grad, std::hypot(e - w, no - so) / (2.0 * g.h()));
    }
    return sup + grad;
}

// ||a - b||_{l^p} over unknowns of b's grid with |x| <= radius, a interpolated.
inline double difference_norm(const GridFunction& a, const GridFunction& b, double p, double radius) {
    GridFunction d(b.grid);
    for (int u = 0; u < b.grid->num_unknowns(); ++u) {
        const auto x = b.grid->unknown_position(u);
        if (std::hypot(x[0], x[1]) <= radius) d.interior[u] = a.interpolate(x[0], x[1]) - b.interior[u];
    }
    return lp_norm(d, p, radius);
}

} // namespace detail

/// v, field and zeta in a frame where A(0) = I and v lives on a disc of
/// radius >= 1. Level k works on the same unit disc in the coordinates
/// x -> 4^{-k} delta x; W_k for k >= 1 solves the local adjoint problem with
/// Phi = G_k, eta = 4^{-2k} zeta_delta(4^{-k} x) and boundary trace
/// (W_{k-1} - h~_{k-1})(x/4).
inline HarmonicSequence dyadic_iteration(const GridFunction& v, const CoefficientField& field, const ScalarFn& zeta,
                                         const Omega& omega, const IterationConfig& cfg) {
    if (cfg.levels < 0) throw PreconditionError("dyadic iteration needs levels >= 0");
    if (!(cfg.M > 0.0) || !(cfg.harmonic_constant > 0.0)) throw PreconditionError("dyadic iteration needs M, C(n,p) > 0");
    const Mat2 a0 = field.checked(0.0, 0.0);
    if (std::abs(a0.a11 - 1) + std::abs(a0.a12) + std::abs(a0.a21) + std::abs(a0.a22 - 1) > 1e-10)
        throw PreconditionError("dyadic iteration needs A(0) = I; localize the field first");
    const GridPtr g = v.grid;
    const double p = cfg.p;
    HarmonicSequence seq;
    seq.induction_C = induction_constant(cfg.M, cfg.harmonic_constant, p);
    seq.delta = cfg.delta > 0.0 ? std::min(cfg.delta, 1.0) : select_delta(omega, cfg.M, seq.induction_C, p);
    seq.dini_delta = omega.dini(seq.delta);
    seq.rescale = rescale(v, zeta, seq.delta, p, cfg.M, omega);
    if (g->cells_across() < cfg.min_nodes) {
        seq.truncated = true;
        seq.notice = "grid has fewer than " + std::to_string(cfg.min_nodes) + " nodes across the ball";
        return seq;
    }
    const double b1 = std::pow(std::numbers::pi, 1.0 / p);
    const double zd_delta = seq.delta;
    for (int k = 0; k <= cfg.levels; ++k) {
        try {
            LevelRecord rec;
            rec.k = k;
            rec.scale = std::pow(4.0, -k) * zd_delta;
            rec.omega = omega(rec.scale);
            rec.theta = omega.theta(rec.scale);
            GridFunction W;
            if (k == 0) {
                W = seq.rescale.v_delta;
            } else {
                const double s = std::pow(4.0, -k);
                const CoefficientField ak = field.rescaled(0.0, 0.0, rec.scale);
                const auto& pieces = seq.pieces;
                auto S = [&pieces, k](double x, double y) {
                    double sum = 0.0;
                    for (int j = 0; j < k; ++j) {
                        const double f = std::pow(4.0, j - k);
                        sum += pieces[j].interpolate(f * x, f * y);
                    }
                    return sum;
                };
                auto G = [&](double x, double y) {
                    const Mat2 a = ak(x, y);
                    const double sv = S(x, y);
                    return Mat2{(1.0 - a.a11) * sv, -a.a12 * sv, -a.a21 * sv, (1.0 - a.a22) * sv};
                };
                const auto& zd = seq.rescale.zeta_delta;
                auto eta = [&zd, s](double x, double y) { return s * s * zd(s * x, s * y); };
                auto data = AdjointData::sample(*g, G, eta, {}, p);
                const auto& prevW = seq.residuals.back();
                const auto& prevH = seq.pieces.back();
                std::vector<double> trace(g->num_boundary());
                for (int b = 0; b < g->num_boundary(); ++b) {
                    const auto& bp = g->boundary_point(b);
                    const double wb = prevW.interpolate(0.25 * bp.x, 0.25 * bp.y) - prevH.interpolate(0.25 * bp.x, 0.25 * bp.y);
                    const Mat2 a = ak(bp.x, bp.y);
                    const double ann = a.a11 * bp.nx * bp.nx + (a.a12 + a.a21) * bp.nx * bp.ny + a.a22 * bp.ny * bp.ny;
                    trace[b] = wb;
                    // w = psi + G nu.nu / A nu.nu with G = (I - A) S
                    data.psi[b] = wb + S(bp.x, bp.y) * (ann - 1.0) / ann;
                }
                GridFunction gnorm(g);
                for (int u = 0; u < g->num_unknowns(); ++u)
                    gnorm.interior[u] = std::sqrt(data.phi11[u] * data.phi11[u] + 2.0 * data.phi12[u] * data.phi12[u] +
                                                  data.phi22[u] * data.phi22[u]);
                rec.g_norm = lp_norm(gnorm, p, 1.0);
                const auto op = fd::assemble(ak, g);
                auto sol = solve_adjoint(op, assemble_adjoint_rhs(data, op, ak), cfg.solver, p, trace);
                rec.duality_residual = sol.duality_residual;
                rec.iterations = sol.stats.iterations;
                W = std::move(sol.v);
            }
            rec.g_bound = 32.0 * seq.induction_C * b1 * seq.dini_delta * rec.theta;
            const auto shell = shell_select(W, p);
            auto piece = harmonic_replacement(W, shell.t, p, cfg.solver);
            rec.t = shell.t;
            rec.w_norm = lp_norm(W, p, 1.0);
            rec.h_norm = lp_norm(piece.h, p, 0.75);
            rec.tail_norm = detail::difference_norm(W, piece.h, p, 0.25);
            rec.gap_norm = detail::difference_norm(W, piece.h, p, 0.75);
            rec.sup_grad = detail::sup_grad_half(piece.h);
            rec.local_constant = piece.local_constant();
            rec.harmonic_constant = rec.h_norm > 0.0 ? rec.sup_grad / rec.h_norm : 0.0;
            rec.center_value = piece.h.interpolate(0.0, 0.0);
            seq.shells.push_back(shell.t);
            seq.residuals.push_back(std::move(W));
            seq.pieces.push_back(std::move(piece.h));
            seq.levels.push_back(rec);
        } catch (const DomainError& e) {
            seq.truncated = true;
            seq.notice = "level " + std::to_string(k) + ": " + e.what();
            break;
        } catch (const ConvergenceError& e) {
            seq.truncated = true;
            seq.notice = "level " + std::to_string(k) + ": " + e.what();
            break;
        }
    }
    return seq;
}

inline HarmonicSequence dyadic_iteration(const Localized& loc, const IterationConfig& cfg) {
    return dyadic_iteration(loc.v, loc.field, loc.zeta, loc.omega, cfg);
}

/// sigma(t) = int_0^t omega/s + t int_t^1 omega/s^2 + omega(t).
inline double sigma(const Omega& omega, double t) {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("sigma is defined for t in (0, 1]");
    gk::Options q;
    q.rel_tol = 1e-10;
    q.abs_tol = 1e-300;
    const auto& th = omega.theta;
    const double lt = -std::log(t);
    double upper = 0.0;
    if (lt > 0.0) upper = gk::integrate([&th](double u) { return th(std::exp(-u)) * std::exp(u); }, 0.0, lt, q).value;
    return omega.dini(t) + t * ((1.0 - t) + upper) + omega(t);
}

struct ContinuityConfig {
    double rho = 0.25;
    double h_local = 1.0 / 128;
    std::vector<double> radii{0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
    double quad_tol = 1e-7;
    IterationConfig iteration;
};

struct ContinuityEstimate {
    double cx = 0.0, cy = 0.0;
    double limit_value = 0.0; // a(center)
    std::vector<double> radii, oscillation, deviation, sigma;
    double fitted_C = 0.0;
    double fit_residual = 0.0; // ||osc - C sigma|| / ||osc||
    bool monotone = false;
    double decay_ratio = 0.0;  // last / first oscillation
    bool partial = false;
    std::string notice;
    std::vector<LevelRecord> levels;
    double delta = 1.0, delta_bar = 0.0;
};

/// Mean oscillation of v on dyadic balls about the center, the limit a(center)
/// from the dyadic iteration there, and the least-squares fit osc ~ C sigma(r).
inline ContinuityEstimate continuity_estimate(const GridFunction& v, const CoefficientField& field, const ScalarFn& zeta,
                                              double cx, double cy, const ContinuityConfig& cfg = {}) {
    if (cfg.radii.empty()) throw PreconditionError("continuity estimate needs radii");
    ContinuityEstimate est;
    est.cx = cx;
    est.cy = cy;
    const auto loc = localize(v, field, zeta, cx, cy, cfg.rho, cfg.h_local);
    const auto seq = dyadic_iteration(loc, cfg.iteration);
    est.levels = seq.levels;
    est.delta = seq.delta;
    est.delta_bar = seq.rescale.delta_bar;
    est.partial = seq.truncated;
    est.notice = seq.notice;
    est.limit_value = seq.levels.empty() ? std::numeric_limits<double>::quiet_NaN() : seq.limit_value();
    const double reached = cfg.rho * seq.delta * std::pow(4.0, -static_cast<double>(seq.levels.size()));
    if (*std::min_element(cfg.radii.begin(), cfg.radii.end()) < reached) {
        est.partial = true;
        if (est.notice.empty()) est.notice = "iteration stops above the smallest radius";
    }
    const Omega om = Omega::of(field);
    quadrature::Options q;
    q.tol = cfg.quad_tol;
    auto f = [&v](const quadrature::Point2& x) { return v.interpolate(x[0], x[1]); };
    const double a = est.limit_value;
    for (double r : cfg.radii) {
        est.radii.push_back(r);
        est.oscillation.push_back(quadrature::mean_oscillation(f, {cx, cy}, r, q));
        if (std::isfinite(a)) {
            const double dev = quadrature::disc_integral([&](const quadrature::Point2& x) { return std::abs(f(x) - a); },
                                                         {cx, cy}, r, q);
            est.deviation.push_back(dev / (std::numbers::pi * r * r));
        }
        est.sigma.push_back(sigma(om, r));
    }
    double os = 0.0, ss = 0.0, oo = 0.0;
    for (std::size_t i = 0; i < est.radii.size(); ++i) {
        os += est.oscillation[i] * est.sigma[i];
        ss += est.sigma[i] * est.sigma[i];
        oo += est.oscillation[i] * est.oscillation[i];
    }
    est.fitted_C = ss > 0.0 ? os / ss : 0.0;
    double res = 0.0;
    for (std::size_t i = 0; i < est.radii.size(); ++i) res += std::pow(est.oscillation[i] - est.fitted_C * est.sigma[i], 2);
    est.fit_residual = oo > 0.0 ? std::sqrt(res / oo) : 0.0;
    // radii are given largest first
    est.monotone = true;
    for (std::size_t i = 1; i < est.radii.size(); ++i)
        if (est.radii[i] < est.radii[i - 1] && !(est.oscillation[i] < est.oscillation[i - 1])) est.monotone = false;
    est.decay_ratio = est.oscillation.front() > 0.0 ? est.oscillation.back() / est.oscillation.front() : 0.0;
    return est;
}

struct CalibrationRow {
    double beta = 0.0;
    double h = 0.0;
    double t = 0.0;
    double harmonic_bound = 0.0;     // ||h||_{B_t} / ||w||_{B_1}
    double perturbation_bound = 0.0; // ||w - h||_{B_3/4} / (||A - I||_inf ||w|| + ||eta||_inf)
    double interior_estimate = 0.0;  // (sup + grad on B_1/2) / ||h||_{B_3/4}
};

struct Calibration {
    double M = 0.0;
    double harmonic_constant = 0.0;
    std::vector<CalibrationRow> rows;
};

/// Measures the local shell constant M and the harmonic interior constant C(n,p)
/// on Hoelder fields (beta = 1/2, 1) and three meshes.
inline Calibration calibrate(double p = 2.0, const std::vector<int>& meshes = {16, 32, 64},
                             const SolverConfig& solver = {}) {
    Calibration cal;
    for (double beta : {0.5, 1.0})
        for (int m : meshes) {
            const auto field = CoefficientField::holder(beta);
            const auto g = fd::make_disc(1.0, 1.0 / m);
            const auto op = fd::assemble(field, g);
            auto eta = [](double x, double y) {
                const double s = 4.0 * (x * x + y * y);
                return s < 1.0 ? std::pow(1.0 - s, 3) : 0.0;
            };
            auto data = AdjointData::sample(*g, {}, eta, [](double x, double y) { return 1.0 + x - 0.5 * y * y; }, p);
            auto w = solve_adjoint(op, assemble_adjoint_rhs(data, op, field), solver, p);
            const auto shell = shell_select(w.v, p);
            const auto piece = harmonic_replacement(w.v, shell.t, p, solver);
            double amax = 0.0;
            for (int u = 0; u < g->num_unknowns(); ++u) {
                const auto x = g->unknown_position(u);
                const Mat2 a = field(x[0], x[1]);
                amax = std::max(amax, std::hypot(std::hypot(a.a11 - 1.0, a.a12), std::hypot(a.a21, a.a22 - 1.0)));
            }
            CalibrationRow row;
            row.beta = beta;
            row.h = g->h();
            row.t = shell.t;
            const double wn = lp_norm(w.v, p, 1.0);
            row.harmonic_bound = piece.norm / wn;
            row.perturbation_bound = detail::difference_norm(w.v, piece.h, p, 0.75) / (amax * wn + 1.0);
            const double hn = lp_norm(piece.h, p, 0.75);
            row.interior_estimate = detail::sup_grad_half(piece.h) / hn;
            cal.M = std::max({cal.M, row.harmonic_bound, row.perturbation_bound});
            cal.harmonic_constant = std::max(cal.harmonic_constant, row.interior_estimate);
            cal.rows.push_back(row);
        }
    return cal;
}

} // namespace dini::adjoint
