#pragma once

// Polar quadrature on discs and annuli in the plane. The radial direction is
// integrated by adaptive Gauss-Kronrod in s = log r (so r^{-a} singularities at
// the center become smooth exponentials); the angle by the periodic trapezoid
// rule, doubled until two successive rules agree.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "dini/error.hpp"
#include "dini/gauss_kronrod.hpp"
#include "dini/grid.hpp"
#include "dini/verdict.hpp"

namespace dini::quadrature {

using Point2 = std::array<double, 2>;
using Field2 = std::function<double(const Point2&)>;

struct Options {
    double tol = 1e-10;
    int min_angular = 32;
    int max_angular = 512;
    int max_panels = 4000;
};

struct AnnulusPartition {
    std::vector<double> radii; // r_0 > r_1 > ... ; annulus k is (radii[k+1], radii[k])

    static AnnulusPartition dyadic(int first_level, int last_level) {
        if (last_level < first_level) throw PreconditionError("dyadic partition needs last_level >= first_level");
        AnnulusPartition p;
        for (int k = first_level; k <= last_level + 1; ++k) p.radii.push_back(std::ldexp(1.0, -k));
        return p;
    }
    int size() const { return static_cast<int>(radii.size()) - 1; }
    double outer(int k) const { return radii[k]; }
    double inner(int k) const { return radii[k + 1]; }
};

namespace detail {

template <class G>
double angular_trapezoid(G& g, const Point2& c, double r, const Options& opt) {
    auto sweep = [&](int m, int stride_from, double& abs_sum) {
        double s = 0.0;
        for (int j = stride_from; j < m; j += (stride_from == 0 ? 1 : 2)) {
            const double phi = 2.0 * std::numbers::pi * j / m;
            const double v = g(Point2{c[0] + r * std::cos(phi), c[1] + r * std::sin(phi)});
            s += v;
            abs_sum += std::abs(v);
        }
        return s;
    };
    int m = opt.min_angular;
    double abs_sum = 0.0;
    double sum = sweep(m, 0, abs_sum);
    double prev = 2.0 * std::numbers::pi * sum / m;
    while (true) {
        const int m2 = 2 * m;
        sum += sweep(m2, 1, abs_sum);
        const double cur = 2.0 * std::numbers::pi * sum / m2;
        const double scale = 2.0 * std::numbers::pi * abs_sum / m2;
        const double diff = std::abs(cur - prev);
        if (diff <= 0.1 * opt.tol * std::max(std::abs(cur), scale)) return cur;
        if (m2 >= opt.max_angular) {
            // kinks in the angle (|f|, |f - avg|): adaptive Gauss-Kronrod instead
            auto ring = [&](double phi) { return g(Point2{c[0] + r * std::cos(phi), c[1] + r * std::sin(phi)}); };
            gk::Options o;
            o.rel_tol = 0.1 * opt.tol;
            o.abs_tol = 0.1 * opt.tol * scale;
            o.max_panels = opt.max_panels;
            return gk::integrate(ring, 0.0, 2.0 * std::numbers::pi, o).value;
        }
        prev = cur;
        m = m2;
    }
}

inline gk::Options radial_options(const Options& opt) {
    gk::Options g;
    g.rel_tol = opt.tol;
    g.max_panels = opt.max_panels;
    return g;
}

} // namespace detail

/// Integral of g over r_in < |x - c| < r_out. r_in = 0 gives the disc.
template <class G>
double annulus_integral(G&& g, const Point2& c, double r_in, double r_out, const Options& opt = {}) {
    if (!(r_in >= 0.0) || !(r_out > r_in)) throw DomainError("annulus_integral: need 0 <= r_in < r_out");
    const double so = std::log(r_out);
    auto radial_of = [&](auto& fn, const Options& o) {
        return [&fn, &c, o](double s) {
            const double r = std::exp(s);
            if (r < 1e-150) return 0.0;
            return r * r * detail::angular_trapezoid(fn, c, r, o);
        };
    };
    auto run = [&](auto&& radial, const gk::Options& go) {
        if (r_in == 0.0) {
            // s = so - v, v in [0, inf)
            auto h = [&](double v) { return radial(so - v); };
            return gk::integrate_to_infinity(h, 0.0, go);
        }
        return gk::integrate(radial, std::log(r_in), so, go);
    };
    auto go = detail::radial_options(opt);
    go.throw_on_failure = false;
    const auto res = run(radial_of(g, opt), go);
    if (res.converged) return res.value;
    // cancellation: measure the error against the integral of |g|
    auto absg = [&g](const Point2& x) { return std::abs(g(x)); };
    Options loose = opt;
    loose.tol = 1e-4;
    auto la = detail::radial_options(loose);
    la.throw_on_failure = false;
    const double scale = run(radial_of(absg, loose), la).value;
    if (res.error <= opt.tol * scale) return res.value;
    throw AccuracyError("polar quadrature did not reach tolerance", res.error / std::max(scale, 1e-300));
}

template <class G>
double disc_integral(G&& g, const Point2& c, double r, const Options& opt = {}) {
    return annulus_integral(std::forward<G>(g), c, 0.0, r, opt);
}

/// (int_{r_in<|x|<r_out} |f|^p dx)^{1/p}, centered at the origin.
template <class F>
double annulus_lp(F&& f, double p, double r_in, double r_out, const Options& opt = {}) {
    if (p < 1.0) throw PreconditionError("annulus_lp: p must be >= 1");
    if (!(r_in > 0.0) || !(r_out > r_in) || r_out > 1.0) throw DomainError("annulus_lp: need 0 < r_in < r_out <= 1");
    auto g = [&](const Point2& x) { return std::pow(std::abs(f(x)), p); };
    return std::pow(annulus_integral(g, Point2{0.0, 0.0}, r_in, r_out, opt), 1.0 / p);
}

/// Surface measure of the unit sphere in R^n.
inline double sphere_area(int n) { return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n); }

/// int_{r_in<|x|<r_out} |f(|x|)|^p dx in R^n for a radial profile f.
template <class F>
double radial_lp_power(F&& f, double p, double r_in, double r_out, int n, const Options& opt = {}) {
    if (!(r_in > 0.0) || !(r_out > r_in)) throw DomainError("radial_lp_power: need 0 < r_in < r_out");
    auto g = [&](double s) {
        const double r = std::exp(s);
        return std::pow(r, n) * std::pow(std::abs(f(r)), p);
    };
    return sphere_area(n) * gk::integrate(g, std::log(r_in), std::log(r_out), detail::radial_options(opt)).value;
}

struct ProbeOptions {
    Options quad{1e-9};
    TailTest tail{};
    int first_level = 0;
};

/// Increments int over annulus (2^{-k-1}, 2^{-k}) of |f|^p for k = first..K.
template <class F>
DivergenceVerdict lp_divergence_probe(F&& f, double p, int K_levels, const ProbeOptions& opt = {}) {
    if (p < 1.0) throw PreconditionError("lp_divergence_probe: p must be >= 1");
    if (K_levels < 10) throw PreconditionError("lp_divergence_probe: need at least 10 levels");
    const auto part = AnnulusPartition::dyadic(opt.first_level, K_levels);
    auto g = [&](const Point2& x) { return std::pow(std::abs(f(x)), p); };
    std::vector<double> inc;
    for (int k = 0; k < part.size(); ++k)
        inc.push_back(annulus_integral(g, Point2{0.0, 0.0}, part.inner(k), part.outer(k), opt.quad));
    return classify_increments(inc, opt.first_level, opt.tail);
}

/// |B_r|^{-1} int_{B_r(c)} |f - avg|.
template <class F>
double mean_oscillation(F&& f, const Point2& c, double r, const Options& opt = {}) {
    if (!(r > 0.0)) throw DomainError("mean_oscillation: radius must be positive");
    if (std::hypot(c[0], c[1]) + r > 1.0 + 1e-14) throw DomainError("mean_oscillation: ball leaves the unit disc");
    const double area = std::numbers::pi * r * r;
    const double avg = disc_integral(f, c, r, opt) / area;
    auto dev = [&](const Point2& x) { return std::abs(f(x) - avg); };
    return disc_integral(dev, c, r, opt) / area;
}

struct BMOProbe {
    std::vector<int> levels;
    std::vector<double> radii;
    std::vector<double> values;
    double slope_per_level = 0.0; // d value / dk with r = 2^{-k}
    double growth_slope = 0.0;    // d value / d log(1/r)
};

inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

template <class F>
BMOProbe bmo_probe(F&& f, const Point2& c, const std::vector<int>& levels, const Options& opt = {1e-8}) {
    BMOProbe out;
    out.levels = levels;
    std::vector<double> ks;
    for (int k : levels) {
        const double r = std::ldexp(1.0, -k);
        out.radii.push_back(r);
        out.values.push_back(mean_oscillation(f, c, r, opt));
        ks.push_back(k);
    }
    out.slope_per_level = fit_slope(ks, out.values);
    out.growth_slope = out.slope_per_level / std::numbers::ln2;
    return out;
}

/// Dyadic increments of int e^{N|f - c|} over annuli (2^{-k-1}, 2^{-k}),
/// k = first..K, handled in log space.
template <class F>
DivergenceVerdict exp_integral_probe(F&& f, double N, double c, int K_levels, const ProbeOptions& opt = {}) {
    if (!(N > 0.0)) throw PreconditionError("exp_integral_probe: N must be positive");
    const auto part = AnnulusPartition::dyadic(opt.first_level, K_levels);
    auto expo = [&](const Point2& x) { return N * std::abs(f(x) - c); };
    std::vector<double> logs;
    for (int k = 0; k < part.size(); ++k) {
        const double a = part.inner(k), b = part.outer(k);
        double shift = -std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 64; ++i) {
            const double r = a * std::pow(b / a, i / 64.0);
            for (int j = 0; j < 64; ++j) {
                const double phi = 2.0 * std::numbers::pi * j / 64.0;
                shift = std::max(shift, expo(Point2{r * std::cos(phi), r * std::sin(phi)}));
            }
        }
        auto g = [&](const Point2& x) { return std::exp(expo(x) - shift); };
        const double v = annulus_integral(g, Point2{0.0, 0.0}, a, b, opt.quad);
        logs.push_back(std::log(v) + shift);
    }
    return classify_log_increments(std::move(logs), opt.first_level, opt.tail);
}

struct Region {
    double cx = 0.0, cy = 0.0, radius = 0.5;
    double exclude_radius = 0.0; // nodes with |x| < exclude_radius are skipped
};

/// (sum over nodes in the region of h^2 (|u|^p + |grad_h u|^p + |D_h^2 u|^p))^{1/p}
/// with centered differences and the Frobenius norm of the Hessian.
inline double discrete_w2p(const fd::GridFunction& u, double p, const Region& region) {
    if (p < 1.0) throw PreconditionError("discrete_w2p: p must be >= 1");
    const fd::Grid2D& g = *u.grid;
    const double h = g.h();
    const double reach = region.radius + 2.0 * h * std::numbers::sqrt2;
    const bool inside = g.domain() == fd::DomainKind::disc
                            ? std::hypot(region.cx, region.cy) + reach <= g.radius()
                            : std::max(std::abs(region.cx), std::abs(region.cy)) + reach <= 1.0;
    if (!inside) throw DomainError("discrete_w2p: region must stay two cells inside the grid");
    double sum = 0.0;
    for (int k = 0; k < g.num_unknowns(); ++k) {
        const auto x = g.unknown_position(k);
        if (std::hypot(x[0] - region.cx, x[1] - region.cy) > region.radius) continue;
        if (std::hypot(x[0], x[1]) < region.exclude_radius) continue;
        const int n = g.node_of_unknown(k);
        const int i = g.node_i(n), j = g.node_j(n);
        double v[3][3];
        for (int b = -1; b <= 1; ++b)
            for (int a = -1; a <= 1; ++a)
                if (!u.node_value(i + a, j + b, v[b + 1][a + 1]))
                    throw DomainError("discrete_w2p: stencil leaves the grid");
        const double ux = (v[1][2] - v[1][0]) / (2.0 * h), uy = (v[2][1] - v[0][1]) / (2.0 * h);
        const double uxx = (v[1][2] - 2.0 * v[1][1] + v[1][0]) / (h * h);
        const double uyy = (v[2][1] - 2.0 * v[1][1] + v[0][1]) / (h * h);
        const double uxy = (v[2][2] - v[2][0] - v[0][2] + v[0][0]) / (4.0 * h * h);
        sum += h * h *
               (std::pow(std::abs(v[1][1]), p) + std::pow(std::hypot(ux, uy), p) +
                std::pow(std::sqrt(uxx * uxx + 2.0 * uxy * uxy + uyy * uyy), p));
    }
    return std::pow(sum, 1.0 / p);
}

} // namespace dini::quadrature
