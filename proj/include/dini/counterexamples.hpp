#pragma once

// The two radial-perturbation counterexamples: A(x) = I + alpha(r) x/r (x) x/r
// with either the radial W^{2,1} solution (no W^{2,p}, p > 1) or
// u = x1 x2 (log R/r)^2 (second derivatives outside BMO).
// log R is stored instead of R; the constructions need R far beyond double range
// in higher dimensions.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "dini/error.hpp"
#include "dini/gauss_kronrod.hpp"

namespace dini::counterexamples {

template <int N>
using Point = std::array<double, N>;
template <int N>
using Matrix = std::array<std::array<double, N>, N>;

template <int N>
double norm(const Point<N>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

/// log(R/r)
inline double log_ratio(double logR, double r) { return logR - std::log(r); }

struct W21Params {
    double gamma = 2.0;
    double logR = 10.0;
    int dim = 2;

    void validate() const {
        if (dim < 2) throw PreconditionError("W21 construction needs dimension >= 2");
        if (!(gamma > 1.0)) throw PreconditionError("W21 construction needs gamma > 1");
        if (!(logR > 0.0)) throw PreconditionError("W21 construction needs log R > 0");
        if (!((dim - 1) * logR > gamma))
            throw EllipticityError("W21 construction needs (n-1) log R > gamma");
    }
};

struct RadialDerivs {
    double u = 0.0;
    double du = 0.0;
    double d2u = 0.0;
};

/// u'(r) and u''(r) only (u left at 0).
inline RadialDerivs w21_slopes(const W21Params& p, double r) {
    p.validate();
    if (!(r > 0.0) || r > 1.0) throw DomainError("w21_derivs needs 0 < r <= 1");
    const int n = p.dim;
    const double L = log_ratio(p.logR, r);
    RadialDerivs d;
    d.du = -std::pow(r, 1 - n) * std::pow(L, -p.gamma);
    d.d2u = std::pow(r, -n) * std::pow(L, -p.gamma) * ((n - 1) - p.gamma / L);
    return d;
}

/// u(r) = int_r^1 t^{1-n} (log R/t)^{-gamma} dt and its first two derivatives.
inline RadialDerivs w21_derivs(const W21Params& p, double r, double rel_tol = 1e-12) {
    RadialDerivs d = w21_slopes(p, r);
    const int n = p.dim;
    const double vmax = -std::log(r);
    if (vmax > 0.0) {
        // t = e^{-v}
        auto f = [&](double v) { return std::exp(v * (n - 2)) * std::pow(p.logR + v, -p.gamma); };
        gk::Options q;
        q.rel_tol = rel_tol;
        q.abs_tol = 1e-300;
        d.u = gk::integrate(f, 0.0, vmax, q).value;
    }
    return d;
}

/// alpha(r) = gamma / ((n-1) log(R/r) - gamma); alpha(0) = 0.
inline double w21_alpha(const W21Params& p, double r) {
    if (r < 0.0) throw DomainError("alpha needs r >= 0");
    if (r == 0.0) return 0.0;
    const double den = (p.dim - 1) * log_ratio(p.logR, r) - p.gamma;
    if (!(den > 0.0)) throw EllipticityError("W21 alpha denominator is not positive");
    return p.gamma / den;
}

/// Frobenius norm of D^2 u for a radial function: eigenvalues u'' and u'/r
/// (multiplicity n-1).
inline double radial_hessian_norm(const RadialDerivs& d, double r, int dim) {
    const double t = d.du / r;
    return std::sqrt(d.d2u * d.d2u + (dim - 1) * t * t);
}

/// D^2 u = u'' x^ x^T + (u'/r)(I - x^ x^T)
template <int N>
Matrix<N> radial_hessian(const RadialDerivs& d, const Point<N>& x) {
    const double r = norm<N>(x);
    Matrix<N> h{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double xx = x[i] * x[j] / (r * r);
            h[i][j] = d.d2u * xx + (d.du / r) * ((i == j ? 1.0 : 0.0) - xx);
        }
    return h;
}

struct BMOParams {
    double logR = 4.0;
    int dim = 2;

    void validate() const {
        if (dim < 2) throw PreconditionError("BMO construction needs dimension >= 2");
        // L^2 - 3L + 1 > 0 for every L >= log R once log R exceeds the larger root
        if (!(logR > 0.5 * (3.0 + std::sqrt(5.0))))
            throw EllipticityError("BMO construction needs (log R)^2 - 3 log R + 1 > 0 on (0,1]");
    }
};

/// alpha(r) = ((2+n)L - 1)/(L^2 - 3L + 1), L = log(R/r); alpha(0) = 0.
inline double bmo_alpha(const BMOParams& p, double r) {
    if (r < 0.0) throw DomainError("alpha needs r >= 0");
    if (r == 0.0) return 0.0;
    const double L = log_ratio(p.logR, r);
    const double den = L * L - 3.0 * L + 1.0;
    if (!(den > 0.0)) throw EllipticityError("BMO alpha denominator is not positive");
    return ((2.0 + p.dim) * L - 1.0) / den;
}

template <int N>
struct FieldEval {
    double u = 0.0;
    Point<N> grad{};
    Matrix<N> hess{};
};

/// u(x) = x1 x2 phi(r), phi = (log R/r)^2, with exact gradient and Hessian:
/// H_ij = e_ij phi + (g_i x_j + g_j x_i) phi'/r
///        + x1 x2 [phi'' x_i x_j / r^2 + phi' (delta_ij / r - x_i x_j / r^3)],
/// g = grad(x1 x2), e_ij = 1 iff {i,j} = {1,2}.
template <int N>
FieldEval<N> bmo_solution(const BMOParams& p, const Point<N>& x) {
    static_assert(N >= 2);
    if (p.dim != N) throw PreconditionError("BMOParams.dim does not match the point dimension");
    const double r = norm<N>(x);
    if (r == 0.0) throw DomainError("bmo_solution is singular at x = 0");
    if (r > 1.0 + 1e-12) throw DomainError("bmo_solution needs |x| <= 1");
    const double L = log_ratio(p.logR, r);
    const double phi = L * L;
    // r dphi and r^2 d2phi, so the Hessian is assembled from unit vectors
    const double r_dphi = -2.0 * L;
    const double r2_d2phi = 2.0 + 2.0 * L;
    const double m = x[0] * x[1];
    Point<N> xh{};
    for (int i = 0; i < N; ++i) xh[i] = x[i] / r;
    const double mh = xh[0] * xh[1];
    Point<N> gh{};
    gh[0] = xh[1];
    gh[1] = xh[0];

    FieldEval<N> out;
    out.u = m * phi;
    for (int i = 0; i < N; ++i) out.grad[i] = (i == 0 ? x[1] : i == 1 ? x[0] : 0.0) * phi + mh * r_dphi * x[i];
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double e = ((i == 0 && j == 1) || (i == 1 && j == 0)) ? 1.0 : 0.0;
            const double xx = xh[i] * xh[j];
            out.hess[i][j] = e * phi + (gh[i] * xh[j] + gh[j] * xh[i]) * r_dphi +
                             mh * (r2_d2phi * xx + r_dphi * ((i == j ? 1.0 : 0.0) - xx));
        }
    return out;
}

/// I + alpha(r) x/r (x) x/r with bounds measured over [0,1].
class RadialCoefficientField {
public:
    RadialCoefficientField(std::function<double(double)> alpha, int dim, int samples = 4000)
        : alpha_(std::move(alpha)), dim_(dim) {
        if (dim < 2) throw PreconditionError("coefficient field needs dimension >= 2");
        double lo = 0.0, hi = 0.0;
        auto visit = [&](double r) {
            const double a = alpha_(r);
            if (!std::isfinite(a)) throw EllipticityError("alpha is not finite on [0,1]");
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        };
        visit(0.0);
        for (int i = 0; i < samples; ++i) visit(std::pow(1e-14, 1.0 - i / (samples - 1.0)));
        for (int i = 1; i <= samples; ++i) visit(static_cast<double>(i) / samples);
        lambda_min_ = std::min(1.0, 1.0 + lo);
        lambda_max_ = std::max(1.0, 1.0 + hi);
        if (!(lambda_min_ > 0.0)) throw EllipticityError("1 + alpha must stay positive");
    }

    int dim() const noexcept { return dim_; }
    double lambda_min() const noexcept { return lambda_min_; }
    double lambda_max() const noexcept { return lambda_max_; }
    double alpha(double r) const { return alpha_(r); }

    template <int N>
    Matrix<N> matrix(const Point<N>& x) const {
        const double r = norm<N>(x);
        const double a = r == 0.0 ? 0.0 : alpha_(r);
        Matrix<N> A{};
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                A[i][j] = (i == j ? 1.0 : 0.0) + (r == 0.0 ? 0.0 : a * x[i] * x[j] / (r * r));
        return A;
    }

private:
    std::function<double(double)> alpha_;
    int dim_;
    double lambda_min_ = 1.0;
    double lambda_max_ = 1.0;
};

inline RadialCoefficientField coefficient_field(std::function<double(double)> alpha, int dim) {
    return RadialCoefficientField(std::move(alpha), dim);
}

/// tr(A(x) H)
template <int N>
double apply_operator(const RadialCoefficientField& field, const Matrix<N>& hessian, const Point<N>& x) {
    const auto A = field.template matrix<N>(x);
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) s += A[i][j] * hessian[i][j];
    return s;
}

struct LogRSearch {
    double logR = 0.0;
    double min_margin = 0.0; // min over samples of d12 u - (1/2) L^2
};

/// Smallest log R on a grid (start, start+step, ...) for which the BMO
/// construction is elliptic and d12 u >= (1/2)(log R/r)^2 at every sample of
/// the closed unit disc (plane x3.. = 0).
template <int N = 2>
LogRSearch find_bmo_logR(double start = 2.75, double step = 0.25, int max_steps = 200) {
    std::vector<Point<N>> pts;
    for (int i = 0; i < 120; ++i) {
        const double r = std::pow(1e-6, 1.0 - i / 119.0);
        for (int a = 0; a < 64; ++a) {
            const double th = 2.0 * M_PI * a / 64.0;
            Point<N> x{};
            x[0] = r * std::cos(th);
            x[1] = r * std::sin(th);
            pts.push_back(x);
        }
    }
    for (int s = 0; s < max_steps; ++s) {
        BMOParams p{start + s * step, N};
        try {
            p.validate();
        } catch (const EllipticityError&) {
            continue;
        }
        double margin = INFINITY;
        for (const auto& x : pts) {
            const double L = log_ratio(p.logR, norm<N>(x));
            margin = std::min(margin, bmo_solution<N>(p, x).hess[0][1] - 0.5 * L * L);
        }
        if (margin >= 0.0) return {p.logR, margin};
    }
    throw PreconditionError("no admissible log R found in the search range");
}

/// sup over sampled pairs of |alpha(r) - alpha(s)| (1 + |log|r - s||).
inline double log_modulus_constant(const std::function<double(double)>& alpha, int samples = 300) {
    std::vector<double> rs{0.0};
    for (int i = 0; i < samples; ++i) rs.push_back(std::pow(1e-12, 1.0 - i / (samples - 1.0)));
    double sup = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i)
        for (std::size_t j = i + 1; j < rs.size(); ++j) {
            const double d = std::abs(rs[i] - rs[j]);
            if (d == 0.0) continue;
            sup = std::max(sup, std::abs(alpha(rs[i]) - alpha(rs[j])) * (1.0 + std::abs(std::log(d))));
        }
    return sup;
}

} // namespace dini::counterexamples
