#pragma once

// Globally adaptive 15-point Gauss-Kronrod quadrature on finite intervals,
// plus a semi-infinite variant through x = a + v/(1-v).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "dini/error.hpp"

namespace dini::gk {

struct Options {
    double abs_tol = 0.0;
    double rel_tol = 1e-10;
    int max_panels = 2000;
    bool throw_on_failure = true;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kKronrod = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
inline constexpr std::array<double, 4> kGauss = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
};

template <class F>
Panel kronrod15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(c);
    double kron = fc * kKronrod[7];
    double gauss = fc * kGauss[3];
    double mean_abs = std::abs(fc) * kKronrod[7];
    std::array<double, 7> f1{}, f2{};
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kNodes[j];
        f1[j] = f(c - dx);
        f2[j] = f(c + dx);
        kron += kKronrod[j] * (f1[j] + f2[j]);
        mean_abs += kKronrod[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1) gauss += kGauss[j / 2] * (f1[j] + f2[j]);
    }
    const double mean = 0.5 * kron;
    double asc = kKronrod[7] * std::abs(fc - mean);
    for (int j = 0; j < 7; ++j)
        asc += kKronrod[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
    asc *= std::abs(half);
    double err = std::abs((kron - gauss) * half);
    if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
    const double round = 50.0 * std::numeric_limits<double>::epsilon() * std::abs(half) * mean_abs;
    if (round > std::numeric_limits<double>::min()) err = std::max(err, round);
    return {a, b, kron * half, err};
}

} // namespace detail

/// Integrates f over [a, b]. Panels are bisected largest-error first; the
/// final sum runs in left-to-right order so results are reproducible.
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
    Result out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    std::vector<detail::Panel> panels;
    panels.reserve(64);
    panels.push_back(detail::kronrod15(f, a, b));
    out.evaluations = 15;
    auto by_error = [](const detail::Panel& l, const detail::Panel& r) { return l.error < r.error; };

    auto totals = [&panels]() {
        double v = 0.0, e = 0.0;
        for (const auto& p : panels) {
            v += p.value;
            e += p.error;
        }
        return std::pair{v, e};
    };

    auto [value, error] = totals();
    while (error > std::max(opt.abs_tol, opt.rel_tol * std::abs(value))) {
        if (static_cast<int>(panels.size()) >= opt.max_panels) break;
        std::pop_heap(panels.begin(), panels.end(), by_error);
        const detail::Panel worst = panels.back();
        panels.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= std::min(worst.a, worst.b) || mid >= std::max(worst.a, worst.b)) {
            panels.push_back(worst);
            std::push_heap(panels.begin(), panels.end(), by_error);
            break;
        }
        const auto left = detail::kronrod15(f, worst.a, mid);
        const auto right = detail::kronrod15(f, mid, worst.b);
        panels.push_back(left);
        std::push_heap(panels.begin(), panels.end(), by_error);
        panels.push_back(right);
        std::push_heap(panels.begin(), panels.end(), by_error);
        out.evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        if (panels.size() % 64 == 0) std::tie(value, error) = totals();
    }

    std::sort(panels.begin(), panels.end(),
              [](const detail::Panel& l, const detail::Panel& r) { return l.a < r.a; });
    std::tie(value, error) = totals();
    out.value = value;
    out.error = error;
    out.converged = error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(value));
    if (!out.converged && opt.throw_on_failure)
        throw AccuracyError("adaptive quadrature did not reach tolerance", error);
    return out;
}

/// Integrates f over [a, +inf) via x = a + v/(1-v), v in [0, 1).
template <class F>
Result integrate_to_infinity(F&& f, double a, const Options& opt = {}) {
    auto g = [&f, a](double v) {
        const double w = 1.0 - v;
        if (w <= 0.0) return 0.0;
        const double x = a + v / w;
        const double y = f(x);
        return y == 0.0 ? 0.0 : y / (w * w);
    };
    return integrate(g, 0.0, 1.0, opt);
}

} // namespace dini::gk
