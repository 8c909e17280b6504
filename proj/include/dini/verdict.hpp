#pragma once

// Operational convergence test for a series of positive dyadic increments
// I_k. No finite computation proves divergence, so the verdict comes from the
// shape of the tail:
//   1. every raw ratio I_{k+1}/I_k in the tail <= ratio_max  -> convergent;
//   2. otherwise fit log I_k = a + k log(rho) - s log(k + k0) (k0 scanned)
//      rho > 1 + band -> divergent, rho < 1 - band -> convergent;
//   3. rho within the band: refit with rho = 1 and compare s with 1, as for
//      a p-series.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dini {

enum class Verdict { convergent, divergent, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::convergent: return "convergent";
    case Verdict::divergent: return "divergent";
    default: return "inconclusive";
    }
}

struct TailTest {
    int tail = 10;             // K_tail: number of ratios examined
    double ratio_max = 0.9;    // geometric certification threshold
    double rho_band = 0.005;   // |rho - 1| below this means "no geometric trend"
    double s_convergent = 1.1; // p-series exponent above this is summable
    double s_divergent = 1.05; // ... below this is harmonic-like
};

struct DivergenceVerdict {
    std::vector<double> increments;     // I_k (may be +inf if it overflows)
    std::vector<double> log_increments; // log I_k, -inf for zero increments
    int first_level = 0;                // k of increments[0]
    double fitted_ratio = 0.0;          // rho of the tail fit
    double fitted_exponent = 0.0;       // s of the tail fit
    Verdict verdict = Verdict::inconclusive;
    double total() const {
        double t = 0.0;
        for (double v : increments) t += v;
        return t;
    }
};

namespace detail {

// Least squares for y ~ X c with up to 3 columns; returns SSE, fills coef.
inline double least_squares(const std::vector<std::array<double, 3>>& rows, const std::vector<double>& y,
                            int ncol, std::array<double, 3>& coef) {
    double m[3][4] = {};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int i = 0; i < ncol; ++i) {
            for (int j = 0; j < ncol; ++j) m[i][j] += rows[r][i] * rows[r][j];
            m[i][3] += rows[r][i] * y[r];
        }
    }
    for (int c = 0; c < ncol; ++c) {
        int piv = c;
        for (int r = c + 1; r < ncol; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        for (int j = 0; j < 4; ++j) std::swap(m[c][j], m[piv][j]);
        if (std::abs(m[c][c]) < 1e-300) return std::numeric_limits<double>::infinity();
        for (int r = 0; r < ncol; ++r) {
            if (r == c) continue;
            const double f = m[r][c] / m[c][c];
            for (int j = c; j < 4; ++j) m[r][j] -= f * m[c][j];
        }
    }
    coef = {0.0, 0.0, 0.0};
    for (int i = 0; i < ncol; ++i) coef[i] = m[i][3] / m[i][i];
    double sse = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double pred = 0.0;
        for (int i = 0; i < ncol; ++i) pred += coef[i] * rows[r][i];
        sse += (y[r] - pred) * (y[r] - pred);
    }
    return sse;
}

struct TailFit {
    double log_rho = 0.0;
    double s = 0.0;
    double sse = std::numeric_limits<double>::infinity();
};

// Fits y_k = a + b*(k - kc) - s*log(k + k0); with_trend=false pins b = 0.
inline TailFit fit_tail(const std::vector<double>& ks, const std::vector<double>& y, bool with_trend) {
    TailFit best;
    double kc = 0.0;
    for (double k : ks) kc += k;
    kc /= static_cast<double>(ks.size());
    const int ncol = with_trend ? 3 : 2;
    std::vector<std::array<double, 3>> rows(ks.size());
    std::array<double, 3> coef{};
    // pure-geometric model (s = 0) competes with the scanned k0 values
    if (with_trend) {
        for (std::size_t i = 0; i < ks.size(); ++i) rows[i] = {1.0, ks[i] - kc, 0.0};
        const double sse = least_squares(rows, y, 2, coef);
        best = {coef[1], 0.0, sse};
    }
    for (int j = 0; j <= 160; ++j) {
        const double k0 = 0.25 * std::pow(10.0, j * 4.0 / 160.0) - std::min(0.0, ks.front()) ;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const double lg = -std::log(ks[i] + k0);
            rows[i] = with_trend ? std::array<double, 3>{1.0, ks[i] - kc, lg} : std::array<double, 3>{1.0, lg, 0.0};
        }
        const double sse = least_squares(rows, y, ncol, coef);
        // strict improvement keeps the simpler model on ties
        if (sse < best.sse * (1.0 - 1e-9)) {
            best.sse = sse;
            best.log_rho = with_trend ? coef[1] : 0.0;
            best.s = with_trend ? coef[2] : coef[1];
        }
    }
    return best;
}

} // namespace detail

/// Classifies the increments whose logarithms are given (level k of entry i is
/// first_level + i). Zero increments are passed as -inf.
inline DivergenceVerdict classify_log_increments(std::vector<double> log_inc, int first_level,
                                                 const TailTest& test = {}) {
    DivergenceVerdict out;
    out.first_level = first_level;
    out.log_increments = log_inc;
    out.increments.reserve(log_inc.size());
    for (double l : log_inc) out.increments.push_back(std::exp(l));

    const int n = static_cast<int>(log_inc.size());
    const int window = std::min(n, test.tail + 1);
    if (window < 2) return out;
    const int start = n - window;

    int zeros = 0;
    for (int i = start; i < n; ++i)
        if (std::isinf(log_inc[i]) && log_inc[i] < 0) ++zeros;
    if (zeros > 0) {
        // the tail reaches exact zeros: finitely supported series
        out.verdict = Verdict::convergent;
        out.fitted_ratio = 0.0;
        return out;
    }

    bool all_small = true;
    double mean_diff = 0.0;
    for (int i = start; i + 1 < n; ++i) {
        const double d = log_inc[i + 1] - log_inc[i];
        mean_diff += d;
        if (d > std::log(test.ratio_max)) all_small = false;
    }
    mean_diff /= static_cast<double>(window - 1);
    out.fitted_ratio = std::exp(mean_diff);
    if (all_small) {
        out.verdict = Verdict::convergent;
        return out;
    }
    if (window < 5) {
        out.verdict = mean_diff > 0.0 ? Verdict::divergent : Verdict::inconclusive;
        return out;
    }

    std::vector<double> ks, ys;
    for (int i = start; i < n; ++i) {
        ks.push_back(static_cast<double>(first_level + i));
        ys.push_back(log_inc[i]);
    }
    const auto full = detail::fit_tail(ks, ys, true);
    out.fitted_ratio = std::exp(full.log_rho);
    out.fitted_exponent = full.s;
    if (full.log_rho > std::log1p(test.rho_band)) {
        out.verdict = Verdict::divergent;
        return out;
    }
    if (full.log_rho < std::log1p(-test.rho_band)) {
        out.verdict = Verdict::convergent;
        return out;
    }
    const auto flat = detail::fit_tail(ks, ys, false);
    out.fitted_exponent = flat.s;
    out.fitted_ratio = 1.0;
    if (flat.s >= test.s_convergent) out.verdict = Verdict::convergent;
    else if (flat.s <= test.s_divergent) out.verdict = Verdict::divergent;
    else out.verdict = Verdict::inconclusive;
    return out;
}

/// Same as classify_log_increments for plain nonnegative increments.
inline DivergenceVerdict classify_increments(const std::vector<double>& inc, int first_level,
                                             const TailTest& test = {}) {
    std::vector<double> logs;
    logs.reserve(inc.size());
    for (double v : inc) logs.push_back(v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity());
    auto out = classify_log_increments(std::move(logs), first_level, test);
    out.increments = inc;
    return out;
}

} // namespace dini
