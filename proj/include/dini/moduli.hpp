#pragma once

// Moduli of continuity: evaluation, the Dini integral test, the doubling
// check, the regularization t * sup_{[t,1]} theta(tau)/tau, and the derived
// moduli omega(t) = t^2 + theta(t) and sigma used by the dyadic iteration.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dini/error.hpp"
#include "dini/gauss_kronrod.hpp"
#include "dini/verdict.hpp"

namespace dini::moduli {

enum class Kind { power, log_inverse, log_power, tabulated };

inline const char* to_string(Kind k) {
    switch (k) {
    case Kind::power: return "power";
    case Kind::log_inverse: return "log_inverse";
    case Kind::log_power: return "log_power";
    default: return "tabulated";
    }
}

/// A modulus of continuity theta on [0, domain_upper] with theta(0) = 0.
class ModulusSpec {
public:
    /// theta(t) = t^beta
    static ModulusSpec power(double beta) {
        if (!(beta > 0.0)) throw PreconditionError("power modulus needs beta > 0");
        return ModulusSpec(Kind::power, beta);
    }
    /// theta(t) = c / (1 + |log t|)
    static ModulusSpec log_inverse(double c) {
        if (!(c > 0.0)) throw PreconditionError("log_inverse modulus needs c > 0");
        return ModulusSpec(Kind::log_inverse, c);
    }
    /// theta(t) = (log(e/t))^{-gamma}
    static ModulusSpec log_power(double gamma) {
        if (!(gamma > 0.0)) throw PreconditionError("log_power modulus needs gamma > 0");
        return ModulusSpec(Kind::log_power, gamma);
    }
    /// Piecewise-linear through (0,0) and the given samples; the last knot
    /// becomes domain_upper. Decreasing tables are rejected.
    static ModulusSpec tabulated(std::vector<double> t, std::vector<double> theta) {
        if (t.size() != theta.size() || t.empty())
            throw PreconditionError("tabulated modulus needs matching, nonempty t/theta arrays");
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!(t[i] > 0.0) || !(theta[i] >= 0.0) || !std::isfinite(theta[i]))
                throw PreconditionError("tabulated modulus needs t > 0 and finite theta >= 0");
            if (i > 0 && !(t[i] > t[i - 1]))
                throw PreconditionError("tabulated modulus knots must be strictly increasing");
            if (i > 0 && theta[i] < theta[i - 1])
                throw PreconditionError("tabulated modulus must be non-decreasing");
        }
        ModulusSpec m(Kind::tabulated, 0.0);
        m.domain_upper_ = t.back();
        m.knots_ = std::move(t);
        m.values_ = std::move(theta);
        return m;
    }

    Kind kind() const noexcept { return kind_; }
    double param() const noexcept { return param_; }
    double domain_upper() const noexcept { return domain_upper_; }
    const std::vector<double>& knots() const noexcept { return knots_; }
    const std::vector<double>& values() const noexcept { return values_; }

    ModulusSpec with_domain_upper(double upper) const {
        if (kind_ == Kind::tabulated) throw PreconditionError("tabulated domain is fixed by its knots");
        if (!(upper > 0.0)) throw PreconditionError("domain_upper must be positive");
        ModulusSpec m = *this;
        m.domain_upper_ = upper;
        return m;
    }

    /// theta(t); throws DomainError outside [0, domain_upper].
    double operator()(double t) const {
        if (!(t >= 0.0) || t > domain_upper_ * (1.0 + 1e-14))
            throw DomainError("modulus evaluated outside [0, domain_upper]");
        if (t == 0.0) return 0.0;
        return eval_positive(t);
    }

    std::string describe() const {
        if (kind_ == Kind::tabulated) return "tabulated(" + std::to_string(knots_.size()) + " knots)";
        return std::string(to_string(kind_)) + "(" + std::to_string(param_) + ")";
    }

private:
    ModulusSpec(Kind k, double p) : kind_(k), param_(p) {}

    double eval_positive(double t) const {
        switch (kind_) {
        case Kind::power: return std::pow(t, param_);
        case Kind::log_inverse: return param_ / (1.0 + std::abs(std::log(t)));
        case Kind::log_power: return std::pow(1.0 - std::log(t), -param_);
        case Kind::tabulated: break;
        }
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        if (it == knots_.end()) return values_.back();
        const std::size_t i = static_cast<std::size_t>(it - knots_.begin());
        const double t0 = i == 0 ? 0.0 : knots_[i - 1];
        const double v0 = i == 0 ? 0.0 : values_[i - 1];
        const double w = (t - t0) / (knots_[i] - t0);
        return v0 + w * (values_[i] - v0);
    }

    Kind kind_;
    double param_;
    double domain_upper_ = 1.0;
    std::vector<double> knots_;
    std::vector<double> values_;
};

inline double eval_modulus(const ModulusSpec& spec, double t) { return spec(t); }

struct DiniOptions {
    double quad_rel_tol = 1e-12;
    TailTest test{};
};

struct DiniResult {
    std::vector<double> partial_sums; // level k covers [2^{-k-1}, 2^{-k}]
    double remainder = 0.0;           // [lower_cut, 2^{-K}] when lower_cut is not dyadic
    double total = 0.0;               // integral over [lower_cut, 1]
    DivergenceVerdict tail;           // fitted ratio / exponent of the increments
    Verdict verdict = Verdict::inconclusive;
};

/// Dyadic partial sums of int theta(t)/t dt down to lower_cut and an
/// operational convergence verdict on their tail.
inline DiniResult dini_integral(const ModulusSpec& spec, double lower_cut, const DiniOptions& opt = {}) {
    if (!(lower_cut > 0.0 && lower_cut < 1.0)) throw DomainError("dini_integral needs lower_cut in (0, 1)");
    if (spec.domain_upper() < 1.0 * (1.0 - 1e-14)) throw DomainError("dini_integral needs domain_upper >= 1");
    const double ln2 = std::log(2.0);
    const int levels = static_cast<int>(std::floor(std::log2(1.0 / lower_cut) + 1e-12));
    // t = e^{-u}: theta(t)/t dt = theta(e^{-u}) du, smooth on each dyadic level
    auto integrand = [&spec](double u) { return spec(std::exp(-u)); };
    gk::Options q;
    q.rel_tol = opt.quad_rel_tol;
    q.abs_tol = 1e-300;

    DiniResult out;
    out.partial_sums.reserve(static_cast<std::size_t>(levels));
    for (int k = 0; k < levels; ++k) {
        const auto r = gk::integrate(integrand, k * ln2, (k + 1) * ln2, q);
        out.partial_sums.push_back(r.value);
    }
    const double u_end = -std::log(lower_cut);
    if (u_end > levels * ln2 * (1.0 + 1e-15))
        out.remainder = gk::integrate(integrand, levels * ln2, u_end, q).value;
    for (double v : out.partial_sums) out.total += v;
    out.total += out.remainder;
    out.tail = classify_increments(out.partial_sums, 0, opt.test);
    out.verdict = out.tail.verdict;
    return out;
}

/// True iff theta(2t) <= 2 theta(t) (1 + tol) at n_samples log-spaced points
/// of (0, 1/2].
inline bool check_doubling(const ModulusSpec& spec, int n_samples, double tol = 1e-12) {
    if (n_samples < 2) throw PreconditionError("check_doubling needs n_samples >= 2");
    const double hi = std::min(0.5, 0.5 * spec.domain_upper());
    const double lo = std::ldexp(1.0, -40);
    for (int i = 0; i < n_samples; ++i) {
        const double t = hi * std::pow(lo / hi, static_cast<double>(i) / (n_samples - 1));
        if (spec(2.0 * t) > 2.0 * spec(t) * (1.0 + tol)) return false;
    }
    return true;
}

/// theta~(t) = t sup_{tau in [t,1]} theta(tau)/tau, tabulated on a log grid.
class RegularizedModulus {
public:
    RegularizedModulus(const ModulusSpec& spec, int points, double lower) : base_(spec) {
        grid_.resize(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i)
            grid_[static_cast<std::size_t>(i)] = lower * std::pow(1.0 / lower, static_cast<double>(i) / (points - 1));
        grid_.back() = 1.0;
        for (double k : spec.knots())
            if (k <= 1.0) grid_.push_back(k);
        std::sort(grid_.begin(), grid_.end());
        grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
        suffix_max_.assign(grid_.size(), 0.0);
        double run = 0.0;
        for (std::size_t i = grid_.size(); i-- > 0;) {
            run = std::max(run, spec(grid_[i]) / grid_[i]);
            suffix_max_[i] = run;
        }
    }

    double operator()(double t) const {
        if (!(t >= 0.0) || t > 1.0 * (1.0 + 1e-14)) throw DomainError("regularized modulus lives on [0, 1]");
        if (t == 0.0) return 0.0;
        double sup = base_(t) / t;
        auto it = std::lower_bound(grid_.begin(), grid_.end(), t);
        if (it != grid_.end()) sup = std::max(sup, suffix_max_[static_cast<std::size_t>(it - grid_.begin())]);
        return t * sup;
    }

    std::size_t grid_size() const noexcept { return grid_.size(); }

private:
    ModulusSpec base_;
    std::vector<double> grid_;
    std::vector<double> suffix_max_;
};

/// Regularizes a Dini modulus. The sup grid doubles until theta~ is stable to
/// tol at 200 probe points.
inline RegularizedModulus regularize(const ModulusSpec& spec, double tol = 1e-10, const DiniOptions& opt = {}) {
    if (dini_integral(spec, std::ldexp(1.0, -40), opt).verdict != Verdict::convergent)
        throw PreconditionError("regularize needs a modulus with a convergent Dini integral");
    const double lower = std::ldexp(1.0, -44);
    std::vector<double> probes;
    for (int i = 0; i < 200; ++i) probes.push_back(std::pow(lower, 1.0 - i / 199.0));
    int points = 257;
    RegularizedModulus current(spec, points, lower);
    for (int round = 0; round < 12; ++round) {
        points = 2 * points - 1;
        RegularizedModulus finer(spec, points, lower);
        double change = 0.0;
        for (double t : probes) {
            const double a = current(t), b = finer(t);
            change = std::max(change, std::abs(a - b) / std::max(std::abs(b), 1e-300));
        }
        current = std::move(finer);
        if (change <= tol) return current;
    }
    return current;
}

/// omega(t) = t^2 + theta(t)
inline double eval_omega(const ModulusSpec& spec, double t) { return t * t + spec(t); }

/// sigma(t) = int_0^t omega(s)/s ds + t int_t^1 omega(s)/s^2 ds + omega(t).
inline double eval_sigma(const ModulusSpec& spec, double t, double quad_tol = 1e-10) {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("sigma is defined for t in (0, 1]");
    gk::Options q;
    q.rel_tol = quad_tol;
    q.abs_tol = 1e-300;
    q.max_panels = 4000;
    const double lt = -std::log(t);
    // s = e^{-u} in both integrals
    const double lower = gk::integrate_to_infinity([&spec](double u) { return spec(std::exp(-u)); }, lt, q).value;
    double upper = 0.0;
    if (lt > 0.0)
        upper = gk::integrate([&spec](double u) { return spec(std::exp(-u)) * std::exp(u); }, 0.0, lt, q).value;
    return 0.5 * t * t + lower + t * ((1.0 - t) + upper) + eval_omega(spec, t);
}

/// Monotone empirical modulus of a profile f on [0,1]:
/// theta(t) = max over sampled r of |f(min(r+t,1)) - f(r)|, as a table.
inline ModulusSpec empirical_modulus(const std::function<double(double)>& f, int samples = 400,
                                     int depth_bits = 44) {
    const double lo = std::ldexp(1.0, -depth_bits);
    std::vector<double> rs{0.0};
    for (int i = 0; i < samples; ++i) rs.push_back(std::pow(lo / 4.0, 1.0 - i / (samples - 1.0)));
    std::vector<double> fr(rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) fr[i] = f(rs[i]);
    std::vector<double> ts, vals;
    double run = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = std::pow(lo, 1.0 - i / (samples - 1.0));
        double m = 0.0;
        for (std::size_t j = 0; j < rs.size(); ++j) m = std::max(m, std::abs(f(std::min(rs[j] + t, 1.0)) - fr[j]));
        run = std::max(run, m);
        ts.push_back(t);
        vals.push_back(run);
    }
    return ModulusSpec::tabulated(std::move(ts), std::move(vals));
}

} // namespace dini::moduli
