#pragma once

// Planar coefficient fields x -> A(x) for tr(A D^2 u).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "dini/counterexamples.hpp"
#include "dini/error.hpp"
#include "dini/moduli.hpp"

namespace dini::fd {

struct Mat2 {
    double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;

    double min_eigenvalue() const {
        const double m = 0.5 * (a11 + a22), d = std::hypot(0.5 * (a11 - a22), 0.5 * (a12 + a21));
        return m - d;
    }
    double max_eigenvalue() const {
        const double m = 0.5 * (a11 + a22), d = std::hypot(0.5 * (a11 - a22), 0.5 * (a12 + a21));
        return m + d;
    }
    bool symmetric(double tol = 1e-13) const {
        return std::abs(a12 - a21) <= tol * std::max({1.0, std::abs(a11), std::abs(a22)});
    }
};

inline Mat2 radial_perturbation(double alpha, double x, double y) {
    const double r2 = x * x + y * y;
    if (r2 == 0.0) return {};
    const double c = alpha / r2;
    return {1.0 + c * x * x, c * x * y, c * x * y, 1.0 + c * y * y};
}

class CoefficientField {
public:
    using Fn = std::function<Mat2(double, double)>;

    CoefficientField(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

    Mat2 operator()(double x, double y) const { return fn_(x, y); }
    const std::string& name() const { return name_; }

    /// Modulus of continuity theta with |A(x) - A(y)| <= constant * theta(|x - y|).
    const std::optional<moduli::ModulusSpec>& modulus() const { return modulus_; }
    double modulus_constant() const { return modulus_constant_; }
    CoefficientField& with_modulus(moduli::ModulusSpec m, double constant) {
        modulus_ = std::move(m);
        modulus_constant_ = constant;
        return *this;
    }

    /// Throws EllipticityError when A(x, y) is not symmetric positive definite.
    Mat2 checked(double x, double y) const {
        const Mat2 a = fn_(x, y);
        if (!std::isfinite(a.a11) || !std::isfinite(a.a12) || !std::isfinite(a.a21) || !std::isfinite(a.a22))
            throw EllipticityError(name_ + ": coefficient is not finite");
        if (!a.symmetric()) throw EllipticityError(name_ + ": coefficient matrix is not symmetric");
        if (!(a.min_eigenvalue() > 0.0)) throw EllipticityError(name_ + ": coefficient matrix is not elliptic");
        return a;
    }

    static CoefficientField identity() {
        CoefficientField f("identity", [](double, double) { return Mat2{}; });
        f.with_modulus(moduli::ModulusSpec::power(1.0), 0.0);
        return f;
    }

    static CoefficientField constant(Mat2 a) {
        CoefficientField f("constant", [a](double, double) { return a; });
        f.with_modulus(moduli::ModulusSpec::power(1.0), 0.0);
        return f;
    }

    /// I + alpha(r) x/r (x) x/r
    static CoefficientField radial(std::string name, std::function<double(double)> alpha) {
        return CoefficientField(std::move(name), [alpha = std::move(alpha)](double x, double y) {
            return radial_perturbation(alpha(std::hypot(x, y)), x, y);
        });
    }

    /// I + amplitude r^beta x/r (x) x/r; Hoelder-beta with constant 3*amplitude.
    static CoefficientField holder(double beta, double amplitude = 0.25) {
        if (!(beta > 0.0) || beta > 1.0) throw PreconditionError("holder field needs 0 < beta <= 1");
        auto f = radial("holder:" + fmt(beta), [beta, amplitude](double r) { return amplitude * std::pow(r, beta); });
        f.with_modulus(moduli::ModulusSpec::power(beta), 3.0 * amplitude);
        return f;
    }

    /// I + amplitude (1 - exp(-r^2/rho^2)) x/r (x) x/r, smooth at the origin.
    static CoefficientField smooth_radial(double amplitude = 0.25, double rho = 0.5) {
        auto f = CoefficientField("smooth", [amplitude, rho](double x, double y) {
            const double r2 = x * x + y * y;
            // (1 - e^{-s})/s without cancellation
            const double s = r2 / (rho * rho);
            const double q = s < 1e-8 ? 1.0 - 0.5 * s : -std::expm1(-s) / s;
            const double c = amplitude * q / (rho * rho);
            return Mat2{1.0 + c * x * x, c * x * y, c * x * y, 1.0 + c * y * y};
        });
        f.with_modulus(moduli::ModulusSpec::power(1.0), 2.0 * amplitude / rho);
        return f;
    }

    static CoefficientField w21(const counterexamples::W21Params& p) {
        p.validate();
        if (p.dim != 2) throw PreconditionError("planar fields need dim = 2");
        return radial("w21", [p](double r) { return counterexamples::w21_alpha(p, std::min(r, 1.0)); });
    }

    static CoefficientField bmo(const counterexamples::BMOParams& p) {
        p.validate();
        if (p.dim != 2) throw PreconditionError("planar fields need dim = 2");
        return radial("bmo", [p](double r) { return counterexamples::bmo_alpha(p, std::min(r, 1.0)); });
    }

    /// x -> A(center + scale x)
    CoefficientField rescaled(double cx, double cy, double scale) const {
        auto fn = fn_;
        CoefficientField out(name_ + "@local", [fn, cx, cy, scale](double x, double y) {
            return fn(cx + scale * x, cy + scale * y);
        });
        out.modulus_ = modulus_;
        out.modulus_constant_ = modulus_constant_;
        return out;
    }

private:
    static std::string fmt(double v) {
        std::string s = std::to_string(v);
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }

    std::string name_;
    Fn fn_;
    std::optional<moduli::ModulusSpec> modulus_;
    double modulus_constant_ = 0.0;
};

} // namespace dini::fd
