#pragma once

// Compressed sparse rows and the Krylov solvers used by the finite-difference
// layer. All reductions run in index order so a solve is bit-reproducible.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dini/error.hpp"

namespace dini::sparse {

using Vector = std::vector<double>;

struct Triplet {
    int row;
    int col;
    double value;
};

class CsrMatrix {
public:
    CsrMatrix() = default;

    /// Duplicates are summed; explicit zeros are kept so the pattern is stable.
    static CsrMatrix from_triplets(int rows, int cols, std::vector<Triplet> t) {
        std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        CsrMatrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.ptr_.assign(rows + 1, 0);
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i].row < 0 || t[i].row >= rows || t[i].col < 0 || t[i].col >= cols)
                throw PreconditionError("triplet index out of range");
            if (!m.idx_.empty() && i > 0 && t[i].row == t[i - 1].row && t[i].col == t[i - 1].col) {
                m.val_.back() += t[i].value;
                continue;
            }
            m.idx_.push_back(t[i].col);
            m.val_.push_back(t[i].value);
            ++m.ptr_[t[i].row + 1];
        }
        for (int r = 0; r < rows; ++r) m.ptr_[r + 1] += m.ptr_[r];
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t nnz() const { return val_.size(); }
    const std::vector<int>& row_ptr() const { return ptr_; }
    const std::vector<int>& col_idx() const { return idx_; }
    const std::vector<double>& values() const { return val_; }
    std::vector<double>& values() { return val_; }

    double at(int r, int c) const {
        const auto b = idx_.begin() + ptr_[r], e = idx_.begin() + ptr_[r + 1];
        const auto it = std::lower_bound(b, e, c);
        return (it != e && *it == c) ? val_[it - idx_.begin()] : 0.0;
    }

    void multiply(const Vector& x, Vector& y) const {
        y.assign(rows_, 0.0);
        for (int r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (int k = ptr_[r]; k < ptr_[r + 1]; ++k) s += val_[k] * x[idx_[k]];
            y[r] = s;
        }
    }
    Vector operator*(const Vector& x) const {
        Vector y;
        multiply(x, y);
        return y;
    }

    /// y = A^T x without forming the transpose.
    Vector multiply_transposed(const Vector& x) const {
        Vector y(cols_, 0.0);
        for (int r = 0; r < rows_; ++r)
            for (int k = ptr_[r]; k < ptr_[r + 1]; ++k) y[idx_[k]] += val_[k] * x[r];
        return y;
    }

    CsrMatrix transpose() const {
        std::vector<Triplet> t;
        t.reserve(nnz());
        for (int r = 0; r < rows_; ++r)
            for (int k = ptr_[r]; k < ptr_[r + 1]; ++k) t.push_back({idx_[k], r, val_[k]});
        return from_triplets(cols_, rows_, std::move(t));
    }

    Vector diagonal() const {
        Vector d(std::min(rows_, cols_), 0.0);
        for (int r = 0; r < static_cast<int>(d.size()); ++r) d[r] = at(r, r);
        return d;
    }

    CsrMatrix scaled(double s) const {
        CsrMatrix m = *this;
        for (double& v : m.val_) v *= s;
        return m;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<int> ptr_{0};
    std::vector<int> idx_;
    std::vector<double> val_;
};

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

enum class Method { bicgstab, gmres, cg };
enum class Preconditioner { none, jacobi, ilu0 };

inline const char* to_string(Method m) {
    switch (m) {
    case Method::bicgstab: return "bicgstab";
    case Method::gmres: return "gmres";
    default: return "cg";
    }
}
inline const char* to_string(Preconditioner p) {
    switch (p) {
    case Preconditioner::none: return "none";
    case Preconditioner::jacobi: return "jacobi";
    default: return "ilu0";
    }
}

struct SolverConfig {
    Method method = Method::bicgstab;
    double rel_tol = 1e-10;
    int max_iter = 20000;
    Preconditioner preconditioner = Preconditioner::ilu0;
    int restart = 60;

    void validate() const {
        if (!(rel_tol > 0.0)) throw PreconditionError("SolverConfig.rel_tol must be positive");
        if (max_iter < 1) throw PreconditionError("SolverConfig.max_iter must be >= 1");
        if (restart < 1) throw PreconditionError("SolverConfig.restart must be >= 1");
    }
};

struct SolveStats {
    int iterations = 0;
    double residual = 0.0; // ||b - Ax|| / ||b||
    bool converged = false;
};

/// Level-0 incomplete LU on the pattern of A.
class Ilu0 {
public:
    explicit Ilu0(const CsrMatrix& a) : lu_(a), diag_(a.rows(), -1) {
        const auto& ptr = lu_.row_ptr();
        const auto& idx = lu_.col_idx();
        auto& val = lu_.values();
        const int n = a.rows();
        for (int i = 0; i < n; ++i)
            for (int k = ptr[i]; k < ptr[i + 1]; ++k)
                if (idx[k] == i) diag_[i] = k;
        for (int i = 0; i < n; ++i)
            if (diag_[i] < 0 || val[diag_[i]] == 0.0) throw PreconditionError("ILU0 needs a nonzero diagonal");
        std::vector<int> pos(n, -1);
        for (int i = 0; i < n; ++i) {
            for (int k = ptr[i]; k < ptr[i + 1]; ++k) pos[idx[k]] = k;
            for (int k = ptr[i]; k < ptr[i + 1] && idx[k] < i; ++k) {
                const int j = idx[k];
                val[k] /= val[diag_[j]];
                for (int m = diag_[j] + 1; m < ptr[j + 1]; ++m) {
                    const int q = pos[idx[m]];
                    if (q >= 0) val[q] -= val[k] * val[m];
                }
            }
            for (int k = ptr[i]; k < ptr[i + 1]; ++k) pos[idx[k]] = -1;
            if (val[diag_[i]] == 0.0) throw PreconditionError("ILU0 hit a zero pivot");
        }
    }

    void apply(const Vector& r, Vector& z) const {
        const auto& ptr = lu_.row_ptr();
        const auto& idx = lu_.col_idx();
        const auto& val = lu_.values();
        const int n = lu_.rows();
        z = r;
        for (int i = 0; i < n; ++i) {
            double s = z[i];
            for (int k = ptr[i]; k < diag_[i]; ++k) s -= val[k] * z[idx[k]];
            z[i] = s;
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = z[i];
            for (int k = diag_[i] + 1; k < ptr[i + 1]; ++k) s -= val[k] * z[idx[k]];
            z[i] = s / val[diag_[i]];
        }
    }

private:
    CsrMatrix lu_;
    std::vector<int> diag_;
};

class PreconditionerOp {
public:
    PreconditionerOp(const CsrMatrix& a, Preconditioner kind) : kind_(kind) {
        if (kind == Preconditioner::jacobi) {
            inv_diag_ = a.diagonal();
            for (double& d : inv_diag_) {
                if (d == 0.0) throw PreconditionError("Jacobi needs a nonzero diagonal");
                d = 1.0 / d;
            }
        } else if (kind == Preconditioner::ilu0) {
            ilu_.emplace_back(a);
        }
    }
    void apply(const Vector& r, Vector& z) const {
        switch (kind_) {
        case Preconditioner::none: z = r; break;
        case Preconditioner::jacobi:
            z.resize(r.size());
            for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv_diag_[i] * r[i];
            break;
        case Preconditioner::ilu0: ilu_.front().apply(r, z); break;
        }
    }

private:
    Preconditioner kind_;
    Vector inv_diag_;
    std::vector<Ilu0> ilu_;
};

namespace detail {

inline double true_residual(const CsrMatrix& a, const Vector& b, const Vector& x, double bnorm) {
    Vector ax;
    a.multiply(x, ax);
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += (b[i] - ax[i]) * (b[i] - ax[i]);
    return std::sqrt(s) / bnorm;
}

inline void axpy(double a, const Vector& x, Vector& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline SolveStats bicgstab(const CsrMatrix& a, const Vector& b, Vector& x, const SolverConfig& cfg,
                           const PreconditionerOp& m, double bnorm, Vector& best, double& best_res) {
    const std::size_t n = b.size();
    Vector r(n), ax;
    a.multiply(x, ax);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
    Vector rhat = r, p(n, 0.0), v(n, 0.0), phat, s(n), shat, t;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    SolveStats st;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        st.iterations = it;
        const double rho_new = dot(rhat, r);
        if (rho_new == 0.0 || omega == 0.0) {
            // breakdown: restart the shadow space from the current residual
            rhat = r;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            rho = alpha = omega = 1.0;
            if (dot(r, r) == 0.0) break;
            continue;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        m.apply(p, phat);
        a.multiply(phat, v);
        const double rv = dot(rhat, v);
        if (rv == 0.0) {
            rho = 0.0;
            continue;
        }
        alpha = rho_new / rv;
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) / bnorm <= 0.1 * cfg.rel_tol) {
            axpy(alpha, phat, x);
            r = s;
        } else {
            m.apply(s, shat);
            a.multiply(shat, t);
            const double tt = dot(t, t);
            omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
            axpy(alpha, phat, x);
            axpy(omega, shat, x);
            for (std::size_t i = 0; i < n; ++i) r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        const double est = norm2(r) / bnorm;
        if (est <= cfg.rel_tol || it % 50 == 0) {
            const double res = true_residual(a, b, x, bnorm);
            if (res < best_res) {
                best_res = res;
                best = x;
            }
            if (res <= cfg.rel_tol) {
                st.residual = res;
                st.converged = true;
                return st;
            }
            if (est <= cfg.rel_tol) {
                // recurrence drifted: refresh the residual
                a.multiply(x, ax);
                for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
            }
        }
    }
    st.residual = true_residual(a, b, x, bnorm);
    st.converged = st.residual <= cfg.rel_tol;
    return st;
}

inline SolveStats gmres(const CsrMatrix& a, const Vector& b, Vector& x, const SolverConfig& cfg,
                        const PreconditionerOp& m, double bnorm, Vector& best, double& best_res) {
    const std::size_t n = b.size();
    const int mr = cfg.restart;
    SolveStats st;
    Vector ax, w, z;
    int it = 0;
    while (it < cfg.max_iter) {
        a.multiply(x, ax);
        Vector r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
        const double beta = norm2(r);
        if (beta / bnorm <= cfg.rel_tol) break;
        std::vector<Vector> V(1, r), Z;
        for (double& vi : V[0]) vi /= beta;
        std::vector<std::vector<double>> H(mr + 1, std::vector<double>(mr, 0.0));
        std::vector<double> cs(mr), sn(mr), g(mr + 1, 0.0);
        g[0] = beta;
        int j = 0;
        for (; j < mr && it < cfg.max_iter; ++j, ++it) {
            m.apply(V[j], z);
            Z.push_back(z);
            a.multiply(z, w);
            for (int i = 0; i <= j; ++i) {
                H[i][j] = dot(w, V[i]);
                axpy(-H[i][j], V[i], w);
            }
            H[j + 1][j] = norm2(w);
            for (int i = 0; i < j; ++i) {
                const double t = cs[i] * H[i][j] + sn[i] * H[i + 1][j];
                H[i + 1][j] = -sn[i] * H[i][j] + cs[i] * H[i + 1][j];
                H[i][j] = t;
            }
            const double d = std::hypot(H[j][j], H[j + 1][j]);
            cs[j] = d > 0.0 ? H[j][j] / d : 1.0;
            sn[j] = d > 0.0 ? H[j + 1][j] / d : 0.0;
            const double hj1 = H[j + 1][j];
            H[j][j] = d;
            H[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            if (std::abs(g[j + 1]) / bnorm <= 0.5 * cfg.rel_tol || hj1 == 0.0) {
                ++j;
                ++it;
                break;
            }
            Vector vn = w;
            for (double& vi : vn) vi /= hj1;
            V.push_back(std::move(vn));
        }
        std::vector<double> y(j, 0.0);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[i];
            for (int k = i + 1; k < j; ++k) s -= H[i][k] * y[k];
            y[i] = s / H[i][i];
        }
        for (int i = 0; i < j; ++i) axpy(y[i], Z[i], x);
        const double res = true_residual(a, b, x, bnorm);
        if (res < best_res) {
            best_res = res;
            best = x;
        }
        if (res <= cfg.rel_tol) break;
    }
    st.iterations = it;
    st.residual = true_residual(a, b, x, bnorm);
    st.converged = st.residual <= cfg.rel_tol;
    return st;
}

// Conjugate gradients for symmetric definite A (either sign). ILU0 is not
// symmetric, so it is replaced by Jacobi on this path.
inline SolveStats cg(const CsrMatrix& a, const Vector& b, Vector& x, const SolverConfig& cfg,
                     const PreconditionerOp& m, double bnorm, Vector& best, double& best_res) {
    const std::size_t n = b.size();
    Vector r(n), ax, z, q;
    a.multiply(x, ax);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
    m.apply(r, z);
    Vector p = z;
    double rz = dot(r, z);
    SolveStats st;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        st.iterations = it;
        a.multiply(p, q);
        const double pq = dot(p, q);
        if (pq == 0.0) break;
        const double alpha = rz / pq;
        axpy(alpha, p, x);
        axpy(-alpha, q, r);
        if (norm2(r) / bnorm <= cfg.rel_tol || it % 50 == 0) {
            const double res = true_residual(a, b, x, bnorm);
            if (res < best_res) {
                best_res = res;
                best = x;
            }
            if (res <= cfg.rel_tol) {
                st.residual = res;
                st.converged = true;
                return st;
            }
        }
        m.apply(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    st.residual = true_residual(a, b, x, bnorm);
    st.converged = st.residual <= cfg.rel_tol;
    return st;
}

} // namespace detail

/// Solves A x = b to ||b - Ax|| <= rel_tol ||b||. x is the initial guess on
/// entry. Throws ConvergenceError (with the best iterate) on failure.
inline SolveStats solve(const CsrMatrix& a, const Vector& b, Vector& x, const SolverConfig& cfg = {}) {
    cfg.validate();
    if (a.rows() != a.cols() || static_cast<int>(b.size()) != a.rows())
        throw PreconditionError("solve: dimension mismatch");
    if (static_cast<int>(x.size()) != a.rows()) x.assign(a.rows(), 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return {0, 0.0, true};
    }
    const auto kind = (cfg.method == Method::cg && cfg.preconditioner == Preconditioner::ilu0)
                          ? Preconditioner::jacobi
                          : cfg.preconditioner;
    const PreconditionerOp m(a, kind);
    Vector best = x;
    double best_res = detail::true_residual(a, b, x, bnorm);
    if (best_res <= cfg.rel_tol) return {0, best_res, true};
    SolveStats st;
    switch (cfg.method) {
    case Method::bicgstab: st = detail::bicgstab(a, b, x, cfg, m, bnorm, best, best_res); break;
    case Method::gmres: st = detail::gmres(a, b, x, cfg, m, bnorm, best, best_res); break;
    case Method::cg: st = detail::cg(a, b, x, cfg, m, bnorm, best, best_res); break;
    }
    if (!st.converged) {
        if (st.residual > best_res) {
            x = best;
            st.residual = best_res;
        }
        throw ConvergenceError(std::string(to_string(cfg.method)) + " did not converge in " +
                                   std::to_string(st.iterations) + " iterations",
                               x, st.residual, st.iterations);
    }
    return st;
}

} // namespace dini::sparse
