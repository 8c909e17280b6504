#pragma once

// Uniform node grids over [-1,1]^2 or a disc. Nodes strictly inside the domain
// are unknowns; the boundary is a list of points (grid nodes on the boundary
// plus, for the disc, the points where grid lines cut the circle) carrying an
// outward normal and an arc-length weight.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "dini/error.hpp"

namespace dini::fd {

enum class DomainKind { square, disc };
enum class NodeKind : unsigned char { exterior = 0, interior = 1, boundary = 2 };

struct Ref {
    enum Kind : unsigned char { none, unknown, boundary } kind = none;
    int index = -1;
    explicit operator bool() const { return kind != none; }
};

struct BoundaryPoint {
    double x, y;
    double nx, ny;     // outward unit normal
    double dsigma = 0; // arc length carried by the point
    int node = -1;     // grid node if the point is one
};

// Arm of the 5-point stencil: neighbor at distance len along +x, -x, +y, -y.
struct Arm {
    double len;
    Ref ref;
};
enum Dir { east = 0, west = 1, north = 2, south = 3 };

class Grid2D {
public:
    static Grid2D square(int cells) {
        if (cells < 2) throw PreconditionError("square grid needs at least 2 cells");
        Grid2D g;
        g.domain_ = DomainKind::square;
        g.radius_ = 1.0;
        g.h_ = 2.0 / cells;
        g.nx_ = g.ny_ = cells + 1;
        g.x0_ = g.y0_ = -1.0;
        g.kind_.assign(g.nx_ * g.ny_, NodeKind::interior);
        for (int j = 0; j < g.ny_; ++j)
            for (int i = 0; i < g.nx_; ++i) {
                if (i != 0 && j != 0 && i != cells && j != cells) continue;
                g.kind_[g.node(i, j)] = NodeKind::boundary;
                const double nx = i == 0 ? -1.0 : (i == cells ? 1.0 : 0.0);
                const double ny = j == 0 ? -1.0 : (j == cells ? 1.0 : 0.0);
                const double s = std::hypot(nx, ny);
                g.bpts_.push_back({g.x(i), g.y(j), nx / s, ny / s, g.h_, g.node(i, j)});
            }
        g.finish();
        return g;
    }

    /// Disc of the given radius centered at the origin with nodes at multiples of h.
    static Grid2D disc(double radius, double h) {
        if (!(radius > 0.0) || !(h > 0.0) || radius < 4.0 * h)
            throw PreconditionError("disc grid needs radius >= 4h > 0");
        Grid2D g;
        g.domain_ = DomainKind::disc;
        g.radius_ = radius;
        g.h_ = h;
        const int m = static_cast<int>(std::ceil(radius / h)) + 1;
        g.nx_ = g.ny_ = 2 * m + 1;
        g.x0_ = g.y0_ = -m * h;
        const double eps = 1e-12 * radius;
        g.kind_.assign(g.nx_ * g.ny_, NodeKind::exterior);
        for (int j = 0; j < g.ny_; ++j)
            for (int i = 0; i < g.nx_; ++i) {
                const double r = std::hypot(g.x(i), g.y(j));
                if (r < radius - eps) g.kind_[g.node(i, j)] = NodeKind::interior;
                else if (r <= radius + eps) {
                    g.kind_[g.node(i, j)] = NodeKind::boundary;
                    g.bpts_.push_back({g.x(i), g.y(j), g.x(i) / r, g.y(j) / r, 0.0, g.node(i, j)});
                }
            }
        g.finish();
        // arc weights from the angular spacing of the sorted points
        std::vector<int> order(g.bpts_.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
        auto ang = [&g](int k) { return std::atan2(g.bpts_[k].y, g.bpts_[k].x); };
        std::sort(order.begin(), order.end(), [&](int a, int b) { return ang(a) < ang(b); });
        const int nb = static_cast<int>(order.size());
        for (int k = 0; k < nb; ++k) {
            double prev = ang(order[(k + nb - 1) % nb]), next = ang(order[(k + 1) % nb]);
            const double cur = ang(order[k]);
            if (prev > cur) prev -= 2.0 * std::numbers::pi;
            if (next < cur) next += 2.0 * std::numbers::pi;
            g.bpts_[order[k]].dsigma = 0.5 * radius * (next - prev);
        }
        return g;
    }

    DomainKind domain() const { return domain_; }
    double radius() const { return radius_; }
    double h() const { return h_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double x0() const { return x0_; }
    double y0() const { return y0_; }
    int num_nodes() const { return nx_ * ny_; }
    int num_unknowns() const { return static_cast<int>(unknown_node_.size()); }
    int num_boundary() const { return static_cast<int>(bpts_.size()); }

    int node(int i, int j) const { return i + nx_ * j; }
    int node_i(int n) const { return n % nx_; }
    int node_j(int n) const { return n / nx_; }
    double x(int i) const { return x0_ + i * h_; }
    double y(int j) const { return y0_ + j * h_; }
    NodeKind kind(int n) const { return kind_[n]; }
    const std::vector<NodeKind>& kinds() const { return kind_; }

    int unknown_of_node(int n) const { return unknown_of_node_[n]; }
    int node_of_unknown(int u) const { return unknown_node_[u]; }
    int boundary_of_node(int n) const { return boundary_of_node_[n]; }
    const BoundaryPoint& boundary_point(int b) const { return bpts_[b]; }
    const std::vector<BoundaryPoint>& boundary_points() const { return bpts_; }
    std::array<double, 2> unknown_position(int u) const {
        const int n = unknown_node_[u];
        return {x(node_i(n)), y(node_j(n))};
    }
    const std::array<Arm, 4>& arms(int u) const { return arms_[u]; }

    /// Value-carrying reference of grid node (i, j), or none.
    Ref node_ref(int i, int j) const {
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return {};
        const int n = node(i, j);
        if (kind_[n] == NodeKind::interior) return {Ref::unknown, unknown_of_node_[n]};
        if (kind_[n] == NodeKind::boundary) return {Ref::boundary, boundary_of_node_[n]};
        return {};
    }

    bool contains(double px, double py) const {
        if (domain_ == DomainKind::square) return std::abs(px) <= 1.0 && std::abs(py) <= 1.0;
        return std::hypot(px, py) <= radius_ * (1.0 + 1e-12);
    }

    /// Width of the largest centered square of cells that fits, in cells.
    int cells_across() const { return static_cast<int>(std::floor(2.0 * radius_ / h_)); }

private:
    void finish() {
        unknown_of_node_.assign(num_nodes(), -1);
        boundary_of_node_.assign(num_nodes(), -1);
        for (int n = 0; n < num_nodes(); ++n)
            if (kind_[n] == NodeKind::interior) {
                unknown_of_node_[n] = static_cast<int>(unknown_node_.size());
                unknown_node_.push_back(n);
            }
        for (std::size_t b = 0; b < bpts_.size(); ++b) boundary_of_node_[bpts_[b].node] = static_cast<int>(b);

        arms_.resize(unknown_node_.size());
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (std::size_t u = 0; u < unknown_node_.size(); ++u) {
            const int i = node_i(unknown_node_[u]), j = node_j(unknown_node_[u]);
            for (int d = 0; d < 4; ++d) {
                const Ref r = node_ref(i + di[d], j + dj[d]);
                if (r) {
                    arms_[u][d] = {h_, r};
                    continue;
                }
                if (domain_ != DomainKind::disc) throw PreconditionError("square grid node without neighbor");
                // grid line meets the circle between the node and its exterior neighbor
                const double px = x(i), py = y(j);
                const double along = d < 2 ? px : py, across = d < 2 ? py : px;
                const double sgn = (d == east || d == north) ? 1.0 : -1.0;
                const double t = -sgn * along + std::sqrt(radius_ * radius_ - across * across);
                const double len = std::clamp(t, 1e-14 * h_, h_);
                const double bx = d < 2 ? px + sgn * len : px, by = d < 2 ? py : py + sgn * len;
                const double rb = std::hypot(bx, by);
                bpts_.push_back({bx, by, bx / rb, by / rb, 0.0, -1});
                arms_[u][d] = {len, {Ref::boundary, static_cast<int>(bpts_.size()) - 1}};
            }
        }
    }

    DomainKind domain_ = DomainKind::square;
    double radius_ = 1.0, h_ = 1.0, x0_ = 0.0, y0_ = 0.0;
    int nx_ = 0, ny_ = 0;
    std::vector<NodeKind> kind_;
    std::vector<int> unknown_of_node_, unknown_node_, boundary_of_node_;
    std::vector<BoundaryPoint> bpts_;
    std::vector<std::array<Arm, 4>> arms_;
};

using GridPtr = std::shared_ptr<const Grid2D>;

inline GridPtr make_square(int cells) { return std::make_shared<const Grid2D>(Grid2D::square(cells)); }
inline GridPtr make_disc(double radius, double h) { return std::make_shared<const Grid2D>(Grid2D::disc(radius, h)); }

/// Values on the unknowns plus values on the boundary points.
struct GridFunction {
    GridPtr grid;
    std::vector<double> interior;
    std::vector<double> boundary;

    GridFunction() = default;
    explicit GridFunction(GridPtr g)
        : grid(std::move(g)), interior(grid->num_unknowns(), 0.0), boundary(grid->num_boundary(), 0.0) {}

    template <class F>
    static GridFunction sample(GridPtr g, F&& f) {
        GridFunction out(g);
        for (int u = 0; u < g->num_unknowns(); ++u) {
            const auto p = g->unknown_position(u);
            out.interior[u] = f(p[0], p[1]);
        }
        for (int b = 0; b < g->num_boundary(); ++b) {
            const auto& bp = g->boundary_point(b);
            out.boundary[b] = f(bp.x, bp.y);
        }
        return out;
    }

    double at(const Ref& r) const { return r.kind == Ref::unknown ? interior[r.index] : boundary[r.index]; }

    bool finite() const {
        for (double v : interior)
            if (!std::isfinite(v)) return false;
        for (double v : boundary)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Value at grid node (i, j) if it carries one.
    bool node_value(int i, int j, double& v) const {
        const Ref r = grid->node_ref(i, j);
        if (!r) return false;
        v = at(r);
        return true;
    }

    /// Bicubic (4x4 Lagrange) interpolation; bilinear where the 4x4 block
    /// leaves the domain; nearest carried value as a last resort.
    double interpolate(double px, double py) const {
        const Grid2D& g = *grid;
        if (!g.contains(px, py)) throw DomainError("interpolation point outside the grid domain");
        const double fx = (px - g.x0()) / g.h(), fy = (py - g.y0()) / g.h();
        int i = static_cast<int>(std::floor(fx)), j = static_cast<int>(std::floor(fy));
        i = std::clamp(i, 0, g.nx() - 2);
        j = std::clamp(j, 0, g.ny() - 2);
        const double tx = fx - i, ty = fy - j;

        double block[4][4];
        bool full = true;
        for (int b = 0; b < 4 && full; ++b)
            for (int a = 0; a < 4 && full; ++a) full = node_value(i - 1 + a, j - 1 + b, block[b][a]);
        if (full) {
            auto w = [](double t, double out[4]) {
                out[0] = -t * (t - 1) * (t - 2) / 6.0;
                out[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
                out[2] = -(t + 1) * t * (t - 2) / 2.0;
                out[3] = (t + 1) * t * (t - 1) / 6.0;
            };
            double wx[4], wy[4];
            w(tx, wx);
            w(ty, wy);
            double s = 0.0;
            for (int b = 0; b < 4; ++b) {
                double row = 0.0;
                for (int a = 0; a < 4; ++a) row += wx[a] * block[b][a];
                s += wy[b] * row;
            }
            return s;
        }
        double c[2][2];
        bool quad = true;
        for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a) quad = node_value(i + a, j + b, c[b][a]) && quad;
        if (quad)
            return (1 - ty) * ((1 - tx) * c[0][0] + tx * c[0][1]) + ty * ((1 - tx) * c[1][0] + tx * c[1][1]);
        return nearest(px, py);
    }

private:
    double nearest(double px, double py) const {
        const Grid2D& g = *grid;
        double best = std::numeric_limits<double>::infinity(), val = 0.0;
        auto consider = [&](double qx, double qy, double v) {
            const double d = std::hypot(qx - px, qy - py);
            if (d < best) {
                best = d;
                val = v;
            }
        };
        const int ci = static_cast<int>(std::lround((px - g.x0()) / g.h()));
        const int cj = static_cast<int>(std::lround((py - g.y0()) / g.h()));
        for (int b = -2; b <= 2; ++b)
            for (int a = -2; a <= 2; ++a) {
                double v;
                if (node_value(ci + a, cj + b, v)) consider(g.x(ci + a), g.y(cj + b), v);
            }
        for (int bi = 0; bi < g.num_boundary(); ++bi) {
            const auto& bp = g.boundary_point(bi);
            if (std::abs(bp.x - px) <= 2 * g.h() && std::abs(bp.y - py) <= 2 * g.h()) consider(bp.x, bp.y, boundary[bi]);
        }
        if (!std::isfinite(best)) throw DomainError("no grid value near interpolation point");
        return val;
    }
};

} // namespace dini::fd
