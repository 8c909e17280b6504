#pragma once

// Grid function serialization (binary and CSV) and JSON forms of modulus specs.

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dini/error.hpp"
#include "dini/grid.hpp"
#include "dini/moduli.hpp"

namespace dini::io {

using fd::GridFunction;
using fd::GridPtr;

inline constexpr char kMagic[8] = {'D', 'I', 'N', 'I', 'G', 'R', 'D', '1'};

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "binary format assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
    char buf[sizeof(T)];
    if (!is.read(buf, sizeof(T))) throw DomainError("grid file is truncated");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace detail

/// Header: magic, domain (u8), nx, ny (i32), h, x0, y0, radius (f64), mask
/// runs (count u32, then (kind u8, length u32) pairs). Payload: interior then
/// boundary values as f64.
inline void write_binary(std::ostream& os, const GridFunction& f) {
    const fd::Grid2D& g = *f.grid;
    os.write(kMagic, sizeof(kMagic));
    detail::put<std::uint8_t>(os, g.domain() == fd::DomainKind::disc ? 1 : 0);
    detail::put<std::int32_t>(os, g.nx());
    detail::put<std::int32_t>(os, g.ny());
    detail::put<double>(os, g.h());
    detail::put<double>(os, g.x0());
    detail::put<double>(os, g.y0());
    detail::put<double>(os, g.radius());
    std::vector<std::pair<std::uint8_t, std::uint32_t>> runs;
    for (auto k : g.kinds()) {
        const auto c = static_cast<std::uint8_t>(k);
        if (!runs.empty() && runs.back().first == c) ++runs.back().second;
        else runs.push_back({c, 1});
    }
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(runs.size()));
    for (const auto& [k, n] : runs) {
        detail::put<std::uint8_t>(os, k);
        detail::put<std::uint32_t>(os, n);
    }
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(f.interior.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(f.boundary.size()));
    for (double v : f.interior) detail::put<double>(os, v);
    for (double v : f.boundary) detail::put<double>(os, v);
    if (!os) throw DomainError("failed to write grid function");
}

/// Rebuilds the grid from its parameters and checks the stored mask against it.
inline GridFunction read_binary(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw DomainError("not a grid function file");
    const auto domain = detail::get<std::uint8_t>(is);
    const auto nx = detail::get<std::int32_t>(is);
    const auto ny = detail::get<std::int32_t>(is);
    const double h = detail::get<double>(is);
    detail::get<double>(is);
    detail::get<double>(is);
    const double radius = detail::get<double>(is);
    GridPtr g = domain == 1 ? fd::make_disc(radius, h) : fd::make_square(static_cast<int>(std::lround(2.0 / h)));
    if (g->nx() != nx || g->ny() != ny) throw DomainError("grid file dimensions do not match its parameters");
    const auto nruns = detail::get<std::uint32_t>(is);
    std::size_t pos = 0;
    for (std::uint32_t r = 0; r < nruns; ++r) {
        const auto k = detail::get<std::uint8_t>(is);
        const auto n = detail::get<std::uint32_t>(is);
        for (std::uint32_t i = 0; i < n; ++i, ++pos)
            if (pos >= g->kinds().size() || static_cast<std::uint8_t>(g->kinds()[pos]) != k)
                throw DomainError("grid file mask does not match the rebuilt grid");
    }
    if (pos != g->kinds().size()) throw DomainError("grid file mask has the wrong length");
    GridFunction f(g);
    if (detail::get<std::uint32_t>(is) != f.interior.size() || detail::get<std::uint32_t>(is) != f.boundary.size())
        throw DomainError("grid file payload sizes do not match");
    for (double& v : f.interior) v = detail::get<double>(is);
    for (double& v : f.boundary) v = detail::get<double>(is);
    return f;
}

/// kind,x,y,value with kind "u" for unknowns and "b" for boundary points.
inline void write_csv(std::ostream& os, const GridFunction& f) {
    const fd::Grid2D& g = *f.grid;
    char buf[128];
    os << "kind,x,y,value\n";
    for (int u = 0; u < g.num_unknowns(); ++u) {
        const auto p = g.unknown_position(u);
        std::snprintf(buf, sizeof buf, "u,%.17g,%.17g,%.17g\n", p[0], p[1], f.interior[u]);
        os << buf;
    }
    for (int b = 0; b < g.num_boundary(); ++b) {
        const auto& bp = g.boundary_point(b);
        std::snprintf(buf, sizeof buf, "b,%.17g,%.17g,%.17g\n", bp.x, bp.y, f.boundary[b]);
        os << buf;
    }
}

/// {"kind": "power", "params": {"beta": 0.5}} and friends.
inline nlohmann::json to_json(const moduli::ModulusSpec& m) {
    using moduli::Kind;
    nlohmann::json j;
    j["kind"] = moduli::to_string(m.kind());
    switch (m.kind()) {
    case Kind::power: j["params"] = {{"beta", m.param()}}; break;
    case Kind::log_inverse: j["params"] = {{"c", m.param()}}; break;
    case Kind::log_power: j["params"] = {{"gamma", m.param()}}; break;
    case Kind::tabulated: j["params"] = {{"t", m.knots()}, {"theta", m.values()}}; break;
    }
    return j;
}

inline moduli::ModulusSpec modulus_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw PreconditionError("modulus spec needs a \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    const nlohmann::json params = j.value("params", nlohmann::json::object());
    auto num = [&](const char* key, double def) { return params.value(key, def); };
    if (kind == "power") return moduli::ModulusSpec::power(num("beta", 1.0));
    if (kind == "log_inverse") return moduli::ModulusSpec::log_inverse(num("c", 1.0));
    if (kind == "log_power") return moduli::ModulusSpec::log_power(num("gamma", 2.0));
    if (kind == "tabulated")
        return moduli::ModulusSpec::tabulated(params.at("t").get<std::vector<double>>(),
                                              params.at("theta").get<std::vector<double>>());
    throw PreconditionError("unknown modulus kind: " + kind);
}

} // namespace dini::io
