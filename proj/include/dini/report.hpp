#pragma once

// Experiment configuration, report tables, CSV/JSON output and expectation gating.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dini/error.hpp"
#include "dini/quadrature.hpp"

namespace dini::experiments {

using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

enum class Experiment { w21_blowup, bmo_failure, improve_regularity, adjoint_continuity, cz_constant, modulus_check };

inline const char* to_string(Experiment e) {
    switch (e) {
    case Experiment::w21_blowup: return "w21-blowup";
    case Experiment::bmo_failure: return "bmo-failure";
    case Experiment::improve_regularity: return "improve-regularity";
    case Experiment::adjoint_continuity: return "adjoint-continuity";
    case Experiment::cz_constant: return "cz-constant";
    default: return "modulus-check";
    }
}

inline Experiment parse_experiment(const std::string& s) {
    for (auto e : {Experiment::w21_blowup, Experiment::bmo_failure, Experiment::improve_regularity,
                   Experiment::adjoint_continuity, Experiment::cz_constant, Experiment::modulus_check})
        if (s == to_string(e)) return e;
    throw PreconditionError("unknown experiment: " + s);
}

/// q = min(n/(n-1), p)
inline double sobolev_q(int n, double p) { return std::min(static_cast<double>(n) / (n - 1), p); }

inline double conjugate_exponent(double q) {
    return q == 1.0 ? std::numeric_limits<double>::infinity() : q / (q - 1.0);
}

struct OutputPaths {
    std::string dir = ".";
    std::string csv = "report.csv";
    std::string summary = "summary.json";
    bool plots = true;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::modulus_check;
    int n = 2;
    double p = 2.0;
    double q = 2.0;
    double q_conj = 2.0;
    std::vector<int> meshes{32, 64, 128};
    std::vector<quadrature::Region> regions{{0.0, 0.0, 0.5, 0.0}};
    std::uint64_t seed = 1;
    OutputPaths output;
    std::map<std::string, std::string> expect;
    json params = json::object();
    double quad_tol = 1e-9;
    double solver_tol = 1e-10;
    json source = json::object(); // the parsed document, for hashing

    /// Throws PreconditionError on any inconsistency.
    void validate() const {
        if (n != 2) throw PreconditionError("only n = 2 is supported");
        if (!(p >= 1.0)) throw PreconditionError("p must be >= 1");
        const double qq = sobolev_q(n, p);
        if (std::abs(q - qq) > 1e-12 * qq)
            throw PreconditionError("configured q does not equal min(n/(n-1), p) = " + std::to_string(qq));
        if (meshes.empty()) throw PreconditionError("meshes must not be empty");
        for (int m : meshes)
            if (m < 4) throw PreconditionError("mesh sizes must be >= 4 cells per unit length");
        for (const auto& r : regions)
            if (!(r.radius > 0.0) || !(std::hypot(r.cx, r.cy) + r.radius < 1.0))
                throw PreconditionError("regions must lie strictly inside the unit disc");
        if (!(quad_tol > 0.0) || !(solver_tol > 0.0)) throw PreconditionError("tolerances must be positive");
    }

    template <class T>
    T param(const char* key, T def) const {
        return params.is_object() && params.contains(key) ? params.at(key).get<T>() : def;
    }
};

inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw PreconditionError("config must be a JSON object");
    ExperimentConfig c;
    c.source = j;
    c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    c.n = j.value("n", 2);
    c.p = j.value("p", 2.0);
    const double qq = sobolev_q(c.n < 2 ? 2 : c.n, c.p);
    c.q = j.contains("q") ? j.at("q").get<double>() : qq;
    c.q_conj = conjugate_exponent(c.q);
    if (j.contains("meshes")) c.meshes = j.at("meshes").get<std::vector<int>>();
    if (j.contains("regions")) {
        c.regions.clear();
        for (const auto& r : j.at("regions"))
            c.regions.push_back({r.value("cx", 0.0), r.value("cy", 0.0), r.value("radius", 0.5), 0.0});
    }
    c.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("output")) {
        const auto& o = j.at("output");
        c.output.dir = o.value("dir", c.output.dir);
        c.output.csv = o.value("csv", c.output.csv);
        c.output.summary = o.value("summary", c.output.summary);
        c.output.plots = o.value("plots", c.output.plots);
    }
    if (j.contains("expect")) c.expect = j.at("expect").get<std::map<std::string, std::string>>();
    if (j.contains("params")) c.params = j.at("params");
    if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        c.quad_tol = t.value("quad", c.quad_tol);
        c.solver_tol = t.value("solver", c.solver_tol);
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw PreconditionError("config " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

/// 64-bit FNV-1a of the canonical (key-sorted) JSON dump.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Row {
    std::string table;
    std::string series;
    double x = 0.0, y = 0.0, aux = 0.0;
};

struct TableInfo {
    std::string name;
    std::string title;
    std::string x_label, y_label, aux_label;
    bool log_x = false, log_y = false;
};

struct VerdictEntry {
    std::string name;
    std::string value;
    std::string table; // rows backing the verdict
};

struct Provenance {
    std::string config_hash;
    std::string version = kVersion;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> timings; // seconds
};

struct ExperimentReport {
    std::string experiment;
    std::vector<TableInfo> tables;
    std::vector<Row> rows;
    std::map<std::string, std::string> legend; // "table/series" -> label
    std::vector<VerdictEntry> verdicts;
    std::vector<std::pair<std::string, double>> constants;
    std::vector<std::string> notes;
    Provenance provenance;

    void add_table(TableInfo t) { tables.push_back(std::move(t)); }
    void add_row(const std::string& table, const std::string& series, double x, double y, double aux = 0.0) {
        rows.push_back({table, series, x, y, aux});
    }
    void add_verdict(const std::string& name, const std::string& value, const std::string& table) {
        verdicts.push_back({name, value, table});
    }
    void add_constant(const std::string& name, double v) { constants.emplace_back(name, v); }

    const VerdictEntry* verdict(const std::string& name) const {
        for (const auto& v : verdicts)
            if (v.name == name) return &v;
        return nullptr;
    }
    std::optional<double> constant(const std::string& name) const {
        for (const auto& [k, v] : constants)
            if (k == name) return v;
        return std::nullopt;
    }
    std::vector<Row> table_rows(const std::string& table) const {
        std::vector<Row> out;
        for (const auto& r : rows)
            if (r.table == table) out.push_back(r);
        return out;
    }
};

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv(const ExperimentReport& r) {
    std::string out = "table,series,x,y,aux\n";
    for (const auto& row : r.rows)
        out += row.table + "," + row.series + "," + format_number(row.x) + "," + format_number(row.y) + "," +
               format_number(row.aux) + "\n";
    return out;
}

inline json number_json(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

struct ExpectationCheck {
    std::vector<std::string> mismatches; // "name: expected X, got Y"
    bool ok() const { return mismatches.empty(); }
};

inline ExpectationCheck check_expectations(const ExperimentReport& r, const std::map<std::string, std::string>& expect) {
    ExpectationCheck c;
    for (const auto& [name, want] : expect) {
        const auto* v = r.verdict(name);
        if (!v) c.mismatches.push_back(name + ": expected " + want + ", verdict missing");
        else if (v->value != want) c.mismatches.push_back(name + ": expected " + want + ", got " + v->value);
    }
    return c;
}

inline json to_json(const ExperimentReport& r, const ExperimentConfig* cfg = nullptr) {
    json j;
    j["experiment"] = r.experiment;
    json verdicts = json::array();
    for (const auto& v : r.verdicts) verdicts.push_back({{"name", v.name}, {"value", v.value}, {"table", v.table}});
    j["verdicts"] = verdicts;
    json constants = json::object();
    for (const auto& [k, v] : r.constants) constants[k] = number_json(v);
    j["constants"] = constants;
    json tables = json::array();
    for (const auto& t : r.tables)
        tables.push_back({{"name", t.name},
                          {"title", t.title},
                          {"x", t.x_label},
                          {"y", t.y_label},
                          {"aux", t.aux_label},
                          {"rows", r.table_rows(t.name).size()}});
    j["tables"] = tables;
    j["notes"] = r.notes;
    json prov;
    prov["config_hash"] = r.provenance.config_hash;
    prov["version"] = r.provenance.version;
    prov["seed"] = r.provenance.seed;
    json timings = json::object();
    for (const auto& [k, v] : r.provenance.timings) timings[k] = v;
    prov["timings_s"] = timings;
    j["provenance"] = prov;
    if (cfg) {
        j["config"] = cfg->source;
        j["exponents"] = {{"p", cfg->p}, {"q", cfg->q}, {"q_conjugate", number_json(cfg->q_conj)}};
        const auto chk = check_expectations(r, cfg->expect);
        j["expectations"] = {{"checked", cfg->expect.size()}, {"mismatches", chk.mismatches}};
    }
    return j;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace dini::experiments
