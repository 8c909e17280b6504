// dini-reglab: experiment runner and toolkit front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dini/dini.hpp"

namespace {

using namespace dini;
using nlohmann::json;
namespace ex = dini::experiments;
namespace cx = dini::counterexamples;

constexpr int kOk = 0, kError = 1, kMismatch = 2;

std::string num(double v) { return ex::format_number(v); }

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw PreconditionError("cannot parse " + what + ": " + s);
}

// identity | smooth | holder:<beta> | w21[:<logR>[:<gamma>]] | bmo[:<logR>]
fd::CoefficientField parse_field(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.empty()) throw PreconditionError("empty coefficient spec");
    const auto& k = parts[0];
    auto arg = [&](std::size_t i, double def) { return parts.size() > i ? parse_number(parts[i], spec) : def; };
    if (k == "identity") return fd::CoefficientField::identity();
    if (k == "smooth") return fd::CoefficientField::smooth_radial(arg(1, 0.25));
    if (k == "holder") return fd::CoefficientField::holder(arg(1, 0.5));
    if (k == "w21") return fd::CoefficientField::w21({arg(2, 2.0), arg(1, 10.0), 2});
    if (k == "bmo") return fd::CoefficientField::bmo({parts.size() > 1 ? arg(1, 0.0) : cx::find_bmo_logR<2>().logR, 2});
    throw PreconditionError("unknown coefficient spec: " + spec);
}

// zero | one | bump | linear | harmonic | const:<v>
adjoint::ScalarFn parse_scalar(const std::string& spec) {
    if (spec == "zero") return {};
    if (spec == "one") return [](double, double) { return 1.0; };
    if (spec == "bump") return [](double x, double y) { return ex::bump(x, y); };
    if (spec == "linear") return [](double x, double y) { return 1.0 + x - 0.5 * y; };
    if (spec == "harmonic") return [](double x, double y) { return x * x - y * y; };
    if (spec.rfind("const:", 0) == 0) {
        const double c = parse_number(spec.substr(6), spec);
        return [c](double, double) { return c; };
    }
    throw PreconditionError("unknown function spec: " + spec + " (zero|one|bump|linear|harmonic|const:<v>)");
}

int mesh_of(double h) {
    if (!(h > 0.0) || h > 0.25) throw PreconditionError("--h must lie in (0, 1/4]");
    return static_cast<int>(std::lround(1.0 / h));
}

void write_grid_function(const fd::GridFunction& f, const std::string& path) {
    if (path.empty()) return;
    const bool csv = path.size() > 4 && path.substr(path.size() - 4) == ".csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot write " + path);
    if (csv) io::write_csv(out, f);
    else io::write_binary(out, f);
}

void print_verdict_csv(const DivergenceVerdict& v) {
    std::cout << "k,increment,ratio\n";
    for (std::size_t i = 0; i < v.increments.size(); ++i)
        std::cout << v.first_level + static_cast<int>(i) << "," << num(v.increments[i]) << ","
                  << (i == 0 ? std::string("") : num(v.increments[i] / v.increments[i - 1])) << "\n";
}

json verdict_json(const DivergenceVerdict& v) {
    return {{"verdict", to_string(v.verdict)},
            {"fitted_ratio", ex::number_json(v.fitted_ratio)},
            {"fitted_exponent", ex::number_json(v.fitted_exponent)},
            {"total", ex::number_json(v.total())}};
}

// ---------------------------------------------------------------- experiments

int run_experiment(ex::Experiment e, const std::string& config, const std::string& out, bool expect) {
    ex::ExperimentConfig cfg;
    if (config.empty()) cfg = ex::parse_config(json{{"experiment", ex::to_string(e)}});
    else cfg = ex::load_config(config);
    if (cfg.experiment != e)
        throw PreconditionError(std::string("config is for ") + ex::to_string(cfg.experiment) + ", not " +
                                ex::to_string(e));
    const auto rep = ex::run(cfg);
    const std::string dir = out.empty() ? cfg.output.dir : out;
    ex::write_outputs(rep, cfg, dir);
    for (const auto& v : rep.verdicts) std::cout << v.name << ": " << v.value << "\n";
    for (const auto& n : rep.notes) std::cout << "note: " << n << "\n";
    if (!expect) return kOk;
    const auto chk = ex::check_expectations(rep, cfg.expect);
    for (const auto& m : chk.mismatches) std::cerr << "mismatch: " << m << "\n";
    return chk.ok() ? kOk : kMismatch;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dini-reglab: regularity experiments for non-divergence operators with Dini coefficients"};
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);

    // experiment subcommands
    struct ExperimentArgs {
        std::string config, out;
        bool expect = false;
    };
    std::vector<std::pair<ex::Experiment, std::unique_ptr<ExperimentArgs>>> exps;
    for (auto e : {ex::Experiment::w21_blowup, ex::Experiment::bmo_failure, ex::Experiment::improve_regularity,
                   ex::Experiment::adjoint_continuity, ex::Experiment::cz_constant, ex::Experiment::modulus_check}) {
        auto args = std::make_unique<ExperimentArgs>();
        auto* sub = app.add_subcommand(ex::to_string(e), std::string("run the ") + ex::to_string(e) + " experiment");
        sub->add_option("--config", args->config, "JSON config file (defaults when omitted)");
        sub->add_option("--out", args->out, "output directory (overrides the config)");
        sub->add_flag("--expect", args->expect, "exit with 2 when verdicts differ from the config's expect block");
        exps.emplace_back(e, std::move(args));
    }

    // modulus check
    auto* modulus = app.add_subcommand("modulus", "modulus of continuity toolkit");
    auto* mcheck = modulus->add_subcommand("check", "Dini verdicts for modulus specs, printed as JSON");
    std::vector<std::string> mspecs;
    double lower_cut = std::ldexp(1.0, -40);
    mcheck->add_option("--spec", mspecs, "JSON spec, e.g. {\"kind\":\"power\",\"params\":{\"beta\":0.5}}")->required();
    mcheck->add_option("--lower-cut", lower_cut, "lower integration cut");
    modulus->require_subcommand(1);

    // counterexample fields
    auto* counter = app.add_subcommand("counterexample", "sample the counterexample fields as CSV");
    double c_logR = 0.0, c_gamma = 2.0;
    int c_n = 2, c_samples = 200;
    auto* cw21 = counter->add_subcommand("w21", "r, u, u', u'', alpha");
    auto* cbmo = counter->add_subcommand("bmo", "x1, x2, d12 u, alpha");
    for (auto* s : {cw21, cbmo}) {
        s->add_option("--logR", c_logR, "log R (0: default for w21, search for bmo)");
        s->add_option("--n", c_n, "dimension");
        s->add_option("--samples", c_samples, "number of samples");
    }
    cw21->add_option("--gamma", c_gamma, "exponent gamma > 1");
    counter->require_subcommand(1);

    // probes
    auto* probe = app.add_subcommand("probe", "dyadic divergence probes on the counterexample fields");
    double pr_p = 2.0, pr_tol = 1e-9, pr_N = 1.0, pr_c = 0.0;
    int pr_levels = 20;
    std::string pr_field = "w21";
    auto* plp = probe->add_subcommand("lp", "L^p increments of |D^2 u| (w21 or bmo)");
    auto* pbmo = probe->add_subcommand("bmo", "mean oscillation of d12 u on B_{2^-k}");
    auto* pexp = probe->add_subcommand("expint", "increments of exp(N|d12 u - c|)");
    for (auto* s : {plp, pbmo, pexp}) {
        s->add_option("--levels", pr_levels, "dyadic levels");
        s->add_option("--tol", pr_tol, "quadrature tolerance");
    }
    plp->add_option("--p", pr_p, "exponent p >= 1");
    plp->add_option("--field", pr_field, "w21 | bmo");
    pexp->add_option("--N", pr_N, "N > 0");
    pexp->add_option("--c", pr_c, "shift c");
    probe->require_subcommand(1);

    // forward solve
    auto* solve = app.add_subcommand("solve", "Dirichlet solve of tr(A D^2 u) = f on the unit disc");
    std::string s_coeff = "identity", s_rhs = "one", s_bc = "zero", s_out;
    double s_h = 1.0 / 64, s_p = 2.0;
    solve->add_option("--coeff", s_coeff, "identity | smooth | holder:<beta> | w21 | bmo");
    solve->add_option("--h", s_h, "mesh width");
    solve->add_option("--p", s_p, "exponent for the reported norms");
    solve->add_option("--rhs", s_rhs, "zero | one | bump | linear | harmonic | const:<v>");
    solve->add_option("--bc", s_bc, "boundary data, same choices as --rhs");
    solve->add_option("--out", s_out, "write u_h (.csv for CSV, binary otherwise)");

    // adjoint toolkit
    auto* adj = app.add_subcommand("adjoint", "adjoint solutions and the dyadic iteration");
    auto* asolve = adj->add_subcommand("solve", "solve the adjoint problem");
    auto* aiter = adj->add_subcommand("iterate", "dyadic harmonic iteration at the origin");
    auto* acont = adj->add_subcommand("continuity", "continuity estimate at sampled centers");
    adj->require_subcommand(1);
    std::string a_coeff = "holder:0.5", a_phi = "zero", a_eta = "bump", a_psi = "zero", a_out, a_delta = "1",
                a_centers;
    double a_h = 1.0 / 128, a_hloc = 1.0 / 64, a_p = 2.0, a_rho = 0.25;
    int a_levels = 4;
    for (auto* s : {asolve, aiter, acont}) {
        s->add_option("--coeff,--theta", a_coeff, "coefficient field");
        s->add_option("--h", a_h, "base mesh width");
        s->add_option("--p", a_p, "exponent 1 < p < inf");
        s->add_option("--eta", a_eta, "adjoint source (function spec)");
    }
    asolve->add_option("--phi", a_phi, "Phi = f I for the function spec f");
    asolve->add_option("--psi", a_psi, "boundary datum (function spec)");
    asolve->add_option("--out", a_out, "write v (.csv for CSV, binary otherwise)");
    for (auto* s : {aiter, acont}) {
        s->add_option("--levels", a_levels, "dyadic levels");
        s->add_option("--delta", a_delta, "delta in (0, 1] or auto");
        s->add_option("--h-local", a_hloc, "local grid width");
        s->add_option("--rho", a_rho, "localization radius");
    }
    acont->add_option("--centers", a_centers, "CSV file with x,y per line (default: three centers near 0)");

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto& [e, args] : exps)
            if (app.got_subcommand(ex::to_string(e))) return run_experiment(e, args->config, args->out, args->expect);

        if (mcheck->parsed()) {
            json out = json::array();
            for (const auto& s : mspecs) {
                const auto spec = io::modulus_from_json(json::parse(s));
                const auto r = moduli::dini_integral(spec, lower_cut);
                json row{{"spec", io::to_json(spec)},
                         {"verdict", to_string(r.verdict)},
                         {"total", r.total},
                         {"fitted_ratio", ex::number_json(r.tail.fitted_ratio)},
                         {"doubling", moduli::check_doubling(spec, 200)}};
                out.push_back(row);
            }
            std::cout << out.dump(2) << "\n";
            return kOk;
        }

        if (cw21->parsed()) {
            const cx::W21Params p{c_gamma, c_logR > 0.0 ? c_logR : 10.0, c_n};
            p.validate();
            std::cout << "r,u,du,d2u,alpha\n";
            for (int i = 0; i < c_samples; ++i) {
                const double r = std::pow(1e-6, 1.0 - i / (c_samples - 1.0));
                const auto d = cx::w21_derivs(p, r);
                std::cout << num(r) << "," << num(d.u) << "," << num(d.du) << "," << num(d.d2u) << ","
                          << num(cx::w21_alpha(p, r)) << "\n";
            }
            return kOk;
        }
        if (cbmo->parsed()) {
            if (c_n != 2) throw PreconditionError("bmo sampling is planar (n = 2)");
            const cx::BMOParams p{c_logR > 0.0 ? c_logR : cx::find_bmo_logR<2>().logR, 2};
            p.validate();
            std::cout << "x1,x2,d12u,alpha\n";
            const int side = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(c_samples))));
            for (int j = 0; j < side; ++j)
                for (int i = 0; i < side; ++i) {
                    const double x = -1.0 + 2.0 * (i + 0.5) / side, y = -1.0 + 2.0 * (j + 0.5) / side;
                    const double r = std::hypot(x, y);
                    if (r > 1.0) continue;
                    std::cout << num(x) << "," << num(y) << "," << num(cx::bmo_solution<2>(p, {x, y}).hess[0][1])
                              << "," << num(cx::bmo_alpha(p, r)) << "\n";
                }
            return kOk;
        }

        quadrature::ProbeOptions popt;
        popt.quad.tol = pr_tol;
        if (plp->parsed() || pbmo->parsed() || pexp->parsed()) {
            const cx::BMOParams b{cx::find_bmo_logR<2>().logR, 2};
            auto d12 = [&](const quadrature::Point2& x) { return cx::bmo_solution<2>(b, {x[0], x[1]}).hess[0][1]; };
            if (plp->parsed()) {
                DivergenceVerdict v;
                if (pr_field == "w21") {
                    const cx::W21Params w{};
                    v = quadrature::lp_divergence_probe(
                        [&](const quadrature::Point2& x) { return ex::w21_hessian_norm(w, x); }, pr_p, pr_levels, popt);
                } else if (pr_field == "bmo") {
                    v = quadrature::lp_divergence_probe(
                        [&](const quadrature::Point2& x) {
                            const auto h = cx::bmo_solution<2>(b, {x[0], x[1]}).hess;
                            return std::sqrt(h[0][0] * h[0][0] + 2 * h[0][1] * h[0][1] + h[1][1] * h[1][1]);
                        },
                        pr_p, pr_levels, popt);
                } else {
                    throw PreconditionError("--field must be w21 or bmo");
                }
                print_verdict_csv(v);
                std::cout << verdict_json(v).dump() << "\n";
            } else if (pbmo->parsed()) {
                std::vector<int> ks;
                for (int k = 1; k <= pr_levels; ++k) ks.push_back(k);
                quadrature::Options q;
                q.tol = std::max(pr_tol, 1e-8);
                const auto r = quadrature::bmo_probe(d12, {0.0, 0.0}, ks, q);
                std::cout << "k,radius,oscillation\n";
                for (std::size_t i = 0; i < ks.size(); ++i)
                    std::cout << ks[i] << "," << num(r.radii[i]) << "," << num(r.values[i]) << "\n";
                std::cout << json{{"slope_per_level", r.slope_per_level}, {"growth_slope", r.growth_slope}}.dump()
                          << "\n";
            } else {
                const auto v = quadrature::exp_integral_probe(d12, pr_N, pr_c, pr_levels, popt);
                std::cout << "k,log_increment\n";
                for (std::size_t i = 0; i < v.log_increments.size(); ++i)
                    std::cout << v.first_level + static_cast<int>(i) << "," << num(v.log_increments[i]) << "\n";
                std::cout << verdict_json(v).dump() << "\n";
            }
            return kOk;
        }

        if (solve->parsed()) {
            const auto field = parse_field(s_coeff);
            const auto g = fd::make_disc(1.0, 1.0 / mesh_of(s_h));
            const auto op = fd::assemble(field, g);
            const auto f = parse_scalar(s_rhs), bc = parse_scalar(s_bc);
            const auto fg = f ? fd::GridFunction::sample(g, f) : fd::GridFunction(g);
            const auto gg = bc ? fd::GridFunction::sample(g, bc) : fd::GridFunction(g);
            const auto sol = fd::solve_dirichlet(op, fg, gg);
            write_grid_function(sol.u, s_out);
            const double h = g->h();
            std::cout << json{{"coeff", field.name()},
                              {"h", h},
                              {"unknowns", g->num_unknowns()},
                              {"iterations", sol.stats.iterations},
                              {"residual", sol.stats.residual},
                              {"converged", sol.stats.converged},
                              {"w2p_norm", quadrature::discrete_w2p(sol.u, s_p, ex::full_region(h))},
                              {"f_lp_norm", adjoint::lp_norm(fg, s_p)}}
                             .dump(2)
                      << "\n";
            return kOk;
        }

        if (asolve->parsed() || aiter->parsed() || acont->parsed()) {
            const auto field = parse_field(a_coeff);
            const auto g = fd::make_disc(1.0, 1.0 / mesh_of(a_h));
            const auto op = fd::assemble(field, g);
            const auto eta = parse_scalar(a_eta);
            std::function<fd::Mat2(double, double)> phi;
            if (asolve->parsed()) {
                if (const auto pf = parse_scalar(a_phi))
                    phi = [pf](double x, double y) {
                        const double v = pf(x, y);
                        return fd::Mat2{v, 0.0, 0.0, v};
                    };
            }
            const auto psi = asolve->parsed() ? parse_scalar(a_psi) : adjoint::ScalarFn{};
            const auto data = adjoint::AdjointData::sample(*g, phi, eta, psi, a_p);
            const auto sol = adjoint::solve_adjoint(op, adjoint::assemble_adjoint_rhs(data, op, field), {}, a_p);
            if (asolve->parsed()) {
                write_grid_function(sol.v, a_out);
                std::cout << json{{"coeff", field.name()},
                                  {"h", g->h()},
                                  {"iterations", sol.stats.iterations},
                                  {"converged", sol.stats.converged},
                                  {"duality_residual", sol.duality_residual},
                                  {"norm", sol.norm_report}}
                                 .dump(2)
                          << "\n";
                return kOk;
            }
            adjoint::IterationConfig it;
            it.levels = a_levels;
            it.p = a_p;
            it.delta = a_delta == "auto" ? 0.0 : parse_number(a_delta, "--delta");
            const auto C = adjoint::induction_constant(it.M, it.harmonic_constant, a_p);
            if (aiter->parsed()) {
                const auto loc = adjoint::localize(sol.v, field, eta, 0.0, 0.0, a_rho, a_hloc);
                const auto seq = adjoint::dyadic_iteration(loc, it);
                std::cout << "k,scale,t,w_norm,omega,ratio,g_norm,g_bound,center_value,duality_residual\n";
                for (const auto& l : seq.levels)
                    std::cout << l.k << "," << num(l.scale) << "," << num(l.t) << "," << num(l.w_norm) << ","
                              << num(l.omega) << "," << num(l.w_ratio()) << "," << num(l.g_norm) << ","
                              << num(l.g_bound) << "," << num(l.center_value) << "," << num(l.duality_residual)
                              << "\n";
                std::cout << json{{"M", it.M},
                                  {"C(n,p)", it.harmonic_constant},
                                  {"C", C},
                                  {"delta", seq.delta},
                                  {"delta_auto", adjoint::select_delta(loc.omega, it.M, C, a_p)},
                                  {"delta_bar", seq.rescale.delta_bar},
                                  {"ratio_spread", seq.ratio_spread()},
                                  {"truncated", seq.truncated},
                                  {"notice", seq.notice}}
                                 .dump()
                          << "\n";
                return kOk;
            }
            std::vector<std::array<double, 2>> centers{{0.0, 0.0}, {1.0 / 64, 0.0}, {-1.0 / 128, 1.0 / 128}};
            if (!a_centers.empty()) {
                centers.clear();
                std::ifstream in(a_centers);
                if (!in) throw PreconditionError("cannot open " + a_centers);
                for (std::string line; std::getline(in, line);) {
                    const auto comma = line.find(',');
                    if (line.empty() || comma == std::string::npos) continue;
                    try {
                        centers.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
                    } catch (const std::exception&) {
                        // header line
                    }
                }
            }
            adjoint::ContinuityConfig cc;
            cc.rho = a_rho;
            cc.h_local = a_hloc;
            cc.iteration = it;
            json summary = json::array();
            std::cout << "center,x,y,r,oscillation,sigma\n";
            for (std::size_t i = 0; i < centers.size(); ++i) {
                const auto e = adjoint::continuity_estimate(sol.v, field, eta, centers[i][0], centers[i][1], cc);
                for (std::size_t j = 0; j < e.radii.size(); ++j)
                    std::cout << i << "," << num(e.cx) << "," << num(e.cy) << "," << num(e.radii[j]) << ","
                              << num(e.oscillation[j]) << "," << num(e.sigma[j]) << "\n";
                summary.push_back({{"x", e.cx},
                                   {"y", e.cy},
                                   {"limit_value", e.limit_value},
                                   {"fitted_C", e.fitted_C},
                                   {"fit_residual", e.fit_residual},
                                   {"monotone", e.monotone},
                                   {"decay_ratio", e.decay_ratio},
                                   {"partial", e.partial}});
            }
            std::cout << json{{"M", it.M}, {"C", C}, {"centers", summary}}.dump() << "\n";
            return kOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}
