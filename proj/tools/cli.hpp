// Command-line front end for abdeform. Kept in a header so that tests can
// drive the exact same dispatcher in-process.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "abdeform/abdeform.hpp"

namespace abdeform::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parsing helpers

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

inline double to_number(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw UsageError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw UsageError("not a number: '" + s + "'");
    return v;
}

inline Grid parse_grid(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 4) throw UsageError("--grid expects X,T,nx,nt");
    const double nx = to_number(parts[2]), nt = to_number(parts[3]);
    if (nx != std::floor(nx) || nt != std::floor(nt)) throw UsageError("--grid node counts must be integers");
    return Grid(to_number(parts[0]), to_number(parts[1]), static_cast<int>(nx), static_cast<int>(nt));
}

using Params = std::map<std::string, double>;

inline Params parse_params(const std::string& s) {
    Params p;
    for (const auto& kv : split(s, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("parameter '" + kv + "' is not key=value");
        p[kv.substr(0, eq)] = to_number(kv.substr(eq + 1));
    }
    return p;
}

inline std::pair<int, int> parse_stride(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 2) throw UsageError("--stride expects sx,st");
    const double a = to_number(parts[0]), b = to_number(parts[1]);
    if (a < 1 || b < 1 || a != std::floor(a) || b != std::floor(b))
        throw UsageError("--stride values must be positive integers");
    return {static_cast<int>(a), static_cast<int>(b)};
}

inline std::vector<cplx> parse_lambdas(const std::string& s) {
    std::vector<cplx> out;
    for (const auto& item : split(s, ';')) {
        const auto parts = split(item, ',');
        if (parts.size() != 2) throw UsageError("--lambda expects re,im[;re,im...]");
        out.emplace_back(to_number(parts[0]), to_number(parts[1]));
    }
    if (out.empty()) throw UsageError("--lambda is empty");
    return out;
}

// ---------------------------------------------------------------------------
// Named solutions and ansatz fields

struct Built {
    std::string name;
    Params params;
    std::optional<AbSolution> solution;  // absent for the pure ansatz fields
    ComplexField field;                  // A, or the ansatz A_d
};

inline Built build(const std::string& name, Params given, const Grid& g) {
    static const std::map<std::string, Params> defaults{
        {"one_soliton", {{"g", 1.5}, {"d", 0.0}}},
        {"two_soliton", {{"a1", 1.1}, {"a2", 1.0}, {"d1", 0.0}, {"d2", 0.0}}},
        {"kink", {{"a", 1.5}, {"d", 0.0}}},
        {"kk", {{"a", 2.0}}},
        {"kak", {{"a", 2.0}}},
        {"sg_kink", {{"a", 1.0}, {"d", 0.0}}},
    };
    const auto it = defaults.find(name);
    if (it == defaults.end()) throw UsageError("unknown solution '" + name + "'");
    Params p = it->second;
    for (const auto& [k, v] : given) {
        if (!p.count(k)) throw UsageError("unknown parameter '" + k + "' for " + name);
        p[k] = v;
    }
    Built b{name, p, std::nullopt, ComplexField(g)};
    if (name == "one_soliton") {
        b.solution = one_soliton(g, p["g"], p["d"]);
    } else if (name == "two_soliton") {
        b.solution = two_soliton(g, p["a1"], p["a2"], p["d1"], p["d2"]);
    } else if (name == "sg_kink") {
        b.solution = sg_map(sg_kink_psi(g, p["a"], p["d"]));
    } else if (name == "kink") {
        b.field = kink_ansatz(g, p["a"], p["d"]);
    } else {
        b.field = kk_kak_ansatz(g, p["a"], name == "kk" ? KinkBranch::KK : KinkBranch::KAK);
    }
    if (b.solution) b.field = b.solution->A;
    return b;
}

// "name:k=v,k=v" or just "name".
inline Built build_spec(const std::string& spec, const Grid& g) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    return build(name, colon == std::string::npos ? Params{} : parse_params(spec.substr(colon + 1)), g);
}

// ---------------------------------------------------------------------------
// Output

inline void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& body) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        body(os);
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

inline void write_json(const std::string& path, const json& j) {
    write_atomic(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

inline json grid_json(const Grid& g) {
    return {{"X", g.X()}, {"T", g.T()}, {"nx", g.nx()}, {"nt", g.nt()}};
}

inline json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json parity_json(const ParityReport& r) {
    return {{"dominant", to_string(r.dominant)}, {"ratio", r.ratio},
            {"even_norm", r.even_norm}, {"odd_norm", r.odd_norm}};
}

struct Verdicts {
    json checks = json::object();
    bool ok = true;

    void add(const std::string& name, bool pass) {
        checks[name] = pass ? "pass" : "fail";
        ok = ok && pass;
    }
};

// ---------------------------------------------------------------------------
// Shared state of one invocation

struct Context {
    Grid grid = Grid::defaults();
    double kappa = 1.0;
    double tol_scale = 1.0;
    std::string manifest_path;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
    std::string command;
    json parameters = json::object();
    Verdicts verdicts;

    void finish(const Verdicts& v, std::chrono::steady_clock::time_point t0) const {
        if (manifest_path.empty()) return;
        json m{{"schema", 1},
               {"command", command},
               {"parameters", parameters},
               {"grid", grid_json(grid)},
               {"tool_version", kVersion},
               {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
               {"verdicts", v.checks}};
        write_json(manifest_path, m);
    }
};

inline json report_head(const Context& c) {
    return {{"schema", 1}, {"command", c.command}, {"parameters", c.parameters},
            {"grid", grid_json(c.grid)}, {"kappa", c.kappa}};
}

inline void emit(const Context& c, const std::string& path, const json& report) {
    if (path.empty())
        *c.out << report.dump(2) << '\n';
    else
        write_json(path, report);
}

inline void write_fields(const std::string& path, const std::vector<std::pair<std::string, const ComplexField*>>& cols,
                         std::pair<int, int> stride) {
    write_atomic(path, [&](std::ostream& os) { write_csv(os, cols, stride.first, stride.second); });
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_solution(Context& c, const std::string& name, const std::string& params, const std::string& csv,
                        const std::string& jpath, std::pair<int, int> stride) {
    const Built b = build(name, parse_params(params), c.grid);
    c.parameters = {{"name", name}, {"params", b.params}};
    Verdicts v;
    json rep = report_head(c);
    if (b.solution) {
        const auto r = ab_residuals(*b.solution);
        rep["residuals"] = {{"r1", r.r1_norm}, {"r2", r.r2_norm}, {"r5", r.r5_norm}, {"normalization", r.norm_residual}};
        v.add("finite", b.solution->A.all_finite() && b.solution->B.all_finite());
        if (!csv.empty()) write_fields(csv, {{"A", &b.solution->A}, {"B", &b.solution->B}}, stride);
    } else {
        v.add("finite", b.field.all_finite());
        if (!csv.empty()) write_fields(csv, {{"A", &b.field}}, stride);
    }
    rep["verdicts"] = v.checks;
    c.verdicts = v;
    emit(c, jpath, rep);
    return v.ok ? kOk : kCheckFailed;
}

inline int cmd_verify(Context& c, const std::string& spec, const std::string& lambdas, const std::string& jpath) {
    const Built b = build_spec(spec, c.grid);
    if (!b.solution) throw UsageError("verify needs a solution with both A and B, not the ansatz '" + b.name + "'");
    const auto lams = lambdas.empty() ? std::vector<cplx>(default_lambdas().begin(), default_lambdas().end())
                                      : parse_lambdas(lambdas);
    c.parameters = {{"solution", b.name}, {"params", b.params}};
    const AbSolution& s = *b.solution;
    Verdicts v;
    json rep = report_head(c);
    json per = json::array();
    for (std::size_t k = 0; k < lams.size(); ++k) {
        const auto cr = curvature_components(s, lams[k]);
        per.push_back({{"lambda", cplx_json(lams[k])}, {"total", cr.total}, {"sigma3", cr.sigma3},
                       {"sigma_plus", cr.sigma_plus}, {"sigma_minus", cr.sigma_minus}});
        if (s.exact) v.add("curvature_" + std::to_string(k), cr.total <= 1e-5 * c.tol_scale);
    }
    rep["curvature"] = per;
    const auto r = ab_residuals(s);
    rep["residuals"] = {{"r1", r.r1_norm}, {"r2", r.r2_norm}, {"r5", r.r5_norm}, {"normalization", r.norm_residual}};
    rep["anomaly_norm"] = interior_l2(anomaly(s));
    rep["exact"] = s.exact;
    rep["verdicts"] = v.checks;
    c.verdicts = v;
    emit(c, jpath, rep);
    return v.ok ? kOk : kCheckFailed;
}

inline int cmd_nhd(Context& c, const std::string& ansatz, const std::string& params, const std::string& csv,
                   const std::string& jpath, std::pair<int, int> stride) {
    if (ansatz == "sg_kink") throw UsageError("nhd ansatz must be one_soliton, two_soliton, kink, kk or kak");
    const Built b = build(ansatz, parse_params(params), c.grid);
    c.parameters = {{"ansatz", ansatz}, {"params", b.params}};
    NhdReport r = nhd_from_ansatz(b.field);
    r.constraint_norms = nhd_constraint_residuals(r, b.field);
    json rep = report_head(c);
    rep["classification"] = to_string(r.classification);
    rep["diagnostics"] = {{"imag_ratio", r.diag.imag_ratio},     {"singular_ratio", r.diag.singular_ratio},
                          {"edge_ratio", r.diag.edge_ratio},     {"u2_route_gap", r.diag.u2_route_gap},
                          {"guarded_nodes", r.diag.guarded_nodes}, {"all_finite", r.diag.all_finite}};
    rep["constraints"] = r.constraint_norms;
    rep["verdicts"] = json::object();
    if (!csv.empty())
        write_fields(csv, {{"v2", &r.v2}, {"u2", &r.u2}, {"beta", &r.beta_d}}, stride);
    emit(c, jpath, rep);
    return kOk;
}

inline json qid_json(const QidRun& run, const QidReport& rep, double plug) {
    json charges = json::array();
    for (const auto& b : rep.balance) {
        const auto& fo = rep.first_order.at(b.n);
        charges.push_back({{"n", b.n},
                           {"verdict", to_string(rep.verdict.at(b.n))},
                           {"first_order_ratio", fo.ratio},
                           {"first_order_status", to_string(fo.status)},
                           {"full_ratio", rep.full.at(b.n).ratio},
                           {"balance_relative", b.relative},
                           {"balance_max_mismatch", b.max_mismatch}});
    }
    json par = json::object();
    for (const auto& [k, p] : rep.parity) par[k] = parity_json(p);
    return {{"epsilon", run.epsilon},
            {"plug_back_relative", plug},
            {"perturbative_ok", run.perturbative_ok},
            {"max_abs_A1", run.a1_field.max_abs()},
            {"anomaly_remainder_relative", rep.anomaly_remainder},
            {"charges", charges},
            {"parity", par},
            {"solver", {{"initial_condition", "A1(x,0) = 0"},
                        {"boundary", "dA1/dt = 0 at x = +X for t > 0 and at x = -X for t < 0"},
                        {"anomaly_theta0", "first-order anomaly set to 0 on theta = 0"}}}};
}

inline int cmd_qid(Context& c, const std::string& base, const std::string& params, double eps,
                   const std::string& csv, const std::string& jpath, std::pair<int, int> stride) {
    if (base != "one_soliton" && base != "two_soliton") throw UsageError("--base must be one_soliton or two_soliton");
    const Built b = build(base, parse_params(params), c.grid);
    c.parameters = {{"base", base}, {"params", b.params}, {"epsilon", eps}};
    QidConfig cfg;
    cfg.epsilon = eps;
    const QidRun run = qid_solution(*b.solution, cfg);
    const double plug = eps > 0.0 ? interior_l2(first_order_residual(run.base, run.a1_field)) /
                                        interior_l2(first_order_rhs(run.base))
                                  : 0.0;
    const QidReport rep = qid_report(run, c.kappa);
    Verdicts v;
    v.add("plug_back", plug <= 1e-3 * c.tol_scale);
    json j = report_head(c);
    j.update(qid_json(run, rep, plug));
    if (!run.perturbative_ok) j["warning"] = "eps max|A1| exceeds max|A0|";
    j["verdicts"] = v.checks;
    c.verdicts = v;
    if (!csv.empty())
        write_fields(csv, {{"A", &run.A}, {"B", &run.B}, {"A1", &run.a1_field}, {"X1", &run.anomaly1}}, stride);
    emit(c, jpath, j);
    return v.ok ? kOk : kCheckFailed;
}

inline int cmd_charges(Context& c, const std::string& spec, const std::string& nlist, double window,
                       const std::string& csv, const std::string& jpath) {
    const Built b = build_spec(spec, c.grid);
    if (!b.solution) throw UsageError("charges need a solution with both A and B");
    std::vector<int> ns;
    for (const auto& s : split(nlist, ',')) {
        const double n = to_number(s);
        if (n != std::floor(n)) throw UsageError("--n takes integers");
        ns.push_back(static_cast<int>(n));
    }
    if (!(window > 0.0)) throw UsageError("--window must be positive");
    c.parameters = {{"solution", b.name}, {"params", b.params}, {"n", ns}, {"window", window}};
    const auto series = charges(*b.solution, ns, c.kappa);
    const Grid& g = c.grid;
    Verdicts v;
    json rep = report_head(c);
    json arr = json::array();
    for (const auto& cs : series) {
        const cplx q0 = cs.q_of_t[g.ct()];
        double drift = 0.0;
        for (int j = 0; j < g.nt(); ++j)
            if (std::abs(g.t(j)) <= window) drift = std::max(drift, std::abs(cs.q_of_t[j] - q0));
        const double rel = drift / std::max(1.0, std::abs(q0));
        arr.push_back({{"n", cs.n}, {"q_at_t0", cplx_json(q0)}, {"drift", rel}});
        if (b.solution->exact) v.add("conserved_" + std::to_string(cs.n), rel <= 1e-6 * c.tol_scale);
    }
    rep["charges"] = arr;
    // charge leaving through x = +-X shows up as drift; report how much of
    // the solution reaches the edges inside the window
    double edge = 0.0;
    for (int j = 0; j < g.nt(); ++j)
        if (std::abs(g.t(j)) <= window)
            edge = std::max({edge, std::abs(b.solution->A(0, j)), std::abs(b.solution->A(g.nx() - 1, j))});
    rep["edge_amplitude"] = edge;
    if (!v.ok && edge > 1e-6)
        rep["hint"] = "the solution has not decayed at x = +-X; widen the grid or narrow --window";
    rep["verdicts"] = v.checks;
    c.verdicts = v;
    if (!csv.empty())
        write_atomic(csv, [&](std::ostream& os) {
            os << "t,n,re_q,im_q,re_flux,im_flux\n";
            os.precision(17);
            for (int j = 0; j < g.nt(); ++j)
                for (const auto& cs : series)
                    os << g.t(j) << ',' << cs.n << ',' << cs.q_of_t[j].real() << ',' << cs.q_of_t[j].imag() << ','
                       << cs.flux_of_t[j].real() << ',' << cs.flux_of_t[j].imag() << '\n';
        });
    emit(c, jpath, rep);
    return v.ok ? kOk : kCheckFailed;
}

// Plain gnuplot script for a figure CSV: one surface per named column.
inline std::string plot_script(const std::string& which, const std::vector<std::string>& names,
                               const std::string& title) {
    std::ostringstream s;
    s << "# " << title << "\n"
      << "set datafile separator ','\n"
      << "set xlabel 'x'\nset ylabel 't'\n"
      << "set pm3d map\n"
      << "set terminal pngcairo size 1200,900\n"
      << "set output '" << which << ".png'\n"
      << "set multiplot layout 2," << (names.size() + 1) / 2 << " title '" << title << "'\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
        const std::size_t re = 3 + 2 * k, im = re + 1;
        s << "set title '|" << names[k] << "|'\n"
          << "splot '" << which << ".csv' every ::1 using 1:2:(sqrt($" << re << "**2+$" << im
          << "**2)) notitle\n";
    }
    s << "unset multiplot\n";
    return s.str();
}

inline std::pair<int, int> figure_stride(const Grid& g) {
    return {std::max(1, (g.nx() - 1) / 200), std::max(1, (g.nt() - 1) / 100)};
}

inline int cmd_figures(Context& c, const std::string& which, const std::string& dir) {
    c.parameters = {{"which", which}};
    const Grid& g = c.grid;
    const auto stride = figure_stride(g);
    const std::string base = (std::filesystem::path(dir) / which).string();
    Verdicts v;
    json rep = report_head(c);
    std::vector<std::pair<std::string, const ComplexField*>> cols;
    std::string title;

    auto nhd_panel = [&](const ComplexField& Ad, NhdClass expected) {
        NhdReport r = nhd_from_ansatz(Ad);
        rep["classification"] = to_string(r.classification);
        v.add("classification", r.classification == expected);
        const std::vector<std::pair<std::string, const ComplexField*>> c4{
            {"Ad", &Ad}, {"v2", &r.v2}, {"u2", &r.u2}, {"beta", &r.beta_d}};
        write_fields(base + ".csv", c4, stride);
    };

    if (which == "f1sol") {
        title = "one-soliton ansatz: A_d, v2, u2, beta_d";
        nhd_panel(one_soliton(g, 1.5).A, NhdClass::LocalizedValid);
        cols = {{"Ad", nullptr}, {"v2", nullptr}, {"u2", nullptr}, {"beta", nullptr}};
    } else if (which == "f1") {
        title = "two-soliton ansatz: A_d, v2, u2, beta_d";
        nhd_panel(two_soliton(g, 1.1, 1.0).A, NhdClass::SingularDeformation);
        cols = {{"Ad", nullptr}, {"v2", nullptr}, {"u2", nullptr}, {"beta", nullptr}};
    } else if (which == "f2") {
        title = "kink ansatz: A_d, v2, u2, beta_d";
        nhd_panel(kink_ansatz(g, 1.5), NhdClass::LocalizedValid);
        cols = {{"Ad", nullptr}, {"v2", nullptr}, {"u2", nullptr}, {"beta", nullptr}};
    } else if (which == "f3" || which == "f4") {
        const bool one = which == "f3";
        title = one ? "QID one-soliton (eps = 0.5)" : "QID two-soliton (eps = 0.1)";
        const AbSolution s = one ? one_soliton(g, 1.5) : two_soliton(g, 1.1, 1.0);
        QidConfig cfg;
        cfg.epsilon = one ? 0.5 : 0.1;
        const QidRun run = qid_solution(s, cfg);
        const auto& b = run.base;
        const std::vector<std::pair<std::string, const ComplexField*>> fields{
            {"A0", &b.A}, {"B0", &b.B}, {"X1", &run.anomaly1}, {"A1", &run.a1_field}, {"A", &run.A}, {"B", &run.B}};
        write_fields(base + ".csv", fields, stride);
        cols = fields;
        if (one) {
            const double x1 = run.anomaly1.max_abs(), a0 = b.A.max_abs();
            rep["max_abs_X1"] = x1;
            rep["max_abs_A0"] = a0;
            v.add("anomaly_subdominant", x1 < a0);
        } else {
            const auto p = parity_split(run.a1_field).report;
            rep["A1_parity"] = parity_json(p);
            v.add("A1_even", p.dominant == Dominance::Even && p.ratio <= 0.1);
        }
        rep["perturbative_ok"] = run.perturbative_ok;
    } else {
        throw UsageError("--which must be one of f1sol, f1, f2, f3, f4");
    }
    std::vector<std::string> names;
    for (const auto& [n, f] : cols) names.push_back(n);
    const std::string script = plot_script(which, names, title);
    write_atomic(base + ".plot", [&](std::ostream& os) { os << script; });
    rep["verdicts"] = v.checks;
    c.verdicts = v;
    write_json(base + ".json", rep);
    return v.ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// Dispatcher

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Numerical toolkit for the AB system: exact solutions, Lax curvature, "
                 "non-holonomic and quasi-integrable deformations."};
    app.name("abdeform");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string grid_s = "10,5,2001,1001", manifest;
    double kappa = 1.0, tol_scale = 1.0;
    app.add_option("--grid", grid_s, "Grid as X,T,nx,nt")->capture_default_str();
    app.add_option("--kappa", kappa, "Reality sign kappa (1 or -1)")->capture_default_str();
    app.add_option("--tol-scale", tol_scale, "Multiplier applied to every asserted tolerance")->capture_default_str();
    app.add_option("--manifest", manifest, "Write a run manifest (JSON, with wall time) to this file");

    std::string name, params, csv, jpath, stride_s = "1,1", spec, lambdas, nlist = "1,2,3,4", which, dir;
    double eps = 0.1, window = 2.0;

    auto* sol = app.add_subcommand("solution", "Evaluate a named solution or ansatz on the grid");
    sol->add_option("--name", name, "one_soliton | two_soliton | kink | kk | kak | sg_kink")->required();
    sol->add_option("--params", params, "k=v,... (one_soliton: g=1.5,d=0; two_soliton: a1=1.1,a2=1,d1=0,d2=0; "
                                        "kink: a=1.5,d=0; kk/kak: a=2; sg_kink: a=1,d=0)");
    sol->add_option("--out", csv, "CSV file with columns x,t,re_A,im_A[,re_B,im_B]");
    sol->add_option("--json", jpath, "JSON report (stdout if omitted)");
    sol->add_option("--stride", stride_s, "Output every sx-th x node and st-th t node, as sx,st")->capture_default_str();

    auto* ver = app.add_subcommand("verify", "Zero-curvature and equation residuals of a solution");
    ver->add_option("--solution", spec, "Solution spec, e.g. one_soliton:g=1.5,d=0")->required();
    ver->add_option("--lambda", lambdas, "Spectral parameters re,im[;re,im...] (default 1,0;0,1;0.5,0.5;2,0)");
    ver->add_option("--json", jpath, "JSON report (stdout if omitted)");

    auto* nhd = app.add_subcommand("nhd", "Non-holonomic deformation functions for an ansatz");
    nhd->add_option("--ansatz", name, "one_soliton | two_soliton | kink | kk | kak")->required();
    nhd->add_option("--params", params, "k=v,... as for the solution command");
    nhd->add_option("--csv", csv, "CSV with columns x,t,re_v2,im_v2,re_u2,im_u2,re_beta,im_beta");
    nhd->add_option("--json", jpath, "JSON report (stdout if omitted)");
    nhd->add_option("--stride", stride_s, "Output stride sx,st")->capture_default_str();

    auto* qid = app.add_subcommand("qid", "First-order quasi-integrable deformation of a soliton solution");
    qid->add_option("--base", name, "one_soliton | two_soliton")->required();
    qid->add_option("--params", params, "k=v,... as for the solution command");
    qid->add_option("--epsilon", eps, "Deformation parameter")->capture_default_str();
    qid->add_option("--csv", csv, "CSV with A, B, A1 and X1 columns");
    qid->add_option("--json", jpath, "JSON report (stdout if omitted)");
    qid->add_option("--stride", stride_s, "Output stride sx,st")->capture_default_str();

    auto* chg = app.add_subcommand("charges", "Quasi-conserved charges and anomaly fluxes");
    chg->add_option("--solution", spec, "Solution spec, e.g. one_soliton:g=1.5")->required();
    chg->add_option("--n", nlist, "Charge indices")->capture_default_str();
    chg->add_option("--window", window, "Conservation is asserted for |t| <= window")->capture_default_str();
    chg->add_option("--csv", csv, "CSV with columns t,n,re_q,im_q,re_flux,im_flux");
    chg->add_option("--json", jpath, "JSON report (stdout if omitted)");

    auto* fig = app.add_subcommand("figures", "Write the data and a gnuplot script for one figure group");
    fig->add_option("--which", which, "f1sol | f1 | f2 | f3 | f4")->required();
    fig->add_option("--out", dir, "Output directory")->required();

    for (auto* sub : {sol, ver, nhd, qid, chg, fig}) sub->fallthrough();

    std::vector<std::string> rev(argv.rbegin(), argv.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "abdeform: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    const auto t0 = std::chrono::steady_clock::now();
    Context c;
    c.out = &out;
    c.err = &err;
    c.manifest_path = manifest;
    try {
        c.grid = parse_grid(grid_s);
        if (kappa != 1.0 && kappa != -1.0) throw UsageError("--kappa must be 1 or -1");
        if (!(tol_scale > 0.0)) throw UsageError("--tol-scale must be positive");
        c.kappa = kappa;
        c.tol_scale = tol_scale;
        const auto stride = parse_stride(stride_s);
        auto* sub = app.get_subcommands().front();
        c.command = sub->get_name();
        int code = kOk;
        if (sub == sol) code = cmd_solution(c, name, params, csv, jpath, stride);
        else if (sub == ver) code = cmd_verify(c, spec, lambdas, jpath);
        else if (sub == nhd) code = cmd_nhd(c, name, params, csv, jpath, stride);
        else if (sub == qid) code = cmd_qid(c, name, params, eps, csv, jpath, stride);
        else if (sub == chg) code = cmd_charges(c, spec, nlist, window, csv, jpath);
        else code = cmd_figures(c, which, dir);
        Verdicts v = c.verdicts;
        v.checks["exit"] = code;
        c.finish(v, t0);
        return code;
    } catch (const UsageError& e) {
        err << "abdeform: " << e.what() << '\n';
        return kUsage;
    } catch (const ParameterError& e) {
        err << "abdeform: " << e.what() << '\n';
        return kUsage;
    } catch (const DimensionError& e) {
        err << "abdeform: " << e.what() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        err << "abdeform: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "abdeform: " << e.what() << '\n';
        return kCheckFailed;
    }
}

}  // namespace abdeform::cli
