// Acceptance run on the default 2001 x 1001 grid. Prints one PASS/FAIL line
// per criterion; an optional argument restricts the run to one criterion.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "abdeform/abdeform.hpp"
#include "cli.hpp"

using namespace abdeform;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        detail << (ok ? "" : "!") << what << "; ";
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Grid default_grid() { return Grid::defaults(); }

// Largest |a - b| over nodes at least `band` away from the boundary, skipping
// nodes flagged in `skip` (where the deformation functions are undefined).
double interior_gap(const ComplexField& a, const ComplexField& b, const std::vector<unsigned char>& skip,
                    int band = 2) {
    const Grid& g = a.grid();
    double m = 0.0;
    for (int j = band; j < g.nt() - band; ++j)
        for (int i = band; i < g.nx() - band; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * g.nx() + i;
            if (!skip[k]) m = std::max(m, std::abs(a[k] - b[k]));
        }
    return m;
}

// ---------------------------------------------------------------------------

Outcome exact_solutions() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g = default_grid();
    {
        const auto r = ab_residuals(one_soliton(g, 1.5, 0.0));
        o.require(r.r1_norm <= 1e-6 && r.r2_norm <= 1e-6,
                  "one_soliton r1=" + fmt(r.r1_norm) + " r2=" + fmt(r.r2_norm));
        o.require(r.norm_residual <= 1e-6, "one_soliton normalization=" + fmt(r.norm_residual));
    }
    {
        const auto r = ab_residuals(two_soliton(g, 1.1, 1.0, 0.0, 0.0));
        o.require(r.r1_norm <= 1e-4 && r.r2_norm <= 1e-4,
                  "two_soliton r1=" + fmt(r.r1_norm) + " r2=" + fmt(r.r2_norm));
    }
    {
        const auto r = ab_residuals(sg_map(sg_kink_psi(g)));
        o.require(r.r1_norm <= 1e-6 && r.r2_norm <= 1e-6,
                  "sg_kink r1=" + fmt(r.r1_norm) + " r2=" + fmt(r.r2_norm));
    }
    const double dt = seconds_since(t0);
    o.require(dt <= 30.0, "runtime=" + fmt(dt) + "s");
    return o;
}

Outcome zero_curvature() {
    Outcome o;
    const Grid g = default_grid();
    const AbSolution s = one_soliton(g, 1.5);
    for (cplx lam : default_lambdas()) {
        const double r = curvature_residual(s, lam);
        std::ostringstream name;
        name << "lambda=" << lam.real() << (lam.imag() >= 0 ? "+" : "") << lam.imag() << "i";
        o.require(r <= 1e-5, name.str() + " F=" + fmt(r));
    }
    // orders over two refinements ending at the default grid
    const Grid g1 = g.coarsened().coarsened(), g2 = g.coarsened();
    for (cplx lam : {cplx(1.0), cplx(0.5, 0.5)}) {
        const double e1 = curvature_residual(one_soliton(g1, 1.5), lam);
        const double e2 = curvature_residual(one_soliton(g2, 1.5), lam);
        const double e3 = curvature_residual(s, lam);
        const double p1 = observed_order(e1, e2), p2 = observed_order(e2, e3);
        o.require(p1 >= 3.5 && p2 >= 3.5, "order(lambda=" + fmt(lam.real()) + (lam.imag() ? "+0.5i" : "") +
                                              ")=" + fmt(p1) + "," + fmt(p2));
    }
    return o;
}

Outcome nhd_values() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g = default_grid();
    {
        const auto r = nhd_from_ansatz(one_soliton(g, 1.5).A);
        const auto c = nhd_closed_forms(g, {NhdCase::OneSoliton, 1.5, 0.0});
        const double dv = interior_gap(r.v2, c.v2, r.singular), du = interior_gap(r.u2, c.u2, r.singular),
                     db = interior_gap(r.beta_d, c.beta_d, r.singular);
        o.require(std::max({dv, du, db}) <= 1e-4,
                  "one_soliton |dv2|=" + fmt(dv) + " |du2|=" + fmt(du) + " |dbeta|=" + fmt(db));
        o.require(r.classification == NhdClass::LocalizedValid,
                  std::string("one_soliton ") + to_string(r.classification));
    }
    {
        const double a = 1.5;
        const auto r = nhd_from_ansatz(kink_ansatz(g, a));
        const auto c = nhd_closed_forms(g, {NhdCase::Kink, a, 0.0});
        const double dv = interior_gap(r.v2, c.v2, r.singular), du = interior_gap(r.u2, c.u2, r.singular),
                     db = interior_gap(r.beta_d, c.beta_d, r.singular);
        o.detail << "(" << r.diag.guarded_nodes << " guarded nodes) ";
        o.require(std::max({dv, du, db}) <= 1e-4,
                  "kink |dv2|=" + fmt(dv) + " |du2|=" + fmt(du) + " |dbeta|=" + fmt(db));
        const double b00 = r.beta_d(g.cx(), g.ct()).real();
        o.require(std::abs(std::abs(b00) - std::numbers::pi * std::numbers::pi / (2 * a * a)) <= 1e-4,
                  "kink beta(0,0)=" + fmt(b00));
        o.require(r.classification == NhdClass::LocalizedValid, std::string("kink ") + to_string(r.classification));
        const auto p = nhd_kink_variant_forms(g, a, 0.0);
        o.detail << "(variant kink forms: |du2|=" << fmt(interior_gap(r.u2, p.u2, r.singular))
                 << " |dbeta|=" << fmt(interior_gap(r.beta_d, p.beta_d, r.singular)) << ") ";
    }
    {
        const auto r = nhd_from_ansatz(two_soliton(g, 1.1, 1.0).A);
        o.require(r.classification == NhdClass::SingularDeformation,
                  std::string("two_soliton ") + to_string(r.classification) +
                      " u2 ratio=" + fmt(r.diag.singular_ratio));
    }
    for (auto br : {KinkBranch::KK, KinkBranch::KAK}) {
        const auto r = nhd_from_ansatz(kk_kak_ansatz(g, 2.0, br));
        o.require(r.classification != NhdClass::LocalizedValid,
                  std::string(br == KinkBranch::KK ? "kk " : "kak ") + to_string(r.classification));
    }
    const double dt = seconds_since(t0);
    o.require(dt <= 60.0, "runtime=" + fmt(dt) + "s");
    return o;
}

Outcome nhd_constraints() {
    Outcome o;
    const Grid g = default_grid();
    auto check = [&](const std::string& name, const ComplexField& Ad) {
        const auto r = nhd_from_ansatz(Ad);
        const auto c = nhd_constraint_residuals(r, Ad);
        o.require(c.at("constraint_u2") <= 1e-4 && c.at("constraint_w2") <= 1e-4,
                  name + " u2-constraint=" + fmt(c.at("constraint_u2")) +
                      " w2-constraint=" + fmt(c.at("constraint_w2")));
    };
    check("one_soliton", one_soliton(g, 1.5).A);
    check("kink", kink_ansatz(g, 1.5));

    ComplexField noisy = one_soliton(g, 1.5).A;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (std::size_t k = 0; k < noisy.size(); ++k) noisy[k] += cplx(u(rng), u(rng));
    const auto rn = nhd_from_ansatz(noisy);
    const auto cn = nhd_constraint_residuals(rn, noisy);
    o.require(cn.at("constraint_u2") >= 0.1 && cn.at("constraint_w2") >= 0.1,
              "noise control u2-constraint=" + fmt(cn.at("constraint_u2")) +
                  " w2-constraint=" + fmt(cn.at("constraint_w2")));
    return o;
}

Outcome abelianization() {
    Outcome o;
    const Grid g = default_grid();
    const AbSolution s = one_soliton(g, 1.5);
    const auto rep = verify_abelianization(s);
    double img = 0.0, dev = 0.0;
    for (int n = 0; n >= -3; --n) img = std::max(img, rep.image_norm.at(n));
    for (int n = 1; n >= -4; --n) dev = std::max(dev, rep.kernel_deviation.at(n));
    o.require(img <= 1e-4, "image norm (grades 0..-3)=" + fmt(img));
    o.require(dev <= 1e-4, "kernel deviation (grades 1..-4)=" + fmt(dev));

    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> ri(2, g.nx() - 3), rj(0, g.nt() - 1);
    double gap = 0.0;
    for (int k = 0; k < 50; ++k) {
        const int i = ri(rng), j = rj(rng);
        const auto jets = apm_row(s.A.row(j), g.hx(), 1.0);
        const LoopElement J = gauge_exponent(gauge_coeffs_at(jets[i], 1.0), 1.0);
        const LoopElement rot = bch_conjugate(LoopElement::basis(LoopElement::B, -1), J, 6);
        const CurvatureNode c = curvature_coeffs_at(jets[i], 1.0);
        for (int n = 1; n <= 4; ++n) {
            gap = std::max(gap, std::abs(rot.get(LoopElement::B, -n) - c.f0[n]));
            gap = std::max(gap, std::abs(rot.get(LoopElement::F1, -n) - c.f1[n]));
            gap = std::max(gap, std::abs(rot.get(LoopElement::F2, -n) - c.f2[n]));
        }
    }
    o.require(gap <= 1e-8, "conjugated b^-1 vs closed form at 50 nodes=" + fmt(gap));
    return o;
}

Outcome charge_conservation() {
    Outcome o;
    const Grid g = default_grid();
    const AbSolution s = one_soliton(g, 1.5);
    const auto series = charges(s, {1, 3, 4});
    const int j0 = g.ct();
    const int jlo = j0 - static_cast<int>(std::lround(2.0 / g.ht()));
    const int jhi = j0 + static_cast<int>(std::lround(2.0 / g.ht()));
    for (const auto& cs : series) {
        double drift = 0.0;
        for (int j = jlo; j <= jhi; ++j) drift = std::max(drift, std::abs(cs.q_of_t[j] - cs.q_of_t[j0]));
        const double scale = std::abs(cs.q_of_t[j0]);
        const double rel = scale > 1e-12 ? drift / scale : drift;
        o.require(rel <= 1e-6, "Q^-" + std::to_string(cs.n) + " drift=" + fmt(rel) +
                                   (scale > 1e-12 ? "" : " (absolute, Q=0)"));
    }
    const cplx q1 = series.front().q_of_t[j0];
    o.require(std::abs(q1 - cplx(0.0, -1.5)) <= 1e-6,
              "Q^-1=" + fmt(q1.real()) + (q1.imag() < 0 ? "" : "+") + fmt(q1.imag()) + "i");
    bool zero = true;
    std::vector<cplx> beta, f0;
    for (int j = 0; j < g.nt() && zero; ++j) {
        charge_densities(s.A.row(j), g.hx(), 1.0, 2, beta, f0);
        for (const cplx& z : f0) zero = zero && z == cplx(0.0);
    }
    o.require(zero, std::string("f0^-2 identically zero=") + (zero ? "yes" : "no"));
    return o;
}

Outcome qid_first_order() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g = default_grid();
    const double gh = 1.5;
    const AbSolution base = one_soliton(g, gh);
    QidConfig cfg;
    cfg.epsilon = 0.1;
    const QidRun run = qid_solution(base, cfg);

    const double plug = interior_l2(first_order_residual(base, run.a1_field)) / interior_l2(first_order_rhs(base));
    o.require(plug <= 1e-3, "plug-back=" + fmt(plug));

    // anomaly remainder at eps and eps/2
    auto remainder = [&](double eps) {
        QidConfig c = cfg;
        c.epsilon = eps;
        const QidRun r = qid_solution(base, c);
        return interior_l2(anomaly(r.deformed()) - r.anomaly1 * cplx(eps));
    };
    const double e1 = remainder(0.1), e2 = remainder(0.05);
    const double order = observed_order(e1, e2);
    o.require(order >= 1.8, "anomaly remainder order=" + fmt(order));

    const double band = 3.0 * gh * g.hx();
    auto keep = [&](int i, int j) { return std::abs(gh * g.x(i) + g.t(j) / gh) > band; };
    const auto sp = parity_split(run.anomaly1);
    const auto pr = parity_report(sp.even, sp.odd, 1e-3, keep);
    o.require(pr.dominant == Dominance::Odd && pr.ratio <= 1e-3, "X1 parity " + std::string(to_string(pr.dominant)) +
                                                                     " ratio=" + fmt(pr.ratio));

    const QidReport rep = qid_report(run);
    for (const auto& b : rep.balance) {
        if (b.n == 2) continue;
        o.require(b.relative <= 1e-2, "balance n=" + std::to_string(b.n) + " mismatch=" + fmt(b.relative));
    }
    for (int n : {1, 3, 4})
        o.require(rep.first_order.at(n).ratio <= 1e-3,
                  "one_soliton |S|/R n=" + std::to_string(n) + "=" + fmt(rep.first_order.at(n).ratio));

    const AbSolution two = two_soliton(g, 1.1, 1.0);
    const ComplexField chi2 = anomaly_first_order(two.B) * cplx(cfg.epsilon);
    const auto even3 = asymptotic_conservation(two.A, chi2, 3);
    o.require(even3.ratio <= 1e-3, "two_soliton |S|/R n=3=" + fmt(even3.ratio));

    const AbSolution shifted = two_soliton(g, 1.1, 1.0, 1.0, 0.0);
    const ComplexField chis = anomaly_first_order(shifted.B) * cplx(cfg.epsilon);
    const auto odd3 = asymptotic_conservation(shifted.A, chis, 3);
    o.require(odd3.status == ConservationStatus::NotProtected && odd3.ratio >= 0.1,
              "shifted two_soliton |S|/R n=3=" + fmt(odd3.ratio) + " " + to_string(odd3.status));

    const double dt = seconds_since(t0);
    o.require(dt <= 300.0, "runtime=" + fmt(dt) + "s");
    return o;
}

// Reads one named column of a CSV written by the figure command.
std::vector<double> csv_column(const std::filesystem::path& file, const std::string& name) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) head.push_back(cell);
    }
    const auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end()) throw std::runtime_error("column " + name + " missing in " + file.string());
    const auto col = static_cast<std::size_t>(it - head.begin());
    std::vector<double> out;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t k = 0; k <= col; ++k) std::getline(ss, cell, ',');
        out.push_back(std::stod(cell));
    }
    return out;
}

double max_abs(const std::vector<double>& re, const std::vector<double>& im) {
    double m = 0.0;
    for (std::size_t k = 0; k < re.size(); ++k) m = std::max(m, std::hypot(re[k], im[k]));
    return m;
}

Outcome figure_data() {
    Outcome o;
    const auto dir = std::filesystem::temp_directory_path() / "abdeform_acceptance_figures";
    std::filesystem::remove_all(dir);
    std::ostringstream out, err;
    for (const char* which : {"f1sol", "f1", "f2", "f3", "f4"}) {
        const int code = cli::run({"figures", "--which", which, "--out", dir.string()}, out, err);
        const bool files = std::filesystem::exists(dir / (std::string(which) + ".csv")) &&
                           std::filesystem::exists(dir / (std::string(which) + ".plot"));
        o.require(code == 0 && files, std::string(which) + " exit=" + std::to_string(code));
    }
    if (!o.pass) {
        o.detail << err.str();
        return o;
    }
    const auto f3 = dir / "f3.csv";
    const double a0 = max_abs(csv_column(f3, "re_A0"), csv_column(f3, "im_A0"));
    const double x1 = max_abs(csv_column(f3, "re_X1"), csv_column(f3, "im_X1"));
    o.require(x1 < a0, "f3 max|X1|=" + fmt(x1) + " < max|A0|=" + fmt(a0));

    // A1 of the two-soliton panel: even part against odd part.
    const auto f4 = dir / "f4.csv";
    const auto xs = csv_column(f4, "x"), ts = csv_column(f4, "t");
    const auto re = csv_column(f4, "re_A1"), im = csv_column(f4, "im_A1");
    std::map<std::pair<long, long>, cplx> field;
    for (std::size_t k = 0; k < xs.size(); ++k)
        field[{std::lround(xs[k] * 1e6), std::lround(ts[k] * 1e6)}] = cplx(re[k], im[k]);
    double even = 0.0, odd = 0.0;
    for (const auto& [key, v] : field) {
        const auto mirror = field.find({-key.first, -key.second});
        if (mirror == field.end()) continue;
        even += std::norm(0.5 * (v + mirror->second));
        odd += std::norm(0.5 * (v - mirror->second));
    }
    const double ratio = even > 0.0 ? std::sqrt(odd / even) : INFINITY;
    o.require(ratio <= 0.1, "f4 A1 odd/even=" + fmt(ratio));
    std::filesystem::remove_all(dir);
    return o;
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "exact-solution suite", exact_solutions},
        {2, "zero curvature", zero_curvature},
        {3, "NHD deformation functions", nhd_values},
        {4, "NHD constraint residuals", nhd_constraints},
        {5, "abelianization", abelianization},
        {6, "undeformed charge conservation", charge_conservation},
        {7, "QID first order", qid_first_order},
        {8, "figure data", figure_data},
    };
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);
    bool ok = true;
    for (const auto& c : all) {
        if (only && c.id != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << "exception: " << e.what();
        }
        std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << ", "
                  << fmt(seconds_since(t0)) << "s): " << out.detail.str() << std::endl;
        ok = ok && out.pass;
    }
    return ok ? 0 : 1;
}
