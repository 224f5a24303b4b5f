// Quasi-integrable deformation of the AB system.
//
// The sine-Gordon potential (1/16)(1 - cos psi) is replaced by
//     V_eps = (2/(2+eps)^2) tan^2(psi/4) (1 - |sin(psi/4)|^{2+eps})^2,
// i.e. B = 1 - 16 V_eps. To first order in eps, with s = sqrt(1 + B0) and
// l(B0) = (sqrt2 - s)^2 ln((sqrt2 - s)/(2 sqrt2)),
//     B = B0 + eps [1 - B0 + l(B0) - (1/2) dx^{-1}(A0 A1* + A0* A1)_t],
//     (d_x d_t - B0) A1 = A0 [1 + l(B0)],
// and the anomaly is eps X1 with X1 = -(i/4) d_x [1 - B0 + l(B0)].
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "laxcurv.hpp"
#include "loopalgebra.hpp"
#include "numerics.hpp"
#include "solutions.hpp"

namespace abdeform {

struct QidConfig {
    double epsilon = 0.1;
    int solver_substeps = 1;     // RK4 steps per grid row
    double log_floor = 1e-30;    // lower bound on the logarithm's argument
    double growth_limit = 1e6;   // max |A1| relative to max |right-hand side|
};

enum class PotentialMode { Exact, FirstOrder };

namespace detail {

inline double checked_b0(cplx z) {
    const double b = z.real();
    if (!(b >= -1.0 - 1e-8 && b <= 1.0 + 1e-8))
        throw DomainError("B0 outside [-1, 1]: the square root and logarithm are undefined");
    return std::clamp(b, -1.0, 1.0);
}

}  // namespace detail

// (sqrt2 - sqrt(1+B0))^2 ln((sqrt2 - sqrt(1+B0))/(2 sqrt2)), continuous at B0 = 1.
inline double log_term(double B0, double log_floor = 1e-30) {
    const double d = std::numbers::sqrt2 - std::sqrt(1.0 + B0);
    if (d <= 0.0) return 0.0;
    return d * d * std::log(std::max(d / (2.0 * std::numbers::sqrt2), log_floor));
}

// 1 - B0 + log_term(B0), the first-order shift of B per unit eps.
inline double potential_bracket(double B0, double log_floor = 1e-30) {
    return 1.0 - B0 + log_term(B0, log_floor);
}

inline ComplexField deformed_potential(const ComplexField& B0, double epsilon, PotentialMode mode,
                                       double log_floor = 1e-30) {
    if (!(epsilon >= 0.0)) throw ParameterError("deformed_potential: epsilon must be >= 0");
    ComplexField out(B0.grid());
    for (std::size_t k = 0; k < B0.size(); ++k) {
        const double b = detail::checked_b0(B0[k]);
        if (epsilon == 0.0) {
            out[k] = B0[k].real();
            continue;
        }
        if (mode == PotentialMode::FirstOrder) {
            out[k] = b + epsilon * potential_bracket(b, log_floor);
        } else {
            const double r2 = std::numbers::sqrt2;
            const double s = std::sqrt(1.0 + b);
            const double q = std::pow(std::max(0.0, (r2 - s) / (2.0 * r2)), 1.0 + 0.5 * epsilon);
            out[k] = 1.0 - 32.0 / ((2.0 + epsilon) * (2.0 + epsilon)) * (r2 - s) / (r2 + s) * (1.0 - q) * (1.0 - q);
        }
    }
    return out;
}

inline ComplexField sg_deformed_potential(const ComplexField& psi, double epsilon) {
    if (!(epsilon >= 0.0)) throw ParameterError("sg_deformed_potential: epsilon must be >= 0");
    ComplexField out(psi.grid());
    for (std::size_t k = 0; k < psi.size(); ++k) {
        const double q = psi[k].real() / 4.0;
        if (std::abs(std::cos(q)) < 1e-6) throw DomainError("sg_deformed_potential: tan(psi/4) pole");
        const double tn = std::tan(q);
        const double w = 1.0 - std::pow(std::abs(std::sin(q)), 2.0 + epsilon);
        out[k] = 2.0 / ((2.0 + epsilon) * (2.0 + epsilon)) * tn * tn * w * w;
    }
    return out;
}

// X1 = -(i/4) d_x [1 - B0 + l(B0)] by finite differences.
inline ComplexField anomaly_first_order(const ComplexField& B0, double log_floor = 1e-30) {
    ComplexField br(B0.grid());
    for (std::size_t k = 0; k < B0.size(); ++k) br[k] = potential_bracket(detail::checked_b0(B0[k]), log_floor);
    ComplexField out = differentiate(br, Axis::X);
    out *= -I / 4.0;
    return out;
}

// X1 for the one-soliton in closed form,
//   X1 = (i g/2) sech^2 th [2 tanh th + sgn(th)(1 - |tanh th|)(2 ln((1 - |tanh th|)/2) + 1)],
// set to 0 on th = 0 where the one-sided limits are +-(i g/2)(1 - 2 ln 2).
inline ComplexField anomaly_first_order_one_soliton(const Grid& g, double g_hat, double delta = 0.0) {
    return ComplexField::sample(g, [=](double x, double t) -> cplx {
        const double th = g_hat * x + t / g_hat + delta;
        if (th == 0.0) return 0.0;
        const double sech = 1.0 / std::cosh(th), tau = std::tanh(th);
        const double u = 1.0 - std::abs(tau);
        const double lg = u > 0.0 ? 2.0 * std::log(u / 2.0) + 1.0 : 0.0;
        return 0.5 * I * g_hat * sech * sech * (2.0 * tau + std::copysign(1.0, tau) * u * lg);
    });
}

namespace detail {

// Supplies base rows (A0, B0) at arbitrary times: closed form if available,
// otherwise 4-point Lagrange interpolation between grid rows.
class BaseRows {
public:
    explicit BaseRows(const AbSolution& s) : s_(s), g_(s.A.grid()), xs_(x_nodes(g_)) {}

    void at(double t, std::vector<cplx>& A, std::vector<cplx>& B) const {
        A.resize(g_.nx());
        B.resize(g_.nx());
        if (s_.row_eval) {
            s_.row_eval(t, xs_, A, B);
            return;
        }
        const double pos = (t + g_.ct() * g_.ht()) / g_.ht();
        int k0 = static_cast<int>(std::floor(pos)) - 1;
        k0 = std::clamp(k0, 0, g_.nt() - 4);
        const double u = pos - k0;
        double w[4];
        for (int a = 0; a < 4; ++a) {
            w[a] = 1.0;
            for (int b = 0; b < 4; ++b)
                if (b != a) w[a] *= (u - b) / static_cast<double>(a - b);
        }
        for (int i = 0; i < g_.nx(); ++i) {
            cplx a = 0.0, b = 0.0;
            for (int m = 0; m < 4; ++m) {
                a += w[m] * s_.A(i, k0 + m);
                b += w[m] * s_.B(i, k0 + m);
            }
            A[i] = a;
            B[i] = b;
        }
    }

private:
    const AbSolution& s_;
    Grid g_;
    std::vector<double> xs_;
};

}  // namespace detail

// Solves (d_x d_t - B0) A1 = A0 [1 + l(B0)] with A1(x, 0) = 0 by the method
// of lines: V = d_t A1 satisfies d_x V = B0 A1 + rhs and is recovered by an
// antiderivative in x, then A1 is advanced with classical RK4 from t = 0 to
// both ends. Marching towards +T, V is pinned to zero at x = +X; marching
// towards -T, at x = -X. The two choices are mirror images of each other,
// so an even base produces an even A1.
inline ComplexField solve_first_order(const AbSolution& base, const QidConfig& cfg = {}) {
    const Grid& g = base.A.grid();
    if (cfg.solver_substeps < 1) throw ParameterError("solver_substeps must be >= 1");
    detail::BaseRows rows(base);
    double rhs_scale = 0.0;
    for (std::size_t k = 0; k < base.A.size(); ++k) {
        const double b = detail::checked_b0(base.B[k]);
        rhs_scale = std::max(rhs_scale, std::abs(base.A[k] * (1.0 + log_term(b, cfg.log_floor))));
    }
    ComplexField A1(g);
    if (rhs_scale == 0.0) return A1;

    const int nx = g.nx();
    std::vector<cplx> a0, b0, f(nx);
    auto velocity = [&](double t, const std::vector<cplx>& a1, Anchor anchor) {
        rows.at(t, a0, b0);
        for (int i = 0; i < nx; ++i) {
            const double b = detail::checked_b0(b0[i]);
            f[i] = b0[i] * a1[i] + a0[i] * (1.0 + log_term(b, cfg.log_floor));
        }
        return cumulative_line(f, g.hx(), anchor);
    };

    for (int dir : {+1, -1}) {
        const Anchor anchor = dir > 0 ? Anchor::Right : Anchor::Left;
        std::vector<cplx> a(nx, 0.0), tmp(nx);
        const double h = dir * g.ht() / cfg.solver_substeps;
        for (int j = g.ct(); j + dir >= 0 && j + dir < g.nt(); j += dir) {
            double t = g.t(j);
            for (int sub = 0; sub < cfg.solver_substeps; ++sub) {
                const auto k1 = velocity(t, a, anchor);
                for (int i = 0; i < nx; ++i) tmp[i] = a[i] + 0.5 * h * k1[i];
                const auto k2 = velocity(t + 0.5 * h, tmp, anchor);
                for (int i = 0; i < nx; ++i) tmp[i] = a[i] + 0.5 * h * k2[i];
                const auto k3 = velocity(t + 0.5 * h, tmp, anchor);
                for (int i = 0; i < nx; ++i) tmp[i] = a[i] + h * k3[i];
                const auto k4 = velocity(t + h, tmp, anchor);
                for (int i = 0; i < nx; ++i) a[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                t += h;
            }
            double m = 0.0;
            bool finite = true;
            for (int i = 0; i < nx; ++i) {
                m = std::max(m, std::abs(a[i]));
                finite = finite && std::isfinite(a[i].real()) && std::isfinite(a[i].imag());
            }
            if (!finite || m > cfg.growth_limit * rhs_scale)
                throw SolverError("first-order solver diverged near t = " + std::to_string(g.t(j + dir)) +
                                  " (max |A1| = " + std::to_string(m) + ")");
            std::copy(a.begin(), a.end(), A1.row(j + dir).begin());
        }
    }
    return A1;
}

// (d_x d_t - B0) A1 - A0 [1 + l(B0)] evaluated with the finite-difference
// operators.
inline ComplexField first_order_residual(const AbSolution& base, const ComplexField& A1,
                                         double log_floor = 1e-30) {
    ComplexField r = differentiate(A1, Axis::XT);
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double b = detail::checked_b0(base.B[k]);
        r[k] -= base.B[k] * A1[k] + base.A[k] * (1.0 + log_term(b, log_floor));
    }
    return r;
}

inline ComplexField first_order_rhs(const AbSolution& base, double log_floor = 1e-30) {
    ComplexField r(base.A.grid());
    for (std::size_t k = 0; k < r.size(); ++k)
        r[k] = base.A[k] * (1.0 + log_term(detail::checked_b0(base.B[k]), log_floor));
    return r;
}

struct QidRun {
    AbSolution base;
    ComplexField a1_field;
    ComplexField A;
    ComplexField B;
    ComplexField anomaly1;
    double epsilon = 0.0;
    bool perturbative_ok = true;  // eps max|A1| <= max|A0|

    AbSolution deformed() const {
        AbSolution s{base.name + "_qid", A, B, base.params};
        s.params["epsilon"] = epsilon;
        s.a_real = base.a_real;
        return s;
    }
};

inline QidRun qid_solution(const AbSolution& base, const QidConfig& cfg = {}) {
    if (!(cfg.epsilon >= 0.0)) throw ParameterError("qid_solution: epsilon must be >= 0");
    const Grid& g = base.A.grid();
    QidRun run{base, ComplexField(g), base.A, base.B, anomaly_first_order(base.B, cfg.log_floor), cfg.epsilon};
    if (cfg.epsilon == 0.0) return run;
    run.a1_field = solve_first_order(base, cfg);
    const double eps = cfg.epsilon;
    ComplexField mix(g);
    for (std::size_t k = 0; k < g.size(); ++k)
        mix[k] = 2.0 * (base.A[k] * std::conj(run.a1_field[k])).real();
    const ComplexField back = antiderivative_x(differentiate(mix, Axis::T));
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double b0 = detail::checked_b0(base.B[k]);
        run.A[k] = base.A[k] + eps * run.a1_field[k];
        run.B[k] = base.B[k].real() + eps * (potential_bracket(b0, cfg.log_floor) - 0.5 * back[k].real());
    }
    run.perturbative_ok = eps * run.a1_field.max_abs() <= base.A.max_abs();
    return run;
}

enum class ChargeVerdict { LocallyConserved, AsymptoticallyConserved, NotProtected };

inline const char* to_string(ChargeVerdict v) {
    switch (v) {
        case ChargeVerdict::LocallyConserved: return "LocallyConserved";
        case ChargeVerdict::AsymptoticallyConserved: return "AsymptoticallyConserved";
        default: return "NotProtected";
    }
}

struct QidReport {
    std::vector<ChargeSeries> series;                  // n = 1..4 on (A, B)
    std::vector<BalanceEntry> balance;                 // n = 1..4
    std::map<int, AsymptoticReport> first_order;       // eps X1 against f0 of the base
    std::map<int, AsymptoticReport> full;              // anomaly of (A, B) against f0 of A
    std::map<std::string, ParityReport> parity;
    std::map<int, ChargeVerdict> verdict;
    double anomaly_remainder = 0.0;  // ||X(A,B) - eps X1|| / ||eps X1||
};

inline QidReport qid_report(const QidRun& run, double kappa = 1.0, int band = 2) {
    QidReport rep;
    const AbSolution def = run.deformed();
    const ComplexField chi = anomaly(def);
    const std::vector<int> ns{1, 2, 3, 4};
    rep.series = charges(def.A, chi, ns, kappa);
    rep.balance = charge_balance(def.A, chi, ns, kappa, band);

    const ComplexField chi1 = run.anomaly1 * cplx(run.epsilon);
    for (int n : ns) {
        rep.first_order[n] = asymptotic_conservation(run.base.A, chi1, n, kappa);
        rep.full[n] = asymptotic_conservation(def.A, chi, n, kappa);
    }
    rep.parity["re_A"] = parity_split(real_part(def.A)).report;
    rep.parity["im_A"] = parity_split(imag_part(def.A)).report;
    rep.parity["B"] = parity_split(def.B).report;
    rep.parity["anomaly"] = parity_split(chi).report;
    rep.parity["anomaly1"] = parity_split(run.anomaly1).report;
    rep.parity["A1"] = parity_split(run.a1_field).report;

    const double ref = interior_l2(chi1, band);
    rep.anomaly_remainder = ref > 0.0 ? interior_l2(chi - chi1, band) / ref : 0.0;

    for (int n : ns) {
        const auto& r = rep.first_order[n];
        if (n == 2 || r.status == ConservationStatus::TriviallyConserved)
            rep.verdict[n] = ChargeVerdict::LocallyConserved;
        else if (r.status == ConservationStatus::Protected)
            rep.verdict[n] = ChargeVerdict::AsymptoticallyConserved;
        else
            rep.verdict[n] = ChargeVerdict::NotProtected;
    }
    return rep;
}

}  // namespace abdeform
