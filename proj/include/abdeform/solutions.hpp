// Exact solutions of the AB system, ansatz fields for the deformed system,
// the sine-Gordon map, and residual checks.
//
// The AB system for a complex amplitude A and a real field B reads
//     2 B_x + (|A|^2)_t = 0,     A_xt = A B,
// with the normalisation |A_t|^2 + B^2 = 1 for the solutions used here.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace abdeform {

// Fills one t-row of (A, B) for a closed-form solution. Used by the QID
// solver to evaluate the base solution between grid rows.
using RowEvaluator =
    std::function<void(double t, std::span<const double> xs, std::span<cplx> A, std::span<cplx> B)>;

struct AbSolution {
    std::string name;
    ComplexField A;
    ComplexField B;
    std::map<std::string, double> params;
    std::optional<ComplexField> phase_phi;
    bool exact = false;   // closed-form entry as opposed to numerically assembled fields
    bool a_real = true;   // A is real up to rounding
    RowEvaluator row_eval;
};

// Each entry is the largest magnitude over interior nodes.
struct ResidualReport {
    double r1_norm = 0.0;
    double r2_norm = 0.0;
    double r5_norm = 0.0;
    double norm_residual = 0.0;
};

namespace detail {

inline std::vector<double> x_nodes(const Grid& g) {
    std::vector<double> xs(g.nx());
    for (int i = 0; i < g.nx(); ++i) xs[i] = g.x(i);
    return xs;
}

// Tabulates a row evaluator on every grid row.
inline void fill_from_rows(const RowEvaluator& ev, ComplexField& A, ComplexField& B) {
    const Grid& g = A.grid();
    auto xs = x_nodes(g);
    for (int j = 0; j < g.nt(); ++j) ev(g.t(j), xs, A.row(j), B.row(j));
}

}  // namespace detail

// One-soliton: theta = g x + t/g + delta, A = 2 g sech(theta),
// B = 1 - 2 sech^2(theta).
inline AbSolution one_soliton(const Grid& grid, double g_hat, double delta = 0.0) {
    if (g_hat == 0.0 || !std::isfinite(g_hat)) throw ParameterError("one_soliton: g_hat must be nonzero");
    if (!std::isfinite(delta)) throw ParameterError("one_soliton: delta must be finite");
    AbSolution s{"one_soliton", ComplexField(grid), ComplexField(grid), {{"g", g_hat}, {"d", delta}}};
    s.exact = true;
    s.row_eval = [g_hat, delta](double t, std::span<const double> xs, std::span<cplx> A,
                                std::span<cplx> B) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double sech = 1.0 / std::cosh(g_hat * xs[i] + t / g_hat + delta);
            A[i] = 2.0 * g_hat * sech;
            B[i] = 1.0 - 2.0 * sech * sech;
        }
    };
    detail::fill_from_rows(s.row_eval, s.A, s.B);
    return s;
}

// Log-determinant derivatives of the two-soliton tau function
//     D = cosh th1 cosh th2 - c cosh^2((th1 + th2)/2),  c = 4 a1 a2 / (a1 + a2)^2,
// which is proportional to det M with M_ij = cosh((th_i + th_j)/2)/(a_i + a_j).
// D is evaluated in the cancellation-free form
//     D = (1 - c) cosh th1 cosh th2 + (c/2)(cosh(th1 - th2) - 1),
// with every hyperbolic function scaled by exp(-|th1| - |th2|).
class TwoSolitonTau {
public:
    TwoSolitonTau(double a1, double a2, double d1, double d2) : a1_(a1), a2_(a2), d1_(d1), d2_(d2) {
        if (a1 == 0.0 || a2 == 0.0) throw ParameterError("two_soliton: a1 and a2 must be nonzero");
        if (a1 == a2 || a1 == -a2)
            throw ParameterError("two_soliton: a1 = +-a2 makes the determinant degenerate");
        c_ = 4.0 * a1 * a2 / ((a1 + a2) * (a1 + a2));
    }

    struct Derivs {
        double lxx, lxt, ltt;
    };

    Derivs at(double x, double t) const {
        const double th1 = a1_ * x + t / a1_ + d1_;
        const double th2 = a2_ * x + t / a2_ + d2_;
        const double s = std::abs(th1) + std::abs(th2);
        const double e1 = std::exp(-2.0 * std::abs(th1)), e2 = std::exp(-2.0 * std::abs(th2));
        // scaled cosh/sinh: cosh(th) e^{-|th|} and sinh(th) e^{-|th|}
        const double C1 = 0.5 * (1.0 + e1), S1 = std::copysign(0.5 * (1.0 - e1), th1);
        const double C2 = 0.5 * (1.0 + e2), S2 = std::copysign(0.5 * (1.0 - e2), th2);
        const double dth = th1 - th2;
        const double ch = 0.5 * (std::exp(dth - s) + std::exp(-dth - s));
        const double sh = 0.5 * (std::exp(dth - s) - std::exp(-dth - s));
        const double es = std::exp(-s);
        const double k = 1.0 - c_;
        const double D = k * C1 * C2 + 0.5 * c_ * (ch - es);
        // direction weights: x -> (a1, a2), t -> (1/a1, 1/a2)
        const double kx1 = a1_, kx2 = a2_, kt1 = 1.0 / a1_, kt2 = 1.0 / a2_;
        auto first = [&](double p1, double p2) {
            return k * (p1 * S1 * C2 + p2 * C1 * S2) + 0.5 * c_ * (p1 - p2) * sh;
        };
        auto second = [&](double p1, double p2, double q1, double q2) {
            return k * ((p1 * q1 + p2 * q2) * C1 * C2 + (p1 * q2 + p2 * q1) * S1 * S2) +
                   0.5 * c_ * (p1 - p2) * (q1 - q2) * ch;
        };
        const double Dx = first(kx1, kx2), Dt = first(kt1, kt2);
        const double Dxx = second(kx1, kx2, kx1, kx2);
        const double Dxt = second(kx1, kx2, kt1, kt2);
        const double Dtt = second(kt1, kt2, kt1, kt2);
        return {Dxx / D - Dx * Dx / (D * D), Dxt / D - Dx * Dt / (D * D), Dtt / D - Dt * Dt / (D * D)};
    }

    // psi_x for psi = 4 arctan(f/g) with
    //     f = e^{p1} - e^{p2},  g = 1 + (1 - c) e^{p1 + p2},  e^{p_i} = e^{th_i}/sqrt(1 - c).
    // f^2 + g^2 equals D times an exponential of a linear function of x and t,
    // so psi_x^2 = 4 (ln D)_xx. All exponentials share one scale factor.
    double amplitude(double x, double t) const {
        const double sh = 0.5 * std::log(1.0 - c_);
        const double p1 = a1_ * x + t / a1_ + d1_ - sh;
        const double p2 = a2_ * x + t / a2_ + d2_ - sh;
        const double m = std::max({0.0, p1, p2, p1 + p2});
        const double e1 = std::exp(p1 - m), e2 = std::exp(p2 - m), e12 = std::exp(p1 + p2 - m);
        const double f = e1 - e2, fx = a1_ * e1 - a2_ * e2;
        const double g = std::exp(-m) + (1.0 - c_) * e12, gx = (1.0 - c_) * (a1_ + a2_) * e12;
        return 4.0 * (fx * g - f * gx) / (f * f + g * g);
    }

private:
    double a1_, a2_, d1_, d2_, c_ = 0.0;
};

// Two-soliton: A^2 = 4 (ln D)_xx, B = 1 - 2 (ln D)_xt. A is the square root
// of A^2 given by the sine-Gordon phase, which is smooth through the zeros
// of A; one global sign makes A positive at the left edge at t = 0.
inline AbSolution two_soliton(const Grid& grid, double a1, double a2, double d1 = 0.0,
                              double d2 = 0.0) {
    TwoSolitonTau tau(a1, a2, d1, d2);
    AbSolution s{"two_soliton", ComplexField(grid), ComplexField(grid),
                 {{"a1", a1}, {"a2", a2}, {"d1", d1}, {"d2", d2}}};
    s.exact = true;
    const double orient = tau.amplitude(-grid.X(), 0.0) < 0.0 ? -1.0 : 1.0;
    s.row_eval = [tau, orient](double t, std::span<const double> xs, std::span<cplx> A, std::span<cplx> B) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            A[i] = orient * tau.amplitude(xs[i], t);
            B[i] = 1.0 - 2.0 * tau.at(xs[i], t).lxt;
        }
    };
    detail::fill_from_rows(s.row_eval, s.A, s.B);
    return s;
}

// Kink ansatz A_d = 4 arctan(exp(a x + t/a + delta)). Not a solution of the
// undeformed system.
inline ComplexField kink_ansatz(const Grid& grid, double a, double delta = 0.0) {
    if (a == 0.0 || !std::isfinite(a)) throw ParameterError("kink_ansatz: a must be nonzero");
    return ComplexField::sample(grid, [a, delta](double x, double t) {
        return 4.0 * std::atan(std::exp(a * x + t / a + delta));
    });
}

enum class KinkBranch { KK, KAK };

// Kink-kink (upper signs) and kink-anti-kink (lower signs) ansatz fields:
//   A = (2/a) [1 + P^2 sinh^2 u sech^2 w]^{-1} sech w
//         [ (1 -+ a^2) cosh u - (1 -+ a^2)^2/(1 +- a^2) sinh u tanh w ],
//   u = (1 +- a^2)/(2a) (x +- t),  w = (1 -+ a^2)/(2a) (x -+ t),
//   P = (1 -+ a^2)/(1 + a^2).
inline ComplexField kk_kak_ansatz(const Grid& grid, double a, KinkBranch branch) {
    if (a == 0.0 || !std::isfinite(a)) throw ParameterError("kk_kak_ansatz: a must be nonzero");
    const double s = branch == KinkBranch::KK ? 1.0 : -1.0;
    const double pm = 1.0 + s * a * a, mp = 1.0 - s * a * a;
    if (mp == 0.0) throw ParameterError("kk_kak_ansatz: prefactor (1 -+ a^2) vanishes identically");
    if (pm == 0.0) throw ParameterError("kk_kak_ansatz: denominator (1 +- a^2) vanishes");
    const double P = mp / (1.0 + a * a);
    ComplexField out = ComplexField::sample(grid, [=](double x, double t) {
        const double u = pm / (2.0 * a) * (x + s * t);
        const double w = mp / (2.0 * a) * (x - s * t);
        const double sech_w = 1.0 / std::cosh(w);
        const double sh = std::sinh(u);
        const double denom = 1.0 + P * P * sh * sh * sech_w * sech_w;
        return 2.0 / a / denom * sech_w * (mp * std::cosh(u) - mp * mp / pm * sh * std::tanh(w));
    });
    if (!out.all_finite()) throw DomainError("kk_kak_ansatz: non-finite values on this grid");
    return out;
}

// Sine-Gordon map: A = psi_x exp(i phi), B = cos psi. If psi solves
// psi_xt = sin psi, (A, B) solves the AB system.
inline AbSolution sg_map(const ComplexField& psi, const std::optional<ComplexField>& phi = std::nullopt) {
    const ComplexField psi_x = differentiate(psi, Axis::X);
    AbSolution s{"sg_map", ComplexField(psi.grid()), ComplexField(psi.grid()), {}};
    for (std::size_t k = 0; k < psi.size(); ++k) {
        const double p = psi[k].real();
        const double ph = phi ? (*phi)[k].real() : 0.0;
        s.A[k] = psi_x[k].real() * std::exp(I * ph);
        s.B[k] = std::cos(p);
    }
    s.phase_phi = phi;
    s.a_real = !phi.has_value();
    return s;
}

// Sine-Gordon kink psi = 4 arctan(exp(a x + t/a + delta)).
inline ComplexField sg_kink_psi(const Grid& grid, double a = 1.0, double delta = 0.0) {
    return kink_ansatz(grid, a, delta);
}

inline ResidualReport ab_residuals(const AbSolution& s, int band = 2) {
    const ComplexField& A = s.A;
    const ComplexField& B = s.B;
    const ComplexField A2 = abs2(A);
    const ComplexField A2t = differentiate(A2, Axis::T);
    const ComplexField Bx = differentiate(B, Axis::X);
    const ComplexField At = differentiate(A, Axis::T);
    const ComplexField Ax = differentiate(A, Axis::X);
    const ComplexField Axt = differentiate(At, Axis::X);
    const ComplexField Axxt = differentiate(Axt, Axis::X);

    ComplexField r1(A.grid()), r2(A.grid()), r5(A.grid()), rn(A.grid());
    for (std::size_t k = 0; k < A.size(); ++k) {
        r1[k] = 2.0 * Bx[k] + A2t[k];
        r2[k] = Axt[k] - A[k] * B[k];
        r5[k] = A[k] * A[k] * A2t[k] + 2.0 * A[k] * Axxt[k] - 2.0 * Ax[k] * Axt[k];
        rn[k] = std::norm(At[k]) + B[k] * B[k] - 1.0;
    }
    return {interior_max(r1, band), interior_max(r2, band), interior_max(r5, band), interior_max(rn, band)};
}

}  // namespace abdeform
