// The sl(2) loop algebra with basis
//     b^n = lambda^n s3,   F1^n = lambda^n (kappa s+ - s-)/sqrt2,
//     F2^n = lambda^n (kappa s+ + s-)/sqrt2,
// brackets [b, F1] = 2 F2, [b, F2] = 2 F1, [F1, F2] = kappa b (grades add),
// the gauge rotation that moves the spatial Lax operator into the span of
// the b^n, and the quasi-conserved charges that follow from it.
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "laxcurv.hpp"
#include "numerics.hpp"
#include "solutions.hpp"

namespace abdeform {

inline constexpr int kGradeFloor = -4;

// ---------------------------------------------------------------------------
// Loop algebra elements

class LoopElement {
public:
    using Triple = std::array<cplx, 3>;
    enum Gen { B = 0, F1 = 1, F2 = 2 };

    static constexpr int kMinGrade = -16;
    static constexpr int kMaxGrade = 8;

    explicit LoopElement(double kappa = 1.0) : kappa_(kappa) {}

    static LoopElement basis(Gen gen, int n, double kappa = 1.0, cplx coeff = 1.0) {
        LoopElement e(kappa);
        e.add(gen, n, coeff);
        return e;
    }

    double kappa() const { return kappa_; }
    bool empty() const { return hi_ < lo_; }
    int n_min() const { return lo_; }
    int n_max() const { return hi_; }

    cplx get(Gen gen, int n) const {
        if (n < lo_ || n > hi_) return 0.0;
        return c_[slot(n)][gen];
    }
    Triple grade(int n) const {
        if (n < lo_ || n > hi_) return {};
        return c_[slot(n)];
    }

    void add(Gen gen, int n, cplx v) {
        widen(n);
        c_[slot(n)][gen] += v;
    }
    void add(int n, const Triple& t) {
        widen(n);
        for (int k = 0; k < 3; ++k) c_[slot(n)][k] += t[k];
    }

    LoopElement& operator+=(const LoopElement& o) {
        if (o.kappa_ != kappa_) throw AlgebraError("loop elements with different kappa");
        for (int n = o.lo_; n <= o.hi_; ++n) add(n, o.c_[slot(n)]);
        return *this;
    }
    LoopElement& operator*=(cplx s) {
        for (int n = lo_; n <= hi_; ++n)
            for (auto& z : c_[slot(n)]) z *= s;
        return *this;
    }
    friend LoopElement operator+(LoopElement a, const LoopElement& b) { return a += b; }
    friend LoopElement operator-(LoopElement a, const LoopElement& b) {
        LoopElement nb = b;
        nb *= -1.0;
        return a += nb;
    }
    friend LoopElement operator*(LoopElement a, cplx s) { return a *= s; }
    friend LoopElement operator*(cplx s, LoopElement a) { return a *= s; }

    // Drops every grade below `floor`.
    LoopElement truncated(int floor) const {
        LoopElement out(kappa_);
        for (int n = std::max(lo_, floor); n <= hi_; ++n) out.add(n, c_[slot(n)]);
        return out;
    }

    double max_abs() const {
        double m = 0.0;
        for (int n = lo_; n <= hi_; ++n)
            for (const auto& z : c_[slot(n)]) m = std::max(m, std::abs(z));
        return m;
    }

    // Two-by-two matrix at a given spectral parameter.
    Mat2 evaluate(cplx lambda) const {
        const double r = std::numbers::sqrt2;
        Mat2 m;
        for (int n = lo_; n <= hi_; ++n) {
            const cplx ln = std::pow(lambda, n);
            const Triple& t = c_[slot(n)];
            const cplx sp = kappa_ * (t[F1] + t[F2]) / r;
            const cplx sm = (t[F2] - t[F1]) / r;
            m = m + (sigma3() * t[B] + sigma_plus() * sp + sigma_minus() * sm) * ln;
        }
        return m;
    }

private:
    static int slot(int n) { return n - kMinGrade; }
    void widen(int n) {
        if (n < kMinGrade || n > kMaxGrade) throw AlgebraError("grade outside the supported range");
        if (empty()) {
            lo_ = hi_ = n;
            c_[slot(n)] = {};
            return;
        }
        for (int k = n; k < lo_; ++k) c_[slot(k)] = {};
        for (int k = hi_ + 1; k <= n; ++k) c_[slot(k)] = {};
        lo_ = std::min(lo_, n);
        hi_ = std::max(hi_, n);
    }

    double kappa_;
    int lo_ = 0, hi_ = -1;
    std::array<Triple, kMaxGrade - kMinGrade + 1> c_{};
};

// Bracket, with every grade below `floor` discarded.
inline LoopElement commutator(const LoopElement& x, const LoopElement& y, int floor = kGradeFloor) {
    if (x.kappa() != y.kappa()) throw AlgebraError("commutator: kappa mismatch");
    const double kappa = x.kappa();
    LoopElement out(kappa);
    if (x.empty() || y.empty()) return out;
    using G = LoopElement::Gen;
    for (int n = x.n_min(); n <= x.n_max(); ++n) {
        const auto a = x.grade(n);
        for (int m = y.n_min(); m <= y.n_max(); ++m) {
            if (n + m < floor) continue;
            const auto b = y.grade(m);
            LoopElement::Triple t;
            t[G::B] = kappa * (a[G::F1] * b[G::F2] - a[G::F2] * b[G::F1]);
            t[G::F1] = 2.0 * (a[G::B] * b[G::F2] - a[G::F2] * b[G::B]);
            t[G::F2] = 2.0 * (a[G::B] * b[G::F1] - a[G::F1] * b[G::B]);
            out.add(n + m, t);
        }
    }
    return out;
}

namespace detail {
inline void require_negative(const LoopElement& J) {
    if (!J.empty() && J.n_max() >= 0)
        throw AlgebraError("gauge exponent must only carry strictly negative grades");
}
}  // namespace detail

// exp(ad_J) x = x + [J, x] + [J, [J, x]]/2! + ... up to `depth` brackets.
inline LoopElement bch_conjugate(const LoopElement& x, const LoopElement& J, int depth,
                                 int floor = kGradeFloor) {
    detail::require_negative(J);
    LoopElement result = x.truncated(floor);
    LoopElement term = result;
    for (int k = 1; k <= depth; ++k) {
        term = commutator(J, term, floor) * (1.0 / k);
        if (term.empty()) break;
        result += term;
    }
    return result;
}

// g_x g^{-1} for g = exp(J): sum_k ad_J^k(J_x)/(k+1)!.
inline LoopElement bch_derivative(const LoopElement& J, const LoopElement& Jx, int depth,
                                  int floor = kGradeFloor) {
    detail::require_negative(J);
    LoopElement result = Jx.truncated(floor);
    LoopElement term = result;
    for (int k = 1; k <= depth; ++k) {
        term = commutator(J, term, floor) * (1.0 / (k + 1));
        if (term.empty()) break;
        result += term;
    }
    return result;
}

// ---------------------------------------------------------------------------
// A+- jets

// Jet slots: value and derivatives.
enum Jet { J0 = 0, JX, JXX, JXXX, JT, JXT, JXXT, JXXXT, JN };

// A+ = A/kappa + A*, A- = A/kappa - A* and their derivatives at one node.
struct ApmNode {
    std::array<cplx, JN> p{};
    std::array<cplx, JN> m{};
};

inline void check_kappa(double kappa) {
    if (kappa != 1.0 && kappa != -1.0) throw ParameterError("kappa must be 1 or -1");
}

inline std::pair<cplx, cplx> apm(cplx A, double kappa) {
    return {A / kappa + std::conj(A), A / kappa - std::conj(A)};
}

// A+- fields with x-jets to third order and, optionally, the matching
// t-derivatives (t, xt, xxt, xxxt).
struct ApmFields {
    double kappa = 1.0;
    std::vector<ComplexField> p;  // indexed by Jet; only populated slots exist
    std::vector<ComplexField> m;
    bool has_time_jet = false;

    const ComplexField& a_plus() const { return p[J0]; }
    const ComplexField& a_minus() const { return m[J0]; }

    ApmNode node(int i, int j) const {
        ApmNode n;
        for (std::size_t k = 0; k < p.size(); ++k) {
            n.p[k] = p[k](i, j);
            n.m[k] = m[k](i, j);
        }
        return n;
    }
};

inline ApmFields make_apm(const ComplexField& A, double kappa = 1.0, bool time_jet = false) {
    check_kappa(kappa);
    ApmFields f;
    f.kappa = kappa;
    f.has_time_jet = time_jet;
    ComplexField ap(A.grid()), am(A.grid());
    for (std::size_t k = 0; k < A.size(); ++k) std::tie(ap[k], am[k]) = apm(A[k], kappa);
    auto jets = [&](const ComplexField& base, std::vector<ComplexField>& out) {
        out.push_back(base);
        for (int k = 1; k <= 3; ++k) out.push_back(differentiate(out.back(), Axis::X));
        if (time_jet) {
            out.push_back(differentiate(base, Axis::T));
            for (int k = 1; k <= 3; ++k) out.push_back(differentiate(out.back(), Axis::X));
        }
    };
    jets(ap, f.p);
    jets(am, f.m);
    return f;
}

// x-jets of A+- along one row, for row-by-row evaluation.
inline std::vector<ApmNode> apm_row(std::span<const cplx> A, double hx, double kappa) {
    const std::size_t n = A.size();
    std::vector<cplx> p(n), m(n);
    for (std::size_t i = 0; i < n; ++i) std::tie(p[i], m[i]) = apm(A[i], kappa);
    std::vector<ApmNode> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].p[J0] = p[i];
        out[i].m[J0] = m[i];
    }
    for (int k = JX; k <= JXXX; ++k) {
        p = diff_line(p, hx);
        m = diff_line(m, hx);
        for (std::size_t i = 0; i < n; ++i) {
            out[i].p[k] = p[i];
            out[i].m[k] = m[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form coefficients at a node

// a1^{-n}, a2^{-n} for n = 1..4 (index 0 unused).
struct GaugeNode {
    std::array<cplx, 5> a1{};
    std::array<cplx, 5> a2{};
};

inline GaugeNode gauge_coeffs_at(const ApmNode& j, double kappa) {
    const double r = std::numbers::sqrt2;
    const auto& P = j.p;
    const auto& M = j.m;
    const cplx d2 = P[J0] * P[J0] - M[J0] * M[J0];
    GaugeNode g;
    g.a1[1] = I / (4.0 * r) * M[J0];
    g.a2[1] = I / (4.0 * r) * P[J0];
    g.a1[2] = -1.0 / (8.0 * r) * P[JX];
    g.a2[2] = -1.0 / (8.0 * r) * M[JX];
    g.a1[3] = -I / (16.0 * r) * M[JXX] - I * kappa / (192.0 * r) * d2 * M[J0];
    g.a2[3] = -I / (16.0 * r) * P[JXX] - I * kappa / (192.0 * r) * d2 * P[J0];
    g.a1[4] = kappa / (96.0 * r) * P[J0] * P[J0] * P[JX] - kappa / (128.0 * r) * M[J0] * M[J0] * P[JX] -
              kappa / (384.0 * r) * M[JX] * P[J0] * M[J0] + 1.0 / (32.0 * r) * P[JXXX];
    g.a2[4] = -kappa / (96.0 * r) * M[J0] * M[J0] * M[JX] + kappa / (128.0 * r) * P[J0] * P[J0] * M[JX] +
              kappa / (384.0 * r) * P[JX] * P[J0] * M[J0] + 1.0 / (32.0 * r) * M[JXXX];
    return g;
}

// Kernel coefficients beta_L^n of the rotated spatial operator for
// n = 1, 0, -1, -2, -3, -4, stored at index 1 - n.
inline std::array<cplx, 6> kernel_L_at(const ApmNode& j, double kappa) {
    const auto& P = j.p;
    const auto& M = j.m;
    const cplx d2 = P[J0] * P[J0] - M[J0] * M[J0];
    const cplx w1 = P[JX] * M[J0] - M[JX] * P[J0];
    std::array<cplx, 6> b{};
    b[0] = -I;
    b[1] = 0.0;
    b[2] = -I * kappa / 32.0 * d2;
    b[3] = -kappa / 64.0 * w1;
    b[4] = I * kappa * kappa / 2048.0 * d2 * d2 + I * kappa / 128.0 * (P[J0] * P[JXX] - M[J0] * M[JXX]);
    b[5] = kappa / 256.0 * (P[JXXX] * M[J0] - M[JXXX] * P[J0]) + 3.0 * kappa * kappa / 4096.0 * d2 * w1;
    return b;
}

// Coefficients of the rotated temporal operator, grades -1..-4 (index n).
struct KernelMNode {
    std::array<cplx, 5> beta{};
    std::array<cplx, 5> alpha1{};
    std::array<cplx, 5> alpha2{};
};

inline KernelMNode kernel_M_at(const ApmNode& j, cplx B, double kappa) {
    const double r = std::numbers::sqrt2;
    const auto& P = j.p;
    const auto& M = j.m;
    const cplx d2 = P[J0] * P[J0] - M[J0] * M[J0];
    const cplx d2t = 2.0 * (P[J0] * P[JT] - M[J0] * M[JT]);
    const cplx wt = P[JT] * M[J0] - M[JT] * P[J0];
    KernelMNode k;
    k.beta[1] = I * B / 4.0;
    k.beta[2] = kappa / 64.0 * wt;
    k.beta[3] = I * kappa / 128.0 *
                    (P[JXT] * P[J0] + P[JX] * P[JT] - M[JXT] * M[J0] - M[JX] * M[JT]) -
                I * kappa * B / 128.0 * d2;
    k.beta[4] = kappa / 256.0 *
                    (P[JXXT] * M[J0] + P[JXX] * M[JT] - M[JXXT] * P[J0] - M[JXX] * P[JT]) +
                kappa / 256.0 * (P[JX] * M[JXT] - M[JX] * P[JXT]) -
                kappa * B / 128.0 * (P[JX] * M[J0] - M[JX] * P[J0]) -
                kappa * kappa / 4096.0 * d2 * wt;

    // alpha_{1,2}: the upper sign belongs to alpha1, with (S, O) = (A+, A-)
    // for alpha1 and (A-, A+) for alpha2.
    auto alpha = [&](const std::array<cplx, JN>& S, const std::array<cplx, JN>& O, double sg,
                     int n) -> cplx {
        switch (n) {
            case 2: return -1.0 / (8.0 * r) * (S[JXT] - B * S[J0]);
            case 3:
                return -I / (16.0 * r) * O[JXXT] + I * B / (16.0 * r) * O[JX] -
                       I * kappa / (192.0 * r) * wt * S[J0] -
                       I * kappa / (192.0 * r) * (d2t * O[J0] + d2 * O[JT]);
            case 4:
                return -B / (32.0 * r) * S[JXX] - kappa * B / (256.0 * r) * d2 * S[J0] +
                       1.0 / (32.0 * r) * S[JXXXT] +
                       kappa / (256.0 * r) * sg *
                           (3.0 * S[JXT] * S[J0] * S[J0] - 2.0 * S[JXT] * O[J0] * O[J0] +
                            6.0 * S[JX] * S[JT] * S[J0] - 2.0 * O[JX] * O[JT] * S[J0] -
                            O[JXT] * P[J0] * M[J0] - 4.0 * S[JX] * O[JT] * O[J0]);
            default: return 0.0;
        }
    };
    for (int n = 2; n <= 4; ++n) {
        k.alpha1[n] = alpha(P, M, 1.0, n);
        k.alpha2[n] = alpha(M, P, -1.0, n);
    }
    return k;
}

// Coefficients f0, f1, f2 of g b^{-1} g^{-1}, grades -1..-4 (index n).
struct CurvatureNode {
    std::array<cplx, 5> f0{};
    std::array<cplx, 5> f1{};
    std::array<cplx, 5> f2{};
};

inline CurvatureNode curvature_coeffs_at(const ApmNode& j, double kappa) {
    const double r = std::numbers::sqrt2;
    const auto& P = j.p;
    const auto& M = j.m;
    const cplx d2 = P[J0] * P[J0] - M[J0] * M[J0];
    CurvatureNode c;
    c.f0[1] = 1.0;
    c.f0[2] = 0.0;
    c.f0[3] = -kappa / 32.0 * d2;
    c.f0[4] = I * kappa / 32.0 * (P[JX] * M[J0] - M[JX] * P[J0]);
    c.f1[2] = -I / (2.0 * r) * P[J0];
    c.f2[2] = -I / (2.0 * r) * M[J0];
    c.f1[3] = 1.0 / (4.0 * r) * M[JX];
    c.f2[3] = 1.0 / (4.0 * r) * P[JX];
    c.f1[4] = I / (8.0 * r) * P[JXX] + I * kappa / (64.0 * r) * d2 * P[J0];
    c.f2[4] = I / (8.0 * r) * M[JXX] + I * kappa / (64.0 * r) * d2 * M[J0];
    return c;
}

// ---------------------------------------------------------------------------
// Lax operators and the gauge exponent as loop elements

inline LoopElement lax_L_element(const ApmNode& j, double kappa) {
    const double r = std::numbers::sqrt2;
    LoopElement L(kappa);
    L.add(LoopElement::B, 1, -I);
    L.add(LoopElement::F1, 0, j.p[J0] / (2.0 * r));
    L.add(LoopElement::F2, 0, j.m[J0] / (2.0 * r));
    return L;
}

inline LoopElement lax_M_element(cplx B, cplx ap_t, cplx am_t, double kappa) {
    const double r = std::numbers::sqrt2;
    LoopElement M(kappa);
    M.add(LoopElement::B, -1, I * B / 4.0);
    M.add(LoopElement::F1, -1, -I / (4.0 * r) * am_t);
    M.add(LoopElement::F2, -1, -I / (4.0 * r) * ap_t);
    return M;
}

// J = sum_n a1^{-n} F1^{-n} + a2^{-n} F2^{-n}.
inline LoopElement gauge_exponent(const GaugeNode& g, double kappa) {
    LoopElement J(kappa);
    for (int n = 1; n <= 4; ++n) {
        J.add(LoopElement::F1, -n, g.a1[n]);
        J.add(LoopElement::F2, -n, g.a2[n]);
    }
    return J;
}

// ---------------------------------------------------------------------------
// Field-level closed forms

struct GaugeCoeffs {
    std::map<int, ComplexField> a1;  // keyed by n = 1..4 for a1^{-n}
    std::map<int, ComplexField> a2;
};

inline GaugeCoeffs gauge_coeffs(const ApmFields& ap) {
    const Grid& g = ap.a_plus().grid();
    GaugeCoeffs out;
    for (int n = 1; n <= 4; ++n) {
        out.a1.emplace(n, ComplexField(g));
        out.a2.emplace(n, ComplexField(g));
    }
    for (int j = 0; j < g.nt(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const GaugeNode c = gauge_coeffs_at(ap.node(i, j), ap.kappa);
            for (int n = 1; n <= 4; ++n) {
                out.a1.at(n)(i, j) = c.a1[n];
                out.a2.at(n)(i, j) = c.a2[n];
            }
        }
    return out;
}

// beta_L^n keyed by grade n in {1, 0, -1, -2, -3, -4}.
inline std::map<int, ComplexField> kernel_coeffs_L(const ApmFields& ap) {
    const Grid& g = ap.a_plus().grid();
    std::map<int, ComplexField> out;
    for (int n = 1; n >= -4; --n) out.emplace(n, ComplexField(g));
    for (int j = 0; j < g.nt(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const auto b = kernel_L_at(ap.node(i, j), ap.kappa);
            for (int n = 1; n >= -4; --n) out.at(n)(i, j) = b[1 - n];
        }
    return out;
}

struct KernelCoeffsM {
    std::map<int, ComplexField> beta;  // keyed by grade -1..-4
    std::map<int, ComplexField> alpha1;
    std::map<int, ComplexField> alpha2;
};

inline KernelCoeffsM kernel_coeffs_M(const ApmFields& ap, const ComplexField& B) {
    if (!ap.has_time_jet) throw ParameterError("kernel_coeffs_M needs A+- fields with t-derivatives");
    const Grid& g = B.grid();
    KernelCoeffsM out;
    for (int n = 1; n <= 4; ++n) {
        out.beta.emplace(-n, ComplexField(g));
        out.alpha1.emplace(-n, ComplexField(g));
        out.alpha2.emplace(-n, ComplexField(g));
    }
    for (int j = 0; j < g.nt(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const auto k = kernel_M_at(ap.node(i, j), B(i, j), ap.kappa);
            for (int n = 1; n <= 4; ++n) {
                out.beta.at(-n)(i, j) = k.beta[n];
                out.alpha1.at(-n)(i, j) = k.alpha1[n];
                out.alpha2.at(-n)(i, j) = k.alpha2[n];
            }
        }
    return out;
}

struct CurvatureCoeffs {
    std::map<int, ComplexField> f0;  // keyed by grade -1..-4
    std::map<int, ComplexField> f1;
    std::map<int, ComplexField> f2;
};

inline CurvatureCoeffs curvature_coeffs(const ApmFields& ap) {
    const Grid& g = ap.a_plus().grid();
    CurvatureCoeffs out;
    for (int n = 1; n <= 4; ++n) {
        out.f0.emplace(-n, ComplexField(g));
        out.f1.emplace(-n, ComplexField(g));
        out.f2.emplace(-n, ComplexField(g));
    }
    for (int j = 0; j < g.nt(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const auto c = curvature_coeffs_at(ap.node(i, j), ap.kappa);
            for (int n = 1; n <= 4; ++n) {
                out.f0.at(-n)(i, j) = c.f0[n];
                out.f1.at(-n)(i, j) = c.f1[n];
                out.f2.at(-n)(i, j) = c.f2[n];
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Abelianization check

struct AbelianizationReport {
    std::map<int, double> image_norm;      // grade -> L2 norm of the F1, F2 part of the rotated L
    std::map<int, double> kernel_deviation;  // grade -> L2 norm of (b-part - closed form)
    std::map<int, double> kernel_norm;     // grade -> L2 norm of the closed form, for scale
};

// Rotates L by g = exp(J) with J from the closed-form gauge coefficients;
// g_x g^{-1} is summed from J and its x-derivative, the latter by finite
// differences of the coefficient fields. Rows are processed independently.
inline AbelianizationReport verify_abelianization(const AbSolution& s, double kappa = 1.0, int band = 2) {
    check_kappa(kappa);
    const Grid& g = s.A.grid();
    std::map<int, double> img, dev, ref;
    for (int n = 1; n >= kGradeFloor; --n) img[n] = dev[n] = ref[n] = 0.0;
    const int depth = 1 - kGradeFloor + 1;
    for (int j = band; j < g.nt() - band; ++j) {
        const auto jets = apm_row(s.A.row(j), g.hx(), kappa);
        const std::size_t nx = jets.size();
        std::array<std::vector<cplx>, 5> a1, a2;
        for (int n = 1; n <= 4; ++n) {
            a1[n].resize(nx);
            a2[n].resize(nx);
        }
        for (std::size_t i = 0; i < nx; ++i) {
            const GaugeNode c = gauge_coeffs_at(jets[i], kappa);
            for (int n = 1; n <= 4; ++n) {
                a1[n][i] = c.a1[n];
                a2[n][i] = c.a2[n];
            }
        }
        std::array<std::vector<cplx>, 5> a1x, a2x;
        for (int n = 1; n <= 4; ++n) {
            a1x[n] = diff_line(a1[n], g.hx());
            a2x[n] = diff_line(a2[n], g.hx());
        }
        for (int i = band; i < g.nx() - band; ++i) {
            GaugeNode c, cx;
            for (int n = 1; n <= 4; ++n) {
                c.a1[n] = a1[n][i];
                c.a2[n] = a2[n][i];
                cx.a1[n] = a1x[n][i];
                cx.a2[n] = a2x[n][i];
            }
            const LoopElement J = gauge_exponent(c, kappa);
            const LoopElement Jx = gauge_exponent(cx, kappa);
            const LoopElement Lbar =
                bch_conjugate(lax_L_element(jets[i], kappa), J, depth) + bch_derivative(J, Jx, depth);
            const auto beta = kernel_L_at(jets[i], kappa);
            for (int n = 1; n >= kGradeFloor; --n) {
                const auto t = Lbar.grade(n);
                img[n] += std::norm(t[LoopElement::F1]) + std::norm(t[LoopElement::F2]);
                dev[n] += std::norm(t[LoopElement::B] - beta[1 - n]);
                ref[n] += std::norm(beta[1 - n]);
            }
        }
    }
    const double w = g.hx() * g.ht();
    AbelianizationReport r;
    for (int n = 1; n >= kGradeFloor; --n) {
        r.image_norm[n] = std::sqrt(img[n] * w);
        r.kernel_deviation[n] = std::sqrt(dev[n] * w);
        r.kernel_norm[n] = std::sqrt(ref[n] * w);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Quasi-conserved charges

struct ChargeSeries {
    int n = 1;
    std::vector<cplx> q_of_t;
    std::vector<cplx> flux_of_t;
};

inline void check_charge_index(int n) {
    if (n < 1 || n > 4) throw ParameterError("charges are available for n = 1..4 only");
}

// Row of beta_L^{-n} and f0^{-n} values.
inline void charge_densities(std::span<const cplx> A, double hx, double kappa, int n,
                             std::vector<cplx>& beta, std::vector<cplx>& f0) {
    const auto jets = apm_row(A, hx, kappa);
    beta.resize(jets.size());
    f0.resize(jets.size());
    for (std::size_t i = 0; i < jets.size(); ++i) {
        beta[i] = kernel_L_at(jets[i], kappa)[1 + n];
        f0[i] = curvature_coeffs_at(jets[i], kappa).f0[n];
    }
}

// Q^{-n}(t) = int beta_L^{-n} dx and flux(t) = int X f0^{-n} dx, where X is
// the supplied anomaly field.
inline std::vector<ChargeSeries> charges(const ComplexField& A, const ComplexField& chi,
                                         const std::vector<int>& ns, double kappa = 1.0) {
    check_kappa(kappa);
    for (int n : ns) check_charge_index(n);
    const Grid& g = A.grid();
    std::vector<ChargeSeries> out;
    std::vector<cplx> beta, f0, flux_line(g.nx());
    for (int n : ns) {
        ChargeSeries cs{n, std::vector<cplx>(g.nt()), std::vector<cplx>(g.nt())};
        for (int j = 0; j < g.nt(); ++j) {
            charge_densities(A.row(j), g.hx(), kappa, n, beta, f0);
            const auto chirow = chi.row(j);
            for (int i = 0; i < g.nx(); ++i) flux_line[i] = chirow[i] * f0[i];
            cs.q_of_t[j] = simpson(beta, g.hx());
            cs.flux_of_t[j] = simpson(flux_line, g.hx());
        }
        out.push_back(std::move(cs));
    }
    return out;
}

inline std::vector<ChargeSeries> charges(const AbSolution& s, const std::vector<int>& ns, double kappa = 1.0) {
    return charges(s.A, anomaly(s), ns, kappa);
}

struct BalanceEntry {
    int n = 1;
    double max_mismatch = 0.0;  // max_t |dQ/dt - flux| over the interior
    double max_flux = 0.0;
    double max_rate = 0.0;      // max_t |dQ/dt|
    double relative = 0.0;      // max_mismatch / max(max_flux, max_rate)
    double explicit_flux_deviation = -1.0;  // n = 3, 4: relative gap to the explicit flux forms
};

// Compares dQ^{-n}/dt (finite differences in t) with the anomaly flux.
inline std::vector<BalanceEntry> charge_balance(const ComplexField& A, const ComplexField& chi,
                                                const std::vector<int>& ns, double kappa = 1.0,
                                                int band = 2) {
    const Grid& g = A.grid();
    const auto series = charges(A, chi, ns, kappa);
    std::vector<BalanceEntry> out;
    for (const auto& cs : series) {
        const auto rate = diff_line(cs.q_of_t, g.ht());
        BalanceEntry e;
        e.n = cs.n;
        for (int j = band; j < g.nt() - band; ++j) {
            e.max_mismatch = std::max(e.max_mismatch, std::abs(rate[j] - cs.flux_of_t[j]));
            e.max_flux = std::max(e.max_flux, std::abs(cs.flux_of_t[j]));
            e.max_rate = std::max(e.max_rate, std::abs(rate[j]));
        }
        const double scale = std::max(e.max_flux, e.max_rate);
        e.relative = scale > 0.0 ? e.max_mismatch / scale : 0.0;
        if (cs.n == 3 || cs.n == 4) {
            // -(1/8) int X |A|^2  and  -(i/16) int X (A_x A* - A_x* A)
            double gap = 0.0, ref = 0.0;
            std::vector<cplx> line(g.nx());
            for (int j = 0; j < g.nt(); ++j) {
                const auto a = A.row(j);
                const auto c = chi.row(j);
                if (cs.n == 3) {
                    for (int i = 0; i < g.nx(); ++i) line[i] = -0.125 * c[i] * std::norm(a[i]);
                } else {
                    const auto ax = diff_line(a, g.hx());
                    for (int i = 0; i < g.nx(); ++i)
                        line[i] = -I / 16.0 * c[i] * (ax[i] * std::conj(a[i]) - std::conj(ax[i]) * a[i]);
                }
                const cplx alt = simpson(line, g.hx());
                gap = std::max(gap, std::abs(alt - cs.flux_of_t[j]));
                ref = std::max(ref, std::abs(cs.flux_of_t[j]));
            }
            e.explicit_flux_deviation = ref > 0.0 ? gap / ref : gap;
        }
        out.push_back(e);
    }
    return out;
}

inline std::vector<BalanceEntry> charge_balance(const AbSolution& s, const std::vector<int>& ns,
                                                double kappa = 1.0, int band = 2) {
    return charge_balance(s.A, anomaly(s), ns, kappa, band);
}

enum class ConservationStatus { TriviallyConserved, Protected, NotProtected };

inline const char* to_string(ConservationStatus s) {
    switch (s) {
        case ConservationStatus::TriviallyConserved: return "TriviallyConserved";
        case ConservationStatus::Protected: return "Protected";
        default: return "NotProtected";
    }
}

struct AsymptoticReport {
    int n = 1;
    cplx S = 0.0;
    double R = 0.0;
    double ratio = 0.0;
    ConservationStatus status = ConservationStatus::TriviallyConserved;
};

struct AsymptoticOptions {
    double ratio_threshold = 1e-3;
    double trivial_R = 1e-14;
    // Anomalies no larger than this are treated as discretisation noise of
    // an undeformed solution.
    double trivial_anomaly = 1e-6;
};

// S = double integral of X f0^{-n} over the whole rectangle, R the integral
// of its modulus.
inline AsymptoticReport asymptotic_conservation(const ComplexField& A, const ComplexField& chi, int n,
                                                double kappa = 1.0, const AsymptoticOptions& opt = {}) {
    check_kappa(kappa);
    check_charge_index(n);
    const Grid& g = A.grid();
    ComplexField integrand(g), modulus(g);
    std::vector<cplx> beta, f0;
    for (int j = 0; j < g.nt(); ++j) {
        charge_densities(A.row(j), g.hx(), kappa, n, beta, f0);
        for (int i = 0; i < g.nx(); ++i) {
            integrand(i, j) = chi(i, j) * f0[i];
            modulus(i, j) = std::abs(integrand(i, j));
        }
    }
    AsymptoticReport r;
    r.n = n;
    r.S = integrate_rect(integrand);
    r.R = integrate_rect(modulus).real();
    r.ratio = r.R > 0.0 ? std::abs(r.S) / r.R : 0.0;
    if (r.R < opt.trivial_R || chi.max_abs() <= opt.trivial_anomaly)
        r.status = ConservationStatus::TriviallyConserved;
    else
        r.status = r.ratio <= opt.ratio_threshold ? ConservationStatus::Protected
                                                  : ConservationStatus::NotProtected;
    return r;
}

inline AsymptoticReport asymptotic_conservation(const AbSolution& s, int n, double kappa = 1.0,
                                                const AsymptoticOptions& opt = {}) {
    return asymptotic_conservation(s.A, anomaly(s), n, kappa, opt);
}

}  // namespace abdeform
