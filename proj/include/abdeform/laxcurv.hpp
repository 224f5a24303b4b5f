// Lax pair of the AB system, zero-curvature residuals and the anomaly field.
//
//   L = -i lambda s3 + (A/2) s+ - (A*/2) s-
//   M = (1/(4 i lambda)) (-B s3 + A_t s+ + A_t* s-)
//
// Flatness L_t - M_x + [L, M] = 0 holds on solutions. Its s3 channel is
// X / lambda with the anomaly X = -(i/8)(2 B_x + (|A|^2)_t).
#pragma once

#include <array>
#include <vector>

#include "numerics.hpp"
#include "solutions.hpp"

namespace abdeform {

// 2x2 complex matrix, row-major.
struct Mat2 {
    cplx a{}, b{}, c{}, d{};

    cplx trace() const { return a + d; }
    Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    Mat2 operator*(cplx s) const { return {a * s, b * s, c * s, d * s}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    double frobenius() const {
        return std::sqrt(std::norm(a) + std::norm(b) + std::norm(c) + std::norm(d));
    }
};

inline Mat2 commutator(const Mat2& x, const Mat2& y) { return x * y - y * x; }

inline Mat2 sigma3() { return {1.0, 0.0, 0.0, -1.0}; }
inline Mat2 sigma_plus() { return {0.0, 1.0, 0.0, 0.0}; }
inline Mat2 sigma_minus() { return {0.0, 0.0, 1.0, 0.0}; }

// Matrix-valued field, one Mat2 per node.
class MatrixField {
public:
    explicit MatrixField(const Grid& g) : grid_(g), v_(g.size()) {}
    const Grid& grid() const { return grid_; }
    Mat2& operator[](std::size_t k) { return v_[k]; }
    const Mat2& operator[](std::size_t k) const { return v_[k]; }
    Mat2& operator()(int i, int j) { return v_[static_cast<std::size_t>(j) * grid_.nx() + i]; }
    const Mat2& operator()(int i, int j) const {
        return v_[static_cast<std::size_t>(j) * grid_.nx() + i];
    }
    std::size_t size() const { return v_.size(); }

    ComplexField entry(int r, int c) const {
        ComplexField f(grid_);
        for (std::size_t k = 0; k < v_.size(); ++k) f[k] = pick(v_[k], r, c);
        return f;
    }
    void set_entry(int r, int c, const ComplexField& f) {
        for (std::size_t k = 0; k < v_.size(); ++k) pick(v_[k], r, c) = f[k];
    }

private:
    static cplx& pick(Mat2& m, int r, int c) { return r == 0 ? (c == 0 ? m.a : m.b) : (c == 0 ? m.c : m.d); }
    static cplx pick(const Mat2& m, int r, int c) {
        return r == 0 ? (c == 0 ? m.a : m.b) : (c == 0 ? m.c : m.d);
    }
    Grid grid_;
    std::vector<Mat2> v_;
};

inline MatrixField differentiate(const MatrixField& m, Axis axis) {
    MatrixField out(m.grid());
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) out.set_entry(r, c, differentiate(m.entry(r, c), axis));
    return out;
}

struct LaxSample {
    cplx lambda;
    MatrixField L;
    MatrixField M;
};

inline LaxSample lax_pair(const AbSolution& s, cplx lambda) {
    if (lambda == cplx(0.0)) throw ParameterError("lax_pair: lambda = 0 is a pole of M");
    const Grid& g = s.A.grid();
    const ComplexField At = differentiate(s.A, Axis::T);
    LaxSample out{lambda, MatrixField(g), MatrixField(g)};
    const cplx mpre = 1.0 / (4.0 * I * lambda);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const cplx A = s.A[k];
        out.L[k] = {-I * lambda, 0.5 * A, -0.5 * std::conj(A), I * lambda};
        out.M[k] = {-s.B[k] * mpre, At[k] * mpre, std::conj(At[k]) * mpre, s.B[k] * mpre};
    }
    return out;
}

struct CurvatureReport {
    double total = 0.0;        // largest Frobenius norm of F over interior nodes
    double sigma3 = 0.0;       // largest |s3 coefficient| over interior nodes
    double sigma_plus = 0.0;   // likewise for s+
    double sigma_minus = 0.0;  // likewise for s-
};

// Pointwise curvature F = L_t - M_x + [L, M].
inline MatrixField curvature(const LaxSample& lax) {
    const MatrixField Lt = differentiate(lax.L, Axis::T);
    const MatrixField Mx = differentiate(lax.M, Axis::X);
    MatrixField F(lax.L.grid());
    for (std::size_t k = 0; k < F.size(); ++k) F[k] = Lt[k] - Mx[k] + commutator(lax.L[k], lax.M[k]);
    return F;
}

inline CurvatureReport curvature_components(const AbSolution& s, cplx lambda, int band = 2) {
    const MatrixField F = curvature(lax_pair(s, lambda));
    const Grid& g = F.grid();
    ComplexField tot(g), f3(g), fp(g), fm(g);
    for (std::size_t k = 0; k < F.size(); ++k) {
        tot[k] = F[k].frobenius();
        f3[k] = F[k].a;
        fp[k] = F[k].b;
        fm[k] = F[k].c;
    }
    return {interior_max(tot, band), interior_max(f3, band), interior_max(fp, band), interior_max(fm, band)};
}

inline double curvature_residual(const AbSolution& s, cplx lambda, int band = 2) {
    return curvature_components(s, lambda, band).total;
}

// lambda times the s3 coefficient of the curvature.
inline ComplexField curvature_anomaly_channel(const AbSolution& s, cplx lambda) {
    const MatrixField F = curvature(lax_pair(s, lambda));
    ComplexField out(F.grid());
    for (std::size_t k = 0; k < F.size(); ++k) out[k] = lambda * F[k].a;
    return out;
}

inline ComplexField anomaly(const AbSolution& s) {
    const ComplexField Bx = differentiate(s.B, Axis::X);
    const ComplexField A2t = differentiate(abs2(s.A), Axis::T);
    ComplexField out(s.A.grid());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = -I / 8.0 * (2.0 * Bx[k] + A2t[k]);
    return out;
}

inline const std::array<cplx, 4>& default_lambdas() {
    static const std::array<cplx, 4> ls{cplx(1.0, 0.0), cplx(0.0, 1.0), cplx(0.5, 0.5), cplx(2.0, 0.0)};
    return ls;
}

}  // namespace abdeform
