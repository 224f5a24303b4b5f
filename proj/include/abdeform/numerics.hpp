// Grids, complex fields, finite differences, antiderivatives, quadrature and
// parity decomposition on a uniform space-time lattice.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace abdeform {

using cplx = std::complex<double>;

inline constexpr cplx I{0.0, 1.0};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ParameterError : Error {
    using Error::Error;
};
struct AlgebraError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct SolverError : Error {
    using Error::Error;
};

// Uniform lattice on [-X, X] x [-T, T]. Node counts are odd so that the
// origin is a node; coordinates are generated symmetrically about the
// centre index so that x(nx-1-i) == -x(i) holds bit for bit.
class Grid {
public:
    Grid(double X, double T, int nx, int nt) : X_(X), T_(T), nx_(nx), nt_(nt) {
        if (!(std::isfinite(X) && std::isfinite(T)) || X <= 0.0 || T <= 0.0)
            throw ParameterError("grid half-widths must be positive and finite");
        if (nx < 5 || nt < 5)
            throw DimensionError("grid needs at least 5 nodes along each axis");
        if (nx % 2 == 0 || nt % 2 == 0)
            throw DimensionError("grid node counts must be odd");
        hx_ = 2.0 * X / (nx - 1);
        ht_ = 2.0 * T / (nt - 1);
    }

    static Grid defaults() { return Grid(10.0, 5.0, 2001, 1001); }

    double X() const { return X_; }
    double T() const { return T_; }
    int nx() const { return nx_; }
    int nt() const { return nt_; }
    double hx() const { return hx_; }
    double ht() const { return ht_; }
    int cx() const { return nx_ / 2; }
    int ct() const { return nt_ / 2; }
    double x(int i) const { return (i - cx()) * hx_; }
    double t(int j) const { return (j - ct()) * ht_; }
    std::size_t size() const { return static_cast<std::size_t>(nx_) * nt_; }

    // Same extent, half the spacing along both axes.
    Grid refined() const { return Grid(X_, T_, 2 * nx_ - 1, 2 * nt_ - 1); }
    // Same extent, double the spacing; requires (n-1)/2 to stay even-compatible.
    Grid coarsened() const { return Grid(X_, T_, (nx_ + 1) / 2, (nt_ + 1) / 2); }

    bool operator==(const Grid& o) const {
        return X_ == o.X_ && T_ == o.T_ && nx_ == o.nx_ && nt_ == o.nt_;
    }

private:
    double X_, T_;
    int nx_, nt_;
    double hx_ = 0.0, ht_ = 0.0;
};

// Complex samples on a Grid, stored with t as the slow index:
// value(i, j) lives at offset j * nx + i.
class ComplexField {
public:
    explicit ComplexField(const Grid& g, cplx fill = 0.0) : grid_(g), v_(g.size(), fill) {}

    template <class F>
    static ComplexField sample(const Grid& g, F&& f) {
        ComplexField out(g);
        for (int j = 0; j < g.nt(); ++j)
            for (int i = 0; i < g.nx(); ++i) out(i, j) = cplx(f(g.x(i), g.t(j)));
        return out;
    }

    const Grid& grid() const { return grid_; }
    int nx() const { return grid_.nx(); }
    int nt() const { return grid_.nt(); }
    std::size_t size() const { return v_.size(); }

    cplx& operator()(int i, int j) { return v_[static_cast<std::size_t>(j) * nx() + i]; }
    const cplx& operator()(int i, int j) const {
        return v_[static_cast<std::size_t>(j) * nx() + i];
    }
    cplx& operator[](std::size_t k) { return v_[k]; }
    const cplx& operator[](std::size_t k) const { return v_[k]; }

    std::span<cplx> row(int j) {
        return {v_.data() + static_cast<std::size_t>(j) * nx(), static_cast<std::size_t>(nx())};
    }
    std::span<const cplx> row(int j) const {
        return {v_.data() + static_cast<std::size_t>(j) * nx(), static_cast<std::size_t>(nx())};
    }
    std::vector<cplx>& values() { return v_; }
    const std::vector<cplx>& values() const { return v_; }

    bool all_finite() const {
        return std::all_of(v_.begin(), v_.end(), [](const cplx& z) {
            return std::isfinite(z.real()) && std::isfinite(z.imag());
        });
    }
    double max_abs() const {
        double m = 0.0;
        for (const auto& z : v_) m = std::max(m, std::abs(z));
        return m;
    }

    ComplexField& operator+=(const ComplexField& o) {
        check_same(o);
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
        return *this;
    }
    ComplexField& operator-=(const ComplexField& o) {
        check_same(o);
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
        return *this;
    }
    ComplexField& operator*=(const ComplexField& o) {
        check_same(o);
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] *= o.v_[k];
        return *this;
    }
    ComplexField& operator+=(cplx s) {
        for (auto& z : v_) z += s;
        return *this;
    }
    ComplexField& operator*=(cplx s) {
        for (auto& z : v_) z *= s;
        return *this;
    }

    void check_same(const ComplexField& o) const {
        if (!(grid_ == o.grid_)) throw DimensionError("fields live on different grids");
    }

private:
    Grid grid_;
    std::vector<cplx> v_;
};

inline ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
inline ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
inline ComplexField operator*(ComplexField a, const ComplexField& b) { return a *= b; }
inline ComplexField operator*(ComplexField a, cplx s) { return a *= s; }
inline ComplexField operator*(cplx s, ComplexField a) { return a *= s; }
inline ComplexField operator+(ComplexField a, cplx s) { return a += s; }
inline ComplexField operator-(ComplexField a) { return a *= -1.0; }

template <class F>
ComplexField map(const ComplexField& f, F&& fn) {
    ComplexField out(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = cplx(fn(f[k]));
    return out;
}

template <class F>
ComplexField zip(const ComplexField& a, const ComplexField& b, F&& fn) {
    a.check_same(b);
    ComplexField out(a.grid());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = cplx(fn(a[k], b[k]));
    return out;
}

inline ComplexField conj(const ComplexField& f) {
    return map(f, [](cplx z) { return std::conj(z); });
}
inline ComplexField real_part(const ComplexField& f) {
    return map(f, [](cplx z) { return z.real(); });
}
inline ComplexField imag_part(const ComplexField& f) {
    return map(f, [](cplx z) { return z.imag(); });
}
inline ComplexField abs2(const ComplexField& f) {
    return map(f, [](cplx z) { return std::norm(z); });
}

// ---------------------------------------------------------------------------
// Finite differences

namespace detail {

// Fourth-order first derivative of n samples spaced h apart, read with the
// given stride. Central 5-point stencil inside, one-sided 5-point stencils
// on the two outermost nodes at each end.
inline void diff_strided(const cplx* in, cplx* out, int n, std::ptrdiff_t stride, double h) {
    const double c = 1.0 / (12.0 * h);
    auto f = [&](int k) { return in[k * stride]; };
    for (int k = 2; k < n - 2; ++k)
        out[k * stride] = (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2)) * c;
    out[0] = (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) * c;
    out[stride] = (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) * c;
    const int e = n - 1;
    out[e * stride] =
        (25.0 * f(e) - 48.0 * f(e - 1) + 36.0 * f(e - 2) - 16.0 * f(e - 3) + 3.0 * f(e - 4)) * c;
    out[(e - 1) * stride] =
        (3.0 * f(e) + 10.0 * f(e - 1) - 18.0 * f(e - 2) + 6.0 * f(e - 3) - f(e - 4)) * c;
}

}  // namespace detail

// Derivative of a single line of samples.
inline std::vector<cplx> diff_line(std::span<const cplx> f, double h) {
    if (f.size() < 5) throw DimensionError("differentiation needs at least 5 samples");
    std::vector<cplx> out(f.size());
    detail::diff_strided(f.data(), out.data(), static_cast<int>(f.size()), 1, h);
    return out;
}

enum class Axis { X, T, XT };

inline ComplexField differentiate(const ComplexField& f, Axis mode) {
    const Grid& g = f.grid();
    if (mode == Axis::XT) return differentiate(differentiate(f, Axis::T), Axis::X);
    ComplexField out(g);
    const cplx* in = f.values().data();
    cplx* o = out.values().data();
    if (mode == Axis::X) {
        if (g.nx() < 5) throw DimensionError("x-derivative needs at least 5 nodes");
        for (int j = 0; j < g.nt(); ++j) {
            const std::size_t off = static_cast<std::size_t>(j) * g.nx();
            detail::diff_strided(in + off, o + off, g.nx(), 1, g.hx());
        }
    } else {
        if (g.nt() < 5) throw DimensionError("t-derivative needs at least 5 nodes");
        for (int i = 0; i < g.nx(); ++i)
            detail::diff_strided(in + i, o + i, g.nt(), g.nx(), g.ht());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Antiderivatives and quadrature

enum class Anchor { Left, Right };

// Cumulative composite Simpson integral along a line. With Anchor::Left the
// result is the integral from the first sample; with Anchor::Right it is
// minus the integral up to the last sample, so it vanishes there. The right
// anchored variant mirrors the left one exactly. Odd nodes take a 3-point
// half-interval rule off the preceding even node; n must be odd.
inline std::vector<cplx> cumulative_line(std::span<const cplx> f, double h,
                                         Anchor anchor = Anchor::Left) {
    const int n = static_cast<int>(f.size());
    if (n < 3 || n % 2 == 0) throw DimensionError("cumulative Simpson needs an odd sample count >= 3");
    std::vector<cplx> S(n);
    auto run = [&](auto&& at, auto&& put) {
        put(0, 0.0);
        cplx acc = 0.0;
        for (int k = 0; k + 2 < n; k += 2) {
            put(k + 1, acc + h / 12.0 * (5.0 * at(k) + 8.0 * at(k + 1) - at(k + 2)));
            acc += h / 3.0 * (at(k) + 4.0 * at(k + 1) + at(k + 2));
            put(k + 2, acc);
        }
    };
    if (anchor == Anchor::Left) {
        run([&](int k) { return f[k]; }, [&](int k, cplx v) { S[k] = v; });
    } else {
        // Walk from the right end; d/dx of the result must equal f, and the
        // reversed walk integrates with dx -> -dx.
        run([&](int k) { return f[n - 1 - k]; }, [&](int k, cplx v) { S[n - 1 - k] = -v; });
    }
    return S;
}

inline ComplexField antiderivative_x(const ComplexField& f, Anchor anchor = Anchor::Left) {
    const Grid& g = f.grid();
    ComplexField out(g);
    for (int j = 0; j < g.nt(); ++j) {
        auto s = cumulative_line(f.row(j), g.hx(), anchor);
        std::copy(s.begin(), s.end(), out.row(j).begin());
    }
    return out;
}

// Composite Simpson over an odd number of equally spaced samples.
inline cplx simpson(std::span<const cplx> f, double h) {
    const std::size_t n = f.size();
    if (n < 3 || n % 2 == 0) throw DimensionError("Simpson's rule needs an odd sample count >= 3");
    cplx odd = 0.0, even = 0.0;
    for (std::size_t k = 1; k + 1 < n; k += 2) odd += f[k];
    for (std::size_t k = 2; k + 1 < n; k += 2) even += f[k];
    return h / 3.0 * (f[0] + 4.0 * odd + 2.0 * even + f[n - 1]);
}

inline cplx integrate_line(const ComplexField& f, int j) { return simpson(f.row(j), f.grid().hx()); }

inline std::vector<cplx> integrate_lines(const ComplexField& f) {
    std::vector<cplx> out(f.nt());
    for (int j = 0; j < f.nt(); ++j) out[j] = integrate_line(f, j);
    return out;
}

inline cplx integrate_rect(const ComplexField& f) {
    auto lines = integrate_lines(f);
    return simpson(lines, f.grid().ht());
}

// ---------------------------------------------------------------------------
// Norms

// Discrete L2 norm sqrt(hx ht sum |f|^2) over nodes at least `band` nodes
// away from every edge.
inline double interior_l2(const ComplexField& f, int band = 2) {
    const Grid& g = f.grid();
    double s = 0.0;
    for (int j = band; j < g.nt() - band; ++j)
        for (int i = band; i < g.nx() - band; ++i) s += std::norm(f(i, j));
    return std::sqrt(s * g.hx() * g.ht());
}

inline double interior_max(const ComplexField& f, int band = 2) {
    const Grid& g = f.grid();
    double m = 0.0;
    for (int j = band; j < g.nt() - band; ++j)
        for (int i = band; i < g.nx() - band; ++i) m = std::max(m, std::abs(f(i, j)));
    return m;
}

inline double l2_norm(const ComplexField& f) { return interior_l2(f, 0); }

inline double observed_order(double coarse_error, double fine_error, double ratio = 2.0) {
    return std::log(coarse_error / fine_error) / std::log(ratio);
}

// ---------------------------------------------------------------------------
// Parity

enum class ParityKind { SpaceTime, SpaceOnly };
enum class Dominance { Even, Odd, Mixed };

inline const char* to_string(Dominance d) {
    switch (d) {
        case Dominance::Even: return "Even";
        case Dominance::Odd: return "Odd";
        default: return "Mixed";
    }
}

struct ParityReport {
    double even_norm = 0.0;
    double odd_norm = 0.0;
    Dominance dominant = Dominance::Even;
    double ratio = 0.0;
};

struct ParitySplit {
    ComplexField even;
    ComplexField odd;
    ParityReport report;
};

inline ComplexField reflect(const ComplexField& f, ParityKind kind) {
    const Grid& g = f.grid();
    ComplexField out(g);
    for (int j = 0; j < g.nt(); ++j) {
        const int jr = kind == ParityKind::SpaceTime ? g.nt() - 1 - j : j;
        for (int i = 0; i < g.nx(); ++i) out(i, j) = f(g.nx() - 1 - i, jr);
    }
    return out;
}

// Norms of the even and odd parts restricted to nodes accepted by `keep`.
inline ParityReport parity_report(const ComplexField& even, const ComplexField& odd,
                                  double threshold = 1e-3,
                                  const std::function<bool(int, int)>& keep = {}) {
    const Grid& g = even.grid();
    double se = 0.0, so = 0.0;
    for (int j = 0; j < g.nt(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            if (keep && !keep(i, j)) continue;
            se += std::norm(even(i, j));
            so += std::norm(odd(i, j));
        }
    ParityReport r;
    r.even_norm = std::sqrt(se * g.hx() * g.ht());
    r.odd_norm = std::sqrt(so * g.hx() * g.ht());
    const double hi = std::max(r.even_norm, r.odd_norm);
    const double lo = std::min(r.even_norm, r.odd_norm);
    r.ratio = hi > 0.0 ? lo / hi : 0.0;
    if (r.ratio > threshold)
        r.dominant = Dominance::Mixed;
    else
        r.dominant = r.odd_norm > r.even_norm ? Dominance::Odd : Dominance::Even;
    return r;
}

inline ParitySplit parity_split(const ComplexField& f, ParityKind kind = ParityKind::SpaceTime,
                                double threshold = 1e-3) {
    ComplexField r = reflect(f, kind);
    ComplexField even(f.grid()), odd(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) {
        even[k] = 0.5 * (f[k] + r[k]);
        odd[k] = f[k] - even[k];
    }
    ParityReport rep = parity_report(even, odd, threshold);
    return {std::move(even), std::move(odd), rep};
}

// ---------------------------------------------------------------------------
// CSV output

// Header `x,t,re,im`; rows ordered by t, then x; 17 significant digits.
inline void write_csv(std::ostream& os, const ComplexField& f) {
    const Grid& g = f.grid();
    os << "x,t,re,im\n" << std::setprecision(17);
    for (int j = 0; j < g.nt(); ++j)
        for (int i = 0; i < g.nx(); ++i)
            os << g.x(i) << ',' << g.t(j) << ',' << f(i, j).real() << ',' << f(i, j).imag() << '\n';
}

// Several fields side by side: columns x,t,re_<name>,im_<name>,...
inline void write_csv(std::ostream& os,
                      const std::vector<std::pair<std::string, const ComplexField*>>& cols,
                      int stride_x = 1, int stride_t = 1) {
    if (cols.empty()) return;
    const Grid& g = cols.front().second->grid();
    for (const auto& c : cols) c.second->check_same(*cols.front().second);
    os << "x,t";
    for (const auto& c : cols) os << ",re_" << c.first << ",im_" << c.first;
    os << '\n' << std::setprecision(17);
    for (int j = 0; j < g.nt(); j += stride_t)
        for (int i = 0; i < g.nx(); i += stride_x) {
            os << g.x(i) << ',' << g.t(j);
            for (const auto& c : cols) {
                const cplx z = (*c.second)(i, j);
                os << ',' << z.real() << ',' << z.imag();
            }
            os << '\n';
        }
}

}  // namespace abdeform
