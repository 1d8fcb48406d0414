#pragma once

// Models of the hyperbolic plane (half-plane and Poincare disc), hyperbolic
// 3-space, and their isometry group actions by 2x2 matrices. Shared matrix
// substrate for everything else in the library.

#include <afmod/error.hpp>

#include <cmath>
#include <complex>

namespace afmod {

using cplx = std::complex<double>;

/// Element of SL(2,C) (or GL(2,C); validity is checked by callers via the
/// predicates below). Unnormalized on purpose: PSL identifications are
/// handled by comparing up to sign.
struct Mat2C {
    cplx a{1}, b{0}, c{0}, d{1};

    static Mat2C identity() { return {}; }

    cplx det() const { return a * d - b * c; }
    cplx trace() const { return a + d; }

    Mat2C inverse() const {
        const cplx dt = det();
        return {d / dt, -b / dt, -c / dt, a / dt};
    }

    Mat2C operator*(const Mat2C& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }

    Mat2C operator*(cplx s) const { return {a * s, b * s, c * s, d * s}; }
    Mat2C operator+(const Mat2C& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2C operator-(const Mat2C& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    Mat2C operator-() const { return {-a, -b, -c, -d}; }

    bool is_special(double tol = 1e-12) const { return std::abs(det() - 1.0) <= tol; }
    bool is_real(double tol = 1e-12) const {
        return std::abs(a.imag()) <= tol && std::abs(b.imag()) <= tol &&
               std::abs(c.imag()) <= tol && std::abs(d.imag()) <= tol;
    }
    bool is_traceless(double tol = 1e-12) const { return std::abs(trace()) <= tol; }

    /// Frobenius distance, used for dedup up to sign.
    double dist(const Mat2C& o) const {
        return std::sqrt(std::norm(a - o.a) + std::norm(b - o.b) +
                         std::norm(c - o.c) + std::norm(d - o.d));
    }
    double norm() const {
        return std::sqrt(std::norm(a) + std::norm(b) + std::norm(c) + std::norm(d));
    }
};

inline Mat2C operator*(cplx s, const Mat2C& m) { return m * s; }

/// Matrix exponential via scaling-and-squaring on the power series.
inline Mat2C expm(const Mat2C& x) {
    int s = 0;
    double n = x.norm();
    while (n > 0.5) { n /= 2; ++s; }
    const double scale = std::ldexp(1.0, -s);
    const Mat2C xs = x * cplx(scale);
    Mat2C term = Mat2C::identity();
    Mat2C sum = term;
    for (int k = 1; k <= 16; ++k) {
        term = term * xs * cplx(1.0 / k);
        sum = sum + term;
    }
    for (int k = 0; k < s; ++k) sum = sum * sum;
    return sum;
}

enum class H2Model { HalfPlane, Disc };

/// Point of the hyperbolic plane in one of the two standard models.
struct H2Point {
    cplx z{0.0, 1.0};
    H2Model model = H2Model::HalfPlane;
};

/// Point of hyperbolic 3-space in the upper half-space model, identified
/// with the quaternion z + j*y.
struct H3Point {
    cplx z{0};
    double y{1};
};

/// Mobius action of SL(2,R) on the upper half plane (or of SU(1,1)-type
/// matrices on the disc; the determinant-1 check is the same).
inline H2Point act_h2(const Mat2C& A, const H2Point& p) {
    if (!A.is_special(1e-9)) throw InvalidGroupElement("act_h2: det != 1");
    if (p.model == H2Model::HalfPlane && !A.is_real(1e-9))
        throw InvalidGroupElement("act_h2: non-real matrix on half-plane");
    return {(A.a * p.z + A.b) / (A.c * p.z + A.d), p.model};
}

/// Quaternionic Mobius action of SL(2,C) on H^3, in closed form.
inline H3Point act_h3(const Mat2C& A, const H3Point& p) {
    if (!A.is_special(1e-9)) throw InvalidGroupElement("act_h3: det != 1");
    const cplx num = A.c * p.z + A.d;
    const double D = std::norm(num) + std::norm(A.c) * p.y * p.y;
    if (!(D > 0)) throw DegenerateAction("act_h3: degenerate denominator");
    const cplx z1 = ((A.a * p.z + A.b) * std::conj(num) +
                     A.a * std::conj(A.c) * p.y * p.y) / D;
    return {z1, p.y / D};
}

/// Hyperbolic distance in either model of the plane.
inline double dist_h2(const H2Point& p, const H2Point& q) {
    if (p.model != q.model) throw ModelMismatch("dist_h2: mixed models");
    double arg;
    if (p.model == H2Model::HalfPlane) {
        arg = 1.0 + std::norm(p.z - q.z) / (2.0 * p.z.imag() * q.z.imag());
    } else {
        arg = 1.0 + 2.0 * std::norm(p.z - q.z) /
                        ((1.0 - std::norm(p.z)) * (1.0 - std::norm(q.z)));
    }
    return std::acosh(std::max(1.0, arg));
}

/// Cayley transform half-plane <-> disc, normalized so that i <-> 0.
inline H2Point cayley(const H2Point& p) {
    const cplx I(0, 1);
    if (p.model == H2Model::HalfPlane)
        return {(p.z - I) / (p.z + I), H2Model::Disc};
    return {I * (1.0 + p.z) / (1.0 - p.z), H2Model::HalfPlane};
}

/// Cayley conjugator as a matrix: C maps the half-plane to the disc,
/// z -> (z-i)/(z+i), normalized to determinant 1. Conjugating SL(2,R) by C
/// produces the SU(1,1) copy acting on the disc.
inline const Mat2C& cayley_matrix() {
    // det([[1,-i],[1,i]]) = 2i; divide by sqrt(2i) = 1+i.
    static const Mat2C C = Mat2C{cplx(1, 0), cplx(0, -1), cplx(1, 0), cplx(0, 1)} *
                           (1.0 / cplx(1, 1));
    return C;
}

/// Conjugate a half-plane isometry into its disc-model (SU(1,1)) form.
inline Mat2C to_disc_model(const Mat2C& A) {
    return cayley_matrix() * A * cayley_matrix().inverse();
}

inline Mat2C to_halfplane_model(const Mat2C& A) {
    return cayley_matrix().inverse() * A * cayley_matrix();
}

} // namespace afmod
