#pragma once

// The unit disc bundle X in the cotangent bundle of the half-plane, with its
// explicit hyperkahler structure, S^1 potential, SL(2,R) moment maps, the
// identification with complex structures / quadratic forms on R^2, and the
// map to the product of two half-planes.

#include <afmod/error.hpp>
#include <afmod/mobius.hpp>

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <utility>

namespace afmod {

/// Point (z,w) of the disc bundle: z in the half-plane, w a cotangent
/// coordinate with |w|*Im(z) < 1.
struct FiberPoint {
    cplx z{0.0, 1.0};
    cplx w{0.0};

    double r() const { return std::abs(w) * z.imag(); }

    void validate() const {
        if (!(z.imag() > 0)) throw OutsideHalfPlane("FiberPoint: Im(z) <= 0");
        if (!(r() < 1.0)) throw OutsideDiscBundle("FiberPoint: |w| Im(z) >= 1");
    }
};

struct FiberTangent {
    cplx dz{0}, dw{0};
};

/// Linear complex structure on R^2 compatible with the orientation.
struct CpxStruct2 {
    Eigen::Matrix2d J;

    void validate(double tol = 1e-12) const {
        if ((J * J + Eigen::Matrix2d::Identity()).norm() > tol * 10)
            throw NotATangentVector("CpxStruct2: J^2 != -I");
        if (!(J(1, 0) > 0)) throw NotATangentVector("CpxStruct2: orientation");
    }
};

/// Complex quadratic form on (R^2, J), stored as a complex symmetric matrix.
struct QuadForm2 {
    Eigen::Matrix2cd q;
};

inline cplx eval_qform(const QuadForm2& q, const Eigen::Vector2d& v, const Eigen::Vector2d& w) {
    return (v.transpose().cast<cplx>() * q.q * w.cast<cplx>())(0);
}

/// The standard complex structure J0 = [[0,-1],[1,0]].
inline Eigen::Matrix2d j0() {
    Eigen::Matrix2d m;
    m << 0, -1, 1, 0;
    return m;
}

/// Identification of the half-plane with complex structures on R^2.
inline CpxStruct2 j_of(const H2Point& p) {
    if (p.model != H2Model::HalfPlane || !(p.z.imag() > 0))
        throw OutsideHalfPlane("j_of");
    const double x = p.z.real(), y = p.z.imag();
    Eigen::Matrix2d m;
    m << x / y, -(x * x + y * y) / y, 1 / y, -x / y;
    return {m};
}

/// Derivative of j_of at z in the complex direction zhat.
inline Eigen::Matrix2d dj_of(const H2Point& p, cplx zhat) {
    const double x = p.z.real(), y = p.z.imag();
    const double xh = zhat.real(), yh = zhat.imag();
    Eigen::Matrix2d m;
    m << xh / y - x * yh / (y * y),
        -(2 * x * xh + 2 * y * yh) / y + (x * x + y * y) * yh / (y * y),
        -yh / (y * y), -xh / y + x * yh / (y * y);
    return m;
}

/// Quadratic-form side of the identification T*H = Q(R^2).
inline QuadForm2 q_of(const FiberPoint& p) {
    p.validate();
    const cplx zb = std::conj(p.z), wb = std::conj(p.w);
    Eigen::Matrix2cd m;
    m << wb, -zb * wb, -zb * wb, zb * zb * wb;
    return {m};
}

inline double omega0(const Eigen::Vector2d& v, const Eigen::Vector2d& w) {
    return v.x() * w.y() - v.y() * w.x();
}

/// Hermitian form h_J = omega0(., J.) + i omega0(., .) on (R^2, J).
inline cplx hermitian_h(const CpxStruct2& J, const Eigen::Vector2d& v,
                        const Eigen::Vector2d& w) {
    return cplx(omega0(v, J.J * w), omega0(v, w));
}

/// Tangent vector at J (anticommuting matrix) to the associated quadratic
/// form q = h_J(Jhat . , .).
inline QuadForm2 qform_of_tangent(const CpxStruct2& J, const Eigen::Matrix2d& Jhat,
                                  double tol = 1e-10) {
    if ((J.J * Jhat + Jhat * J.J).norm() > tol)
        throw NotATangentVector("qform_of_tangent: anticommutator too large");
    Eigen::Matrix2cd m;
    const std::array<Eigen::Vector2d, 2> e = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) m(i, k) = hermitian_h(J, Jhat * e[i], e[k]);
    return {m};
}

/// Norm of a quadratic form at its base structure J, |q(v,v)| / h_J(v,v).
inline double qform_norm(const CpxStruct2& J, const QuadForm2& q,
                         const Eigen::Vector2d& v = Eigen::Vector2d(1, 0)) {
    return std::abs(eval_qform(q, v, v)) / hermitian_h(J, v, v).real();
}

inline double tangent_norm(const Eigen::Matrix2d& Jhat) {
    return std::sqrt(0.5 * (Jhat * Jhat).trace());
}

/// Complex duality pairing <q(z,w), dj(z) zhat>, evaluated with the vector v.
/// Equals conj(w * zhat) independently of v.
inline cplx duality_pair(const FiberPoint& p, cplx zhat,
                         const Eigen::Vector2d& v = Eigen::Vector2d(1, 0)) {
    p.validate();
    const H2Point base{p.z, H2Model::HalfPlane};
    const CpxStruct2 J = j_of(base);
    const Eigen::Matrix2d Jhat = dj_of(base, zhat);
    const QuadForm2 q = q_of(p);
    return eval_qform(q, Jhat * v, v) / hermitian_h(J, v, v).real();
}

/// Pointwise hyperkahler data at a fiber point.
struct HKFrame {
    Eigen::Matrix4d G;                 // metric on basis (x, y, u, v)
    std::array<Eigen::Matrix4d, 3> Omega;
    std::array<Eigen::Matrix4d, 3> J;
    double H;                          // S^1 potential sqrt(1 - r^2)
};

namespace detail {

// Complexified components (zhat, what) of the real basis (x, y, u, v).
inline std::pair<cplx, cplx> basis_cplx(int a) {
    switch (a) {
        case 0: return {cplx(1, 0), cplx(0, 0)};
        case 1: return {cplx(0, 1), cplx(0, 0)};
        case 2: return {cplx(0, 0), cplx(1, 0)};
        default: return {cplx(0, 0), cplx(0, 1)};
    }
}

} // namespace detail

/// Donaldson's invariant hyperkahler metric evaluated on tangent pairs.
/// The symmetric product "dconj(a) db" acts as conj(a1) b2 + b1 conj(a2).
inline double hk_metric(const FiberPoint& p, const FiberTangent& t1,
                        const FiberTangent& t2) {
    const double y = p.z.imag();
    const double r = p.r();
    const double s = std::sqrt(1.0 - r * r);
    const cplx gzz(1.0 / (2.0 * y * y * s), 0.0);
    const cplx gww(y * y / (2.0 * s), 0.0);
    const cplx gzw = cplx(0, 1) * y * std::conj(p.w) / (2.0 * s);
    const cplx gwz = -cplx(0, 1) * y * p.w / (2.0 * s);
    cplx val = gzz * (std::conj(t1.dz) * t2.dz + std::conj(t2.dz) * t1.dz) +
               gww * (std::conj(t1.dw) * t2.dw + std::conj(t2.dw) * t1.dw) +
               gzw * (std::conj(t1.dz) * t2.dw + std::conj(t2.dz) * t1.dw) +
               gwz * (std::conj(t1.dw) * t2.dz + std::conj(t2.dw) * t1.dz);
    return val.real();
}

/// Full pointwise frame: metric, three symplectic forms, three complex
/// structures (J2, J3 recovered numerically as Omega^{-1} G), potential.
inline HKFrame hk_frame(const FiberPoint& p) {
    p.validate();
    if (!(p.r() < 1.0 - 1e-9)) throw NearBoundary("hk_frame: r too close to 1");

    HKFrame f;
    // J1 is multiplication by i on (zhat, what).
    Eigen::Matrix4d J1;
    J1 << 0, -1, 0, 0,
          1,  0, 0, 0,
          0,  0, 0, -1,
          0,  0, 1,  0;

    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            auto [za, wa] = detail::basis_cplx(a);
            auto [zb, wb] = detail::basis_cplx(b);
            f.G(a, b) = hk_metric(p, {za, wa}, {zb, wb});
            // dz ^ dw on the complexified pair
            const cplx dzdw = za * wb - zb * wa;
            f.Omega[1](a, b) = dzdw.real();
            f.Omega[2](a, b) = dzdw.imag();
        }
    // omega_1(u, v) = g(J1 u, v)
    f.Omega[0] = J1.transpose() * f.G;

    f.J[0] = J1;
    f.J[1] = f.Omega[1].inverse() * f.G;
    f.J[2] = f.Omega[2].inverse() * f.G;
    f.H = std::sqrt(1.0 - p.r() * p.r());
    return f;
}

/// Moment map for the fibre rotation: H(z,w) = sqrt(1 - Im(z)^2 |w|^2).
inline double s1_hamiltonian(const FiberPoint& p) {
    p.validate();
    return std::sqrt(1.0 - p.r() * p.r());
}

/// <mu_1(z,w), xi> = -sqrt(1 - Im(z)^2 |w|^2) tr(j(z) xi).
inline double mu1_fiber(const FiberPoint& p, const Mat2C& xi) {
    p.validate();
    if (!xi.is_real(1e-10) || !xi.is_traceless(1e-10))
        throw InvalidGroupElement("mu1_fiber: xi must be real traceless");
    const Eigen::Matrix2d J = j_of({p.z, H2Model::HalfPlane}).J;
    const double tr = J(0, 0) * xi.a.real() + J(0, 1) * xi.c.real() +
                      J(1, 0) * xi.b.real() + J(1, 1) * xi.d.real();
    return -std::sqrt(1.0 - p.r() * p.r()) * tr;
}

/// <mu_2 + i mu_3, xi> = w * (b + 2 a z - c z^2), the tautological-form
/// moment map of the cotangent lift.
inline cplx mu23_fiber(const FiberPoint& p, const Mat2C& xi) {
    p.validate();
    if (!xi.is_real(1e-10) || !xi.is_traceless(1e-10))
        throw InvalidGroupElement("mu23_fiber: xi must be real traceless");
    const double a = xi.a.real(), b = xi.b.real(), c = xi.c.real();
    return p.w * (b + 2.0 * a * p.z - c * p.z * p.z);
}

/// Equivariant diffeomorphism X -> H x conj(H) extending the diagonal
/// embedding of the zero section. The fibre coordinate enters antilinearly:
/// the identification of cotangent vectors with quadratic forms conjugates,
/// and only this reading is equivariant for the cotangent-lift action and
/// holomorphic from the second complex structure to (i, -i).
inline std::pair<H2Point, H2Point> hodge_alpha(const FiberPoint& p) {
    p.validate();
    const double x = p.z.real(), y = p.z.imag();
    const double u = p.w.real(), v = -p.w.imag();
    const double gamma = std::sqrt(1.0 - y * y * (u * u + v * v));
    const cplx plus(x - y * y * v / (1.0 - y * u), y * gamma / (1.0 - y * u));
    const cplx minus(x + y * y * v / (1.0 + y * u), y * gamma / (1.0 + y * u));
    return {H2Point{plus, H2Model::HalfPlane}, H2Point{minus, H2Model::HalfPlane}};
}

/// SL(2,R)-action on the disc bundle: (z, w) -> (A z, (cz+d)^2 w).
inline FiberPoint act_X(const Mat2C& A, const FiberPoint& p) {
    p.validate();
    if (!A.is_real(1e-9) || !A.is_special(1e-9))
        throw InvalidGroupElement("act_X: A must be real special");
    const cplx den = A.c * p.z + A.d;
    return {(A.a * p.z + A.b) / den, den * den * p.w};
}

/// Infinitesimal action of xi at p, computed from the closed form of act_X.
/// delta z = b + 2 a z - c z^2, delta w = 2 (c z + d-dot) w with the
/// derivative taken along exp(t xi) at t = 0.
inline FiberTangent infinitesimal_act_X(const Mat2C& xi, const FiberPoint& p) {
    const double a = xi.a.real(), b = xi.b.real(), c = xi.c.real(), d = xi.d.real();
    const cplx dz = b + (a - d) * p.z - c * p.z * p.z;
    // d/dt (c_t z + d_t)^2 w at identity: 2 (c z + d)|_I * (c z + d-dot) w
    const cplx dw = 2.0 * (c * p.z + d) * p.w;
    return {dz, dw};
}

} // namespace afmod
