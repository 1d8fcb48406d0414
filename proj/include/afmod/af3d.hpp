#pragma once

// The almost-Fuchsian 3-metric on Sigma x R built from a solved germ:
// g^Y = g (cosh(t) I - sinh(t) g^{-1} Re(sigma))^2 + dt^2, with numerical
// curvature verification, mean-curvature profiles, and the conformal data
// at the boundary at infinity.

#include <afmod/fiber.hpp>
#include <afmod/germ.hpp>

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>

namespace afmod {

/// Solved minimal-surface data (g, sigma) with K_g + |sigma|^2_g = -1, plus
/// the derivative jets needed to evaluate the conformal factor smoothly
/// between vertices.
struct AFGerm {
    const FundamentalMesh* mesh = nullptr;
    ScalarField u;       // log(lambda/lambda0) per class; empty means 0
    QuadDiffField sigma; // zero() for the Fuchsian case
    std::vector<Jet2> ujets;

    bool fuchsian_factor() const { return u.size() == 0; }
};

inline AFGerm make_fuchsian_germ(const FundamentalMesh& mesh) {
    AFGerm g;
    g.mesh = &mesh;
    return g;
}

inline AFGerm make_af_germ(const FundamentalMesh& mesh, const ScalarField& u,
                           const QuadDiffField& sigma) {
    AFGerm g;
    g.mesh = &mesh;
    g.u = u;
    g.sigma = sigma;
    CScalarField uc(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c) uc[c] = u[c];
    g.ujets = scalar_jets(mesh, uc);
    return g;
}

/// Fixed-center quadratic patch of the germ: smooth in z near the center,
/// which keeps nested finite differences consistent.
class LocalGerm {
public:
    LocalGerm(const AFGerm& g, cplx center) : g_(g), z0_(center) {
        if (!g.fuchsian_factor()) {
            // nearest class representative supplies the expansion
            const auto& mesh = *g.mesh;
            double best = 1e300;
            for (int c = 0; c < mesh.num_classes; ++c) {
                const double d = std::abs(mesh.vertices[mesh.rep_of[c]] - center);
                if (d < best) {
                    best = d;
                    cls_ = c;
                }
            }
            z0_ = mesh.vertices[mesh.rep_of[cls_]];
        }
    }

    double u_at(cplx z) const {
        if (g_.fuchsian_factor()) return 0.0;
        const Jet2& j = g_.ujets[cls_];
        const cplx d = z - z0_;
        const cplx val = j.f + j.fz * d + j.fzb * std::conj(d) +
                         0.5 * j.fzz * d * d + j.fzzb * d * std::conj(d) +
                         0.5 * j.fzbzb * std::conj(d) * std::conj(d);
        return val.real();
    }

    double lambda_at(cplx z) const { return std::exp(u_at(z)) * lambda0(z); }

    cplx f_at(cplx z) const {
        return g_.sigma.zero() ? cplx(0) : g_.sigma.eval(z);
    }

    /// |sigma|_g at z.
    double sigma_norm_at(cplx z) const {
        const double l = lambda_at(z);
        return std::abs(f_at(z)) / (l * l);
    }

private:
    const AFGerm& g_;
    cplx z0_;
    int cls_ = -1;
};

using Mat3 = Eigen::Matrix3d;

/// Re(sigma) as a bilinear form in the real chart: with sigma = f dz^2 the
/// components are [[Re f, -Im f], [-Im f, -Re f]].
inline Eigen::Matrix2d re_sigma_matrix(cplx f) {
    Eigen::Matrix2d m;
    m << f.real(), -f.imag(), -f.imag(), -f.real();
    return m;
}

/// The 3-metric sample at (z, t) in the chart (x, y, t), with a pinned
/// expansion patch so derivatives in z stay smooth.
inline Mat3 af_metric_local(const LocalGerm& loc, cplx z, double t) {
    const double lam = loc.lambda_at(z);
    const cplx f = loc.f_at(z);
    const double s = std::abs(f) / (lam * lam);
    if (s >= 1.0) throw OutsideDiscBundle("af_metric: |sigma|_g >= 1");
    Eigen::Matrix2d g2 = lam * lam * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d shape =
        std::cosh(t) * Eigen::Matrix2d::Identity() -
        std::sinh(t) * (g2.inverse() * re_sigma_matrix(f));
    Eigen::Matrix2d block = g2 * shape * shape;
    block = 0.5 * (block + block.transpose().eval()); // symmetrize rounding
    Mat3 out = Mat3::Zero();
    out.topLeftCorner<2, 2>() = block;
    out(2, 2) = 1.0;
    return out;
}

inline Mat3 af_metric_at(const AFGerm& germ, cplx z, double t) {
    return af_metric_local(LocalGerm(germ, z), z, t);
}

/// Closed-form mean curvature (sum of principal curvatures) of the t-slice:
/// the slice principal curvatures are (sinh t -/+ cosh t s)/(cosh t -/+ sinh t s)
/// with s = |sigma|_g, giving H = 2 cosh t sinh t (1 - s^2)/(cosh^2 t - sinh^2 t s^2).
inline double mean_curvature_at(const AFGerm& germ, cplx z, double t) {
    const LocalGerm loc(germ, z);
    const double s = loc.sigma_norm_at(z);
    const double ch = std::cosh(t), sh = std::sinh(t);
    return 2.0 * ch * sh * (1.0 - s * s) / (ch * ch - s * s * sh * sh);
}

/// Finite-difference mean curvature of the t-slice: H = tr(G^{-1} dG/dt)/2
/// for the product metric G(t) + dt^2 with unit normal d/dt.
inline double mean_curvature_fd(const AFGerm& germ, cplx z, double t,
                                double h = 1e-5) {
    const LocalGerm loc(germ, z);
    const Eigen::Matrix2d Gp = af_metric_local(loc, z, t + h).topLeftCorner<2, 2>();
    const Eigen::Matrix2d Gm = af_metric_local(loc, z, t - h).topLeftCorner<2, 2>();
    const Eigen::Matrix2d G = af_metric_local(loc, z, t).topLeftCorner<2, 2>();
    const Eigen::Matrix2d dG = (Gp - Gm) / (2.0 * h);
    return 0.5 * (G.inverse() * dG).trace();
}

namespace detail {

using Christoffel = std::array<Mat3, 3>; // Gamma[l](j,k)

template <class MetricFn>
inline Christoffel christoffel_fd(const MetricFn& gfn, const Eigen::Vector3d& p,
                                  double h) {
    std::array<Mat3, 3> dg; // dg[m] = d g / d x_m
    for (int m = 0; m < 3; ++m) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[m] = h;
        dg[m] = (gfn(p + e) - gfn(p - e)) / (2.0 * h);
    }
    const Mat3 ginv = gfn(p).inverse();
    Christoffel Gam;
    for (int l = 0; l < 3; ++l) Gam[l].setZero();
    for (int l = 0; l < 3; ++l)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                double s = 0;
                for (int m = 0; m < 3; ++m)
                    s += ginv(l, m) *
                         (dg[j](m, k) + dg[k](m, j) - dg[m](j, k));
                Gam[l](j, k) = 0.5 * s;
            }
    return Gam;
}

} // namespace detail

/// Sectional curvature of the plane spanned by (v1, v2) at p = (x, y, t),
/// via nested central differences of the Christoffel symbols.
template <class MetricFn>
inline double sectional_curvature_of(const MetricFn& gfn,
                                     const Eigen::Vector3d& p,
                                     Eigen::Vector3d v1, Eigen::Vector3d v2,
                                     double h) {
    const Mat3 g = gfn(p);
    const double gram = (v1.dot(g * v1)) * (v2.dot(g * v2)) -
                        std::pow(v1.dot(g * v2), 2);
    if (gram < 1e-10) throw DegeneratePlane("sectional curvature: plane degenerate");

    std::array<detail::Christoffel, 3> dGam_p, dGam_m;
    for (int m = 0; m < 3; ++m) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[m] = h;
        dGam_p[m] = detail::christoffel_fd(gfn, p + e, h);
        dGam_m[m] = detail::christoffel_fd(gfn, p - e, h);
    }
    const detail::Christoffel Gam = detail::christoffel_fd(gfn, p, h);

    // R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
    //           + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}
    const auto Rcomp = [&](int l, int i, int j, int k) {
        double r = (dGam_p[i][l](j, k) - dGam_m[i][l](j, k)) / (2.0 * h) -
                   (dGam_p[j][l](i, k) - dGam_m[j][l](i, k)) / (2.0 * h);
        for (int m = 0; m < 3; ++m)
            r += Gam[l](i, m) * Gam[m](j, k) - Gam[l](j, m) * Gam[m](i, k);
        return r;
    };
    // sec = g(R(v1, v2) v2, v1) / gram
    double num = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    for (int m = 0; m < 3; ++m)
                        num += v1[i] * v2[j] * v2[k] * Rcomp(l, i, j, k) *
                               g(l, m) * v1[m];
    return num / gram;
}

/// Sectional curvature of the almost-Fuchsian metric, with Richardson
/// extrapolation over a halving step sweep.
inline double sectional_curvature_fd(const AFGerm& germ, cplx z, double t,
                                     const Eigen::Vector3d& v1,
                                     const Eigen::Vector3d& v2,
                                     double h = 1e-3) {
    const LocalGerm loc(germ, z);
    const auto gfn = [&](const Eigen::Vector3d& p) {
        return af_metric_local(loc, cplx(p[0], p[1]), p[2]);
    };
    const Eigen::Vector3d p(z.real(), z.imag(), t);
    const double k1 = sectional_curvature_of(gfn, p, v1, v2, h);
    const double k2 = sectional_curvature_of(gfn, p, v1, v2, h / 2.0);
    return (4.0 * k2 - k1) / 3.0; // second-order Richardson
}

/// Boundary-at-infinity conformal representatives
/// g_pm = g (1 + |sigma|^2_g) -/+ 2 Re(sigma), as 2x2 forms per class.
inline std::vector<Eigen::Matrix2d> boundary_metric(const AFGerm& germ,
                                                    int sign) {
    const auto& mesh = *germ.mesh;
    std::vector<Eigen::Matrix2d> out(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c) {
        const cplx z = mesh.vertices[mesh.rep_of[c]];
        // vertex-sampled values keep the eigenvalue identity exact algebra
        const double lam =
            (germ.fuchsian_factor() ? 1.0 : std::exp(germ.u[c])) * lambda0(z);
        const cplx f = germ.sigma.zero() ? cplx(0) : germ.sigma.eval(z);
        const double s = std::abs(f) / (lam * lam);
        out[c] = lam * lam * (1.0 + s * s) * Eigen::Matrix2d::Identity() -
                 2.0 * sign * re_sigma_matrix(f);
    }
    return out;
}

namespace detail {

/// Beltrami coefficient of the conformal class of an SPD 2x2 form.
inline cplx beltrami_of_form(const Eigen::Matrix2d& m) {
    const double E = m(0, 0), F = m(0, 1), G = m(1, 1);
    const double det = E * G - F * F;
    if (det <= 0) throw NormalizationError("beltrami: form not positive");
    return cplx(E - G, 2.0 * F) / (E + G + 2.0 * std::sqrt(det));
}

/// Beltrami coefficient of the conformal structure encoded by a half-plane
/// point under the j-map (compatible metric [[1, -x], [-x, x^2+y^2]]/y).
inline cplx beltrami_of_halfplane(cplx zeta) {
    const double x = zeta.real(), y = zeta.imag();
    if (y <= 0) throw NormalizationError("beltrami: point not in half-plane");
    Eigen::Matrix2d m;
    m << 1.0, -x, -x, x * x + y * y;
    return beltrami_of_form(m);
}

} // namespace detail

/// Cross-check of the two descriptions of the boundary conformal classes:
/// the 2x2 boundary forms versus the pair of half-plane points produced by
/// the fibre Hodge map applied to the section data in the small
/// normalization. Returns the sup deviation of Beltrami coefficients.
inline double fiber_consistency_check(const AFGerm& germ) {
    const auto& mesh = *germ.mesh;
    const auto gp = boundary_metric(germ, +1);
    const auto gm = boundary_metric(germ, -1);
    double sup = 0;
    for (int c = 0; c < mesh.num_classes; ++c) {
        const cplx z = mesh.vertices[mesh.rep_of[c]];
        const double lam =
            (germ.fuchsian_factor() ? 1.0 : std::exp(germ.u[c])) * lambda0(z);
        const cplx f = germ.sigma.zero() ? cplx(0) : germ.sigma.eval(z);
        const double s2 = std::norm(f) / std::pow(lam, 4);
        // small normalization: g_s = (1 + |sigma|_g^2)/2 * g, in which
        // sigma = lambda_s^2 (u - i v) dz^2
        const double lam_s2 = lam * lam * (1.0 + s2) / 2.0;
        const cplx uv = std::conj(f) / lam_s2; // u + i v
        const FiberPoint p{cplx(0, 1), uv};
        if (p.r() >= 1.0)
            throw NormalizationError("fiber_consistency_check: |sigma|_s >= 1");
        const auto [a1, a2] = hodge_alpha(p);
        // alpha's first component carries the (+) boundary class, the
        // second the (-) class
        const double d1 = std::abs(detail::beltrami_of_form(gp[c]) -
                                   detail::beltrami_of_halfplane(a1.z));
        const double d2 = std::abs(detail::beltrami_of_form(gm[c]) -
                                   detail::beltrami_of_halfplane(a2.z));
        sup = std::max({sup, d1, d2});
    }
    return sup;
}

} // namespace afmod
