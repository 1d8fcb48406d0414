#pragma once

// Higgs pair attached to a minimal-surface germ, the flat SL(2,C)
// connection B = A + phi + phi^*, holonomy representations by ODE
// transport with square-root cocycles across side pairings, and the
// developing equivariant minimal immersion into H^3.

#include <afmod/af3d.hpp>
#include <afmod/germ.hpp>
#include <afmod/surface.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace afmod {

namespace detail {

inline cplx mob(const Mat2C& m, cplx z) { return (m.a * z + m.b) / (m.c * z + m.d); }

/// Derivative of the Mobius map of a determinant-1 matrix.
inline cplx mob_deriv(const Mat2C& m, cplx z) {
    const cplx den = m.c * z + m.d;
    return m.det() / (den * den);
}

} // namespace detail

/// Smooth evaluators for the metric data (lambda, f) of a germ anywhere in
/// the disc, by reducing to the Dirichlet fundamental domain and
/// transporting with the automorphy weights. The Fuchsian case is exact.
class GermField {
public:
    GermField(const FuchsianGroup& G, const AFGerm& germ)
        : G_(&G), germ_(&germ) {}

    struct Reduction {
        cplx w;    // representative in the fundamental domain
        Mat2C M;   // w = M z
        cplx dM;   // M'(z)
    };

    Reduction reduce(cplx z) const {
        Reduction r{z, Mat2C::identity(), cplx(1)};
        for (int pass = 0; pass < 64; ++pass) {
            int best = -1;
            double bd = std::abs(r.w) - 1e-14;
            for (int k = 0; k < 8; ++k) {
                const Mat2C inv = G_->generators[k].inverse();
                const double d = std::abs(detail::mob(inv, r.w));
                if (d < bd) {
                    bd = d;
                    best = k;
                }
            }
            if (best < 0) return r;
            const Mat2C inv = G_->generators[best].inverse();
            r.dM *= detail::mob_deriv(inv, r.w);
            r.w = detail::mob(inv, r.w);
            r.M = inv * r.M;
        }
        throw PathLiftError("GermField: domain reduction did not terminate");
    }

    double lambda(cplx z) const {
        if (germ_->fuchsian_factor()) return lambda0(z);
        const Reduction r = reduce(z);
        return std::exp(u_of(r.w)) * lambda0(z);
    }

    /// d/dz of log(lambda).
    cplx dz_log_lambda(cplx z) const {
        const cplx base = std::conj(z) / (1.0 - std::norm(z));
        if (germ_->fuchsian_factor()) return base;
        const Reduction r = reduce(z);
        return uz_of(r.w) * r.dM + base;
    }

    cplx f(cplx z) const {
        if (germ_->sigma.zero()) return cplx(0);
        const Reduction r = reduce(z);
        return germ_->sigma.eval(r.w) * r.dM * r.dM;
    }

private:
    int nearest_class(cplx w) const {
        const auto& mesh = *germ_->mesh;
        int best = 0;
        double bd = 1e300;
        for (int c = 0; c < mesh.num_classes; ++c) {
            const double d = std::abs(mesh.vertices[mesh.rep_of[c]] - w);
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        return best;
    }

    double u_of(cplx w) const {
        const auto& mesh = *germ_->mesh;
        const int c = nearest_class(w);
        const Jet2& j = germ_->ujets[c];
        const cplx d = w - mesh.vertices[mesh.rep_of[c]];
        const cplx val = j.f + j.fz * d + j.fzb * std::conj(d) +
                         0.5 * j.fzz * d * d + j.fzzb * d * std::conj(d) +
                         0.5 * j.fzbzb * std::conj(d) * std::conj(d);
        return val.real();
    }

    cplx uz_of(cplx w) const {
        const auto& mesh = *germ_->mesh;
        const int c = nearest_class(w);
        const Jet2& j = germ_->ujets[c];
        const cplx d = w - mesh.vertices[mesh.rep_of[c]];
        return j.fz + j.fzz * d + j.fzzb * std::conj(d);
    }

    const FuchsianGroup* G_;
    const AFGerm* germ_;
};

/// The Higgs pair and flat connection samples in the global holomorphic
/// trivialization of E = L + L^{-1}, L^2 = T(Sigma), with bundle metric
/// diag(lambda, 1/lambda).
struct HiggsData {
    const FuchsianGroup* group = nullptr;
    const AFGerm* germ = nullptr;
    GermField field;

    HiggsData(const FuchsianGroup& G, const AFGerm& g) : group(&G), germ(&g), field(G, g) {}

    /// A + phi in the dz direction.
    Mat2C B_z(cplx z) const {
        const cplx c = field.dz_log_lambda(z);
        const cplx f = field.f(z);
        return Mat2C{c, cplx(0.5), -0.5 * f, -c};
    }

    /// A + phi^* in the dzbar direction.
    Mat2C B_zb(cplx z) const {
        const double lam = field.lambda(z);
        const cplx f = field.f(z);
        return Mat2C{cplx(0), std::conj(f) / (2.0 * lam * lam),
                     cplx(0.5 * lam * lam), cplx(0)};
    }

    /// Full real 1-form evaluated on the complex velocity v.
    Mat2C B(cplx z, cplx v) const { return B_z(z) * v + B_zb(z) * std::conj(v); }

    /// The Higgs field phi = (1/2) [[0,1],[0,0]] dz in this trivialization.
    Mat2C phi(cplx) const { return Mat2C{cplx(0), cplx(0.5), cplx(0), cplx(0)}; }
};

/// Builds the Higgs data after checking the Gauss equation at the vertices
/// with the jet-based curvature stencil.
inline HiggsData build_higgs(const FuchsianGroup& G, const AFGerm& germ,
                             double gauss_tol = 5e-2) {
    if (!germ.fuchsian_factor()) {
        const auto& mesh = *germ.mesh;
        ScalarField lam(mesh.num_classes);
        for (int c = 0; c < mesh.num_classes; ++c)
            lam[c] = std::exp(germ.u[c]) * lambda0(mesh.vertices[mesh.rep_of[c]]);
        const ScalarField K = gauss_curvature(mesh, lam);
        const ScalarField h = sigma_norm(mesh, lam, germ.sigma);
        double worst = 0;
        for (int c = 0; c < mesh.num_classes; ++c)
            worst = std::max(worst, std::abs(K[c] + h[c] * h[c] + 1.0));
        if (worst > gauss_tol)
            throw GaussResidualTooLarge("build_higgs: Gauss residual " +
                                        std::to_string(worst));
    }
    return HiggsData(G, germ);
}

/// Parallel transport along a polyline by the classical 4th-order one-step
/// method on dF/ds = -B(gamma') F; `conn(z, v)` is the connection 1-form
/// evaluated on the complex velocity v.
template <class Conn>
inline Mat2C transport_along(const Conn& conn, const std::vector<cplx>& path,
                             int steps_per_segment = 64) {
    Mat2C F = Mat2C::identity();
    for (size_t seg = 0; seg + 1 < path.size(); ++seg) {
        const cplx z0 = path[seg], z1 = path[seg + 1];
        const cplx v = (z1 - z0) / double(steps_per_segment);
        const auto rhs = [&](cplx z, const Mat2C& X) { return -(conn(z, v) * X); };
        for (int i = 0; i < steps_per_segment; ++i) {
            const cplx z = z0 + double(i) * v;
            const Mat2C k1 = rhs(z, F);
            const Mat2C k2 = rhs(z + 0.5 * v, F + 0.5 * k1);
            const Mat2C k3 = rhs(z + 0.5 * v, F + 0.5 * k2);
            const Mat2C k4 = rhs(z + v, F + k3);
            F = F + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * cplx(1.0 / 6.0);
        }
    }
    return F;
}

inline Mat2C holonomy_along(const HiggsData& H, const std::vector<cplx>& path,
                            int steps_per_segment = 64) {
    return transport_along([&](cplx z, cplx v) { return H.B(z, v); }, path,
                           steps_per_segment);
}

struct HolonomyRep {
    cplx basepoint{0};
    std::array<Mat2C, 8> rho;
    std::array<int, 8> branch_bits{}; // 1 if the square-root branch was flipped
    double relator_residual = 0;

    std::array<cplx, 8> traces() const {
        std::array<cplx, 8> t;
        for (int k = 0; k < 8; ++k) t[k] = rho[k].trace();
        return t;
    }
};

/// Residual of the octagon relator evaluated on a candidate representation
/// (distance of the relator image to +-I).
inline double relator_residual_of(const std::array<Mat2C, 8>& rho) {
    static const int word[8] = {0, 5, 2, 7, 4, 1, 6, 3};
    Mat2C P = Mat2C::identity();
    for (int i = 0; i < 8; ++i) {
        const int k = word[i];
        P = P * (k < 4 ? rho[k] : rho[k - 4].inverse());
    }
    const Mat2C I = Mat2C::identity();
    return std::min(P.dist(I), P.dist(-I));
}

/// Holonomy representation of the eight side-pairing generators: frame
/// transport from the basepoint to gamma_k(basepoint) composed with the
/// square-root automorphy cocycle diag((gamma_k')^{-1/2}, (gamma_k')^{1/2})
/// of the L +- trivializations.
inline HolonomyRep generator_holonomies(const HiggsData& H, cplx basepoint = 0,
                                        int steps = 512, double tol = 1e-4) {
    HolonomyRep rep;
    rep.basepoint = basepoint;
    const auto& G = *H.group;
    for (int k = 0; k < 8; ++k) {
        const cplx end = detail::mob(G.generators[k], basepoint);
        const Mat2C T = holonomy_along(H, {basepoint, end}, steps);
        const cplx dg = detail::mob_deriv(G.generators[k], basepoint);
        const cplx root = std::sqrt(dg); // principal branch
        const Mat2C cocycle{root, cplx(0), cplx(0), 1.0 / root};
        rep.rho[k] = T.inverse() * cocycle;
        rep.branch_bits[k] = 0;
    }
    rep.relator_residual = relator_residual_of(rep.rho);
    if (rep.relator_residual > tol)
        throw HolonomyInconsistent("generator_holonomies: relator residual " +
                                   std::to_string(rep.relator_residual));
    return rep;
}

/// Plaquette curvature fields: per mesh class, transport around a small
/// chart square of side h and split (I - P)/h^2 ~ F_xy into the diagonal
/// (Gauss residual tracking) and off-diagonal (dbar sigma tracking) parts,
/// normalized per unit metric volume.
struct HitchinResidual {
    ScalarField gauss_part; // |epsilon|/2 when the Gauss equation misses by epsilon
    ScalarField dbar_part;
};

inline HitchinResidual hitchin_residual(const HiggsData& H, double h = 0.01,
                                        int steps_per_side = 8,
                                        std::vector<int> classes = {}) {
    const auto& mesh = *H.germ->mesh;
    if (classes.empty())
        for (int c = 0; c < mesh.num_classes; ++c) classes.push_back(c);
    HitchinResidual out;
    out.gauss_part = ScalarField::Zero(mesh.num_classes);
    out.dbar_part = ScalarField::Zero(mesh.num_classes);
    for (int c : classes) {
        const cplx z = mesh.vertices[mesh.rep_of[c]];
        const std::vector<cplx> loop = {
            z + cplx(-h / 2, -h / 2), z + cplx(h / 2, -h / 2),
            z + cplx(h / 2, h / 2),   z + cplx(-h / 2, h / 2),
            z + cplx(-h / 2, -h / 2)};
        const Mat2C P = holonomy_along(H, loop, steps_per_side);
        const Mat2C Fxy = (Mat2C::identity() - P) * cplx(1.0 / (h * h));
        const double lam = H.field.lambda(z);
        out.gauss_part[c] = 0.5 * std::abs(Fxy.a - Fxy.d) / (lam * lam);
        out.dbar_part[c] =
            std::max(std::abs(Fxy.b), std::abs(Fxy.c)) / (lam * lam);
    }
    return out;
}

/// Equivariant developing map into H^3 = SL(2,C)/SU(2), realized as the
/// positive hermitian determinant-1 matrix P(z) = F(z)^* H_E(z) F(z) with
/// H_E = diag(lambda, 1/lambda) and F the flat frame from the basepoint.
struct H3Sample {
    cplx z;
    Eigen::Matrix2cd P;
};

inline Eigen::Matrix2cd to_eigen(const Mat2C& m) {
    Eigen::Matrix2cd e;
    e << m.a, m.b, m.c, m.d;
    return e;
}

inline Eigen::Matrix2cd develop_point(const HiggsData& H, cplx z,
                                      cplx basepoint = 0, int steps = 128) {
    const Mat2C F = holonomy_along(H, {basepoint, z}, steps);
    const double lam = H.field.lambda(z);
    Eigen::Matrix2cd HE;
    HE << lam, 0, 0, 1.0 / lam;
    const Eigen::Matrix2cd Fe = to_eigen(F);
    Eigen::Matrix2cd P = Fe.adjoint() * HE * Fe;
    if (!(P(0, 0).real() > 0) || !(P(1, 1).real() > 0) ||
        !std::isfinite(P(0, 0).real()))
        throw DevelopingMapError("develop_point: frame left the model");
    return P / std::sqrt(std::abs(P.determinant().real()));
}

inline std::vector<H3Sample> develop_immersion(const HiggsData& H,
                                               const std::vector<cplx>& samples,
                                               cplx basepoint = 0,
                                               int steps = 128) {
    std::vector<H3Sample> out;
    out.reserve(samples.size());
    for (cplx z : samples) out.push_back({z, develop_point(H, z, basepoint, steps)});
    return out;
}

/// Hyperbolic distance between two points of H^3 in the hermitian-matrix
/// model: cosh(d) = tr(P^{-1} Q)/2.
inline double h3_dist(const Eigen::Matrix2cd& P, const Eigen::Matrix2cd& Q) {
    const double c = ((P.inverse() * Q).trace()).real() / 2.0;
    return std::acosh(std::max(1.0, c));
}

/// Upper half-space coordinates (x1, x2, height) of a hermitian-model point.
inline Eigen::Vector3d h3_coords(const Eigen::Matrix2cd& P) {
    const double y = 1.0 / P(1, 1).real();
    const cplx w = P(0, 1) * y;
    return {w.real(), w.imag(), y};
}

/// First and second fundamental forms of the developed surface at z, by
/// finite differences of the embedding in upper half-space coordinates.
struct FundamentalForms {
    Eigen::Matrix2d first;  // components in the (x, y) chart of the domain
    Eigen::Matrix2d second;
};

inline FundamentalForms developed_forms(const HiggsData& H, cplx z,
                                        double h = 1e-3, cplx basepoint = 0,
                                        int steps = 128) {
    const auto emb = [&](double x, double y) {
        return h3_coords(develop_point(H, cplx(x, y), basepoint, steps));
    };
    const double x = z.real(), y = z.imag();
    const Eigen::Vector3d p0 = emb(x, y);
    const Eigen::Vector3d px = (emb(x + h, y) - emb(x - h, y)) / (2 * h);
    const Eigen::Vector3d py = (emb(x, y + h) - emb(x, y - h)) / (2 * h);
    const Eigen::Vector3d pxx =
        (emb(x + h, y) - 2 * p0 + emb(x - h, y)) / (h * h);
    const Eigen::Vector3d pyy =
        (emb(x, y + h) - 2 * p0 + emb(x, y - h)) / (h * h);
    const Eigen::Vector3d pxy = (emb(x + h, y + h) - emb(x + h, y - h) -
                                 emb(x - h, y + h) + emb(x - h, y - h)) /
                                (4 * h * h);

    const double ht = p0[2]; // height coordinate
    const auto dot = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
        return a.dot(b) / (ht * ht);
    };
    FundamentalForms out;
    out.first << dot(px, px), dot(px, py), dot(px, py), dot(py, py);

    // hyperbolic unit normal: conformal model, so the euclidean normal
    // direction works, rescaled to unit hyperbolic length; orientation
    // chosen so the second fundamental form of the developed minimal
    // surface comes out as +Re(sigma)
    Eigen::Vector3d n = py.cross(px);
    const double nn = n.norm();
    if (nn < 1e-14) throw DevelopingMapError("developed_forms: degenerate frame");
    n = n / nn * ht;

    // covariant correction Gamma^k_{ij} v^i w^j for the conformal factor
    // exp(-2 log height)
    const auto gamma = [&](const Eigen::Vector3d& v, const Eigen::Vector3d& w) {
        Eigen::Vector3d g;
        g[0] = -(v[0] * w[2] + v[2] * w[0]) / ht;
        g[1] = -(v[1] * w[2] + v[2] * w[1]) / ht;
        g[2] = (v[0] * w[0] + v[1] * w[1] - v[2] * w[2]) / ht;
        return g;
    };
    const Eigen::Vector3d cxx = pxx + gamma(px, px);
    const Eigen::Vector3d cxy = pxy + gamma(px, py);
    const Eigen::Vector3d cyy = pyy + gamma(py, py);
    out.second << dot(cxx, n), dot(cxy, n), dot(cxy, n), dot(cyy, n);
    return out;
}

} // namespace afmod
