#pragma once

// Gauss-equation solver on the genus-2 surface and moment-map evaluators.
//
// The conformal gauge: metrics are g = lambda^2 |dz|^2 with lambda = e^u
// lambda_0, u an invariant scalar on vertex classes. The solver finds u with
//
//     Delta_{g0} u - 1 + e^{2u} + |t sigma|^2_{g0} e^{-2u} = 0
//
// (positive Laplacian), which is exactly K_g + |t sigma|^2_g = -1 for
// g = e^{2u} g0. Continuation in t from the hyperbolic metric at t = 0.

#include <afmod/surface.hpp>

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <string>
#include <vector>

namespace afmod {

/// A state of the continuation: log-conformal factor u relative to the
/// hyperbolic metric, the quadratic differential, and the path parameter.
struct GermPair {
    ScalarField u;       // per vertex class
    QuadDiffField sigma; // fixed differential; the solve scales it by t
    double t = 0;
};

struct SolverConfig {
    double newton_tol = 1e-10;
    int max_newton_iters = 25;
    double dt_init = 0.25;
    double dt_min = 1e-4;
    double cg_tol = 1e-12;
    double fd_h = 1e-5;
};

struct ContinuationTrace {
    struct Step {
        double t;
        int newton_iters;
        double residual;
        double max_sigma_norm;    // max over vertices of |t sigma|_{g_t}
        double positivity_margin; // min over vertices of 1 - |t sigma|^2_{g_t}
    };
    std::vector<Step> steps;
};

namespace detail {

/// |t sigma|^2_{g0} per vertex class (t folded into the caller's scaling).
inline ScalarField sigma_sq_g0(const FundamentalMesh& mesh,
                               const QuadDiffField& sigma) {
    const ScalarField lam0 = lambda0_field(mesh);
    ScalarField h = ScalarField::Zero(mesh.num_classes);
    if (sigma.zero()) return h;
    for (int c = 0; c < mesh.num_classes; ++c) {
        const double s = std::abs(sigma.samples[mesh.rep_of[c]]) /
                         (lam0[c] * lam0[c]);
        h[c] = s * s;
    }
    return h;
}

} // namespace detail

/// Residual of the Gauss equation at (u, t*sigma), per vertex class.
inline ScalarField residual_gauss(const FundamentalMesh& mesh,
                                  const ScalarField& u,
                                  const QuadDiffField& sigma, double t) {
    if (!u.allFinite()) throw InvalidState("residual_gauss: non-finite u");
    const ScalarField lam0 = lambda0_field(mesh);
    const ScalarField h0 = t * t * detail::sigma_sq_g0(mesh, sigma);
    const ScalarField lap = laplace_beltrami(mesh, lam0, u);
    ScalarField r(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        r[c] = lap[c] - 1.0 + std::exp(2.0 * u[c]) +
               h0[c] * std::exp(-2.0 * u[c]);
    return r;
}

/// Linearization of residual_gauss in u: L xi = Delta xi + w xi with
/// w = 2 e^{2u} - 2 |t sigma|^2_{g0} e^{-2u}; positive definite exactly on
/// the almost-Fuchsian regime |t sigma|_{g_t} < 1.
inline ScalarField linearized_apply(const FundamentalMesh& mesh,
                                    const ScalarField& u,
                                    const QuadDiffField& sigma, double t,
                                    const ScalarField& xi) {
    const ScalarField lam0 = lambda0_field(mesh);
    const ScalarField h0 = t * t * detail::sigma_sq_g0(mesh, sigma);
    double margin = 1.0;
    for (int c = 0; c < mesh.num_classes; ++c)
        margin = std::min(margin, 1.0 - h0[c] * std::exp(-4.0 * u[c]));
    if (margin <= 0)
        throw LeavesAlmostFuchsianRegime(
            "linearized_apply: |t sigma|_{g_t} >= 1");
    const ScalarField lap = laplace_beltrami(mesh, lam0, xi);
    ScalarField out(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        out[c] = lap[c] + 2.0 *
                              (std::exp(2.0 * u[c]) -
                               h0[c] * std::exp(-2.0 * u[c])) *
                              xi[c];
    return out;
}

/// Newton iteration for the Gauss equation at fixed t. Inner solves use
/// conjugate gradients on the weak form (S + diag(A w)) xi = -A .* F, which
/// is symmetric positive definite in the almost-Fuchsian regime.
inline ScalarField newton_solve(const FundamentalMesh& mesh,
                                const ScalarField& u0,
                                const QuadDiffField& sigma, double t,
                                const SolverConfig& cfg = {},
                                std::vector<double>* residual_log = nullptr) {
    const ScalarField lam0 = lambda0_field(mesh);
    const ScalarField h0 = t * t * detail::sigma_sq_g0(mesh, sigma);
    const Eigen::SparseMatrix<double> S = stiffness_matrix(mesh);
    const ScalarField A = metric_vertex_areas(mesh, lam0);
    ScalarField u = u0;
    for (int it = 0; it <= cfg.max_newton_iters; ++it) {
        ScalarField F(mesh.num_classes), w(mesh.num_classes);
        double margin = 1.0;
        for (int c = 0; c < mesh.num_classes; ++c) {
            const double e2u = std::exp(2.0 * u[c]);
            const double hterm = h0[c] / e2u;
            w[c] = 2.0 * (e2u - hterm);
            margin = std::min(margin, 1.0 - hterm / e2u);
            F[c] = -1.0 + e2u + hterm;
        }
        if (margin <= 0)
            throw LeavesAlmostFuchsianRegime("newton_solve: regime exit");
        F += ScalarField((S * u).cwiseQuotient(A));
        const double res = F.cwiseAbs().maxCoeff();
        if (residual_log) residual_log->push_back(res);
        if (res < cfg.newton_tol) return u;
        if (it == cfg.max_newton_iters) break;

        Eigen::SparseMatrix<double> M = S;
        // add the diagonal weight in weak form
        for (int c = 0; c < mesh.num_classes; ++c)
            M.coeffRef(c, c) += A[c] * w[c];
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                                 Eigen::Lower | Eigen::Upper>
            cg;
        cg.setTolerance(cfg.cg_tol);
        cg.compute(M);
        const ScalarField rhs = -A.cwiseProduct(F);
        const ScalarField step = cg.solve(rhs);
        if (cg.info() != Eigen::Success)
            throw NewtonDivergence("newton_solve: inner CG failed");
        u += step;
        if (!u.allFinite()) throw NewtonDivergence("newton_solve: diverged");
    }
    throw NewtonDivergence("newton_solve: no convergence in " +
                           std::to_string(cfg.max_newton_iters) + " iters");
}

/// Continuation from (u=0, t=0) to t=1 with adaptive steps. Throws
/// LeavesAlmostFuchsianRegime (carrying the trace so far) if |t sigma|
/// reaches 1, ContinuationStall on dt underflow.
inline GermPair continuation_solve(const FundamentalMesh& mesh,
                                   const QuadDiffField& sigma,
                                   const SolverConfig& cfg = {},
                                   ContinuationTrace* trace = nullptr) {
    GermPair st;
    st.u = ScalarField::Zero(mesh.num_classes);
    st.sigma = sigma;
    st.t = 0;
    const auto record = [&](double t, int iters, double res) {
        if (!trace) return;
        const ScalarField h0 = t * t * detail::sigma_sq_g0(mesh, sigma);
        double mx = 0, margin = 1.0;
        for (int c = 0; c < mesh.num_classes; ++c) {
            const double s2 = h0[c] * std::exp(-4.0 * st.u[c]);
            mx = std::max(mx, std::sqrt(s2));
            margin = std::min(margin, 1.0 - s2);
        }
        trace->steps.push_back({t, iters, res, mx, margin});
    };
    if (sigma.zero()) {
        record(1.0, 0, 0.0);
        st.t = 1.0;
        return st;
    }
    record(0.0, 0, 0.0);
    double dt = cfg.dt_init;
    while (st.t < 1.0) {
        const double tn = std::min(1.0, st.t + dt);
        try {
            std::vector<double> log;
            const ScalarField un =
                newton_solve(mesh, st.u, sigma, tn, cfg, &log);
            st.u = un;
            st.t = tn;
            record(tn, static_cast<int>(log.size()) - 1, log.back());
            if (log.size() <= 3) dt = std::min(2.0 * dt, 0.5);
        } catch (const NewtonDivergence&) {
            dt *= 0.5;
            if (dt < cfg.dt_min)
                throw ContinuationStall("continuation_solve: dt underflow at t=" +
                                        std::to_string(st.t));
        } catch (const LeavesAlmostFuchsianRegime&) {
            dt *= 0.5;
            if (dt < cfg.dt_min)
                throw LeavesAlmostFuchsianRegime(
                    "continuation_solve: regime boundary at t=" +
                    std::to_string(st.t));
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Moment-map densities
//
// Densities are reported against the volume form of the input metric:
// mu / dvol_g as a real (mu1) or complex (mu23) field per vertex class.
// All derivative terms use seam-aware least-squares jets; the Laplacian of
// an invariant scalar s enters as Delta s = -4 Re s_{z zbar} / Lambda with
// Lambda = lambda^2 the area density.

namespace detail {

struct Mu1Terms {
    ScalarField h;    // |sigma|^2_g per class
    ScalarField K;    // Gaussian curvature per class
    ScalarField Lam;  // area density lambda^2 per class
    std::vector<Jet2> uj; // jets of log lambda
};

inline Mu1Terms mu1_terms(const FundamentalMesh& mesh, const ScalarField& lam,
                          const QuadDiffField& sigma) {
    Mu1Terms T;
    T.Lam = lam.cwiseProduct(lam);
    const ScalarField s = sigma_norm(mesh, lam, sigma);
    T.h = s.cwiseProduct(s);
    for (int c = 0; c < mesh.num_classes; ++c)
        if (T.h[c] >= 1.0)
            throw OutsideDiscBundle("mu1: |sigma|_g >= 1 at a vertex");
    T.uj = log_lambda_jets(mesh, lam);
    T.K = ScalarField(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        T.K[c] = -4.0 * T.uj[c].fzzb.real() / T.Lam[c];
    return T;
}

/// c = 2 pi chi / vol for the genus-2 surface with the given metric.
inline double euler_constant_c(const FundamentalMesh& mesh,
                               const ScalarField& lam) {
    return -4.0 * M_PI / total_area(mesh, lam);
}

} // namespace detail

/// Full moment-map density mu1 / dvol_g:
///   (|del sigma|^2 - |dbar sigma|^2)/sqrt(1-h) - 2 sqrt(1-h) K
///   - Delta sqrt(1-h) + 2c,       h = |sigma|^2_g,
/// with del the Chern covariant derivative on quadratic differentials.
inline ScalarField mu1_form(const FundamentalMesh& mesh, const ScalarField& lam,
                            const QuadDiffField& sigma) {
    const auto T = detail::mu1_terms(mesh, lam, sigma);
    const double c2 = 2.0 * detail::euler_constant_c(mesh, lam);
    ScalarField out(mesh.num_classes);

    // jets of f in representative charts (for del/dbar sigma) and of the
    // invariant scalar sqrt(1-h) (for its Laplacian)
    std::vector<Jet2> fj;
    if (!sigma.zero()) fj = quaddiff_jets(mesh, sigma);
    CScalarField root(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        root[c] = std::sqrt(1.0 - T.h[c]);
    const auto rj = scalar_jets(mesh, root);

    for (int c = 0; c < mesh.num_classes; ++c) {
        const double Lam = T.Lam[c];
        const double lap_root = -4.0 * rj[c].fzzb.real() / Lam;
        double grad_term = 0;
        if (!sigma.zero()) {
            const cplx f = sigma.samples[mesh.rep_of[c]];
            // Chern (1,0)-derivative: f_z - 2 (log Lambda)_z f, with
            // (log Lambda)_z = 2 (log lambda)_z
            const cplx del = fj[c].fz - 4.0 * T.uj[c].fz * f;
            const cplx dbar = fj[c].fzb;
            const double Lam3 = Lam * Lam * Lam;
            grad_term = (std::norm(del) - std::norm(dbar)) / Lam3 /
                        std::sqrt(1.0 - T.h[c]);
        }
        out[c] = grad_term - 2.0 * std::sqrt(1.0 - T.h[c]) * T.K[c] -
                 lap_root + c2;
    }
    return out;
}

/// Simplified density, valid for holomorphic sigma:
///   -2K - Delta log(1 + sqrt(1-h)) + 2c.
inline ScalarField mu1_form_simplified(const FundamentalMesh& mesh,
                                       const ScalarField& lam,
                                       const QuadDiffField& sigma) {
    const auto T = detail::mu1_terms(mesh, lam, sigma);
    const double c2 = 2.0 * detail::euler_constant_c(mesh, lam);
    CScalarField lg(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        lg[c] = std::log(1.0 + std::sqrt(1.0 - T.h[c]));
    const auto lj = scalar_jets(mesh, lg);
    ScalarField out(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c) {
        const double lap = -4.0 * lj[c].fzzb.real() / T.Lam[c];
        out[c] = -2.0 * T.K[c] - lap + c2;
    }
    return out;
}

/// Complex density (mu2 + i mu3)/dvol_g = -4 d_zbar( f_zbar / Lambda ) / Lambda,
/// the discrete 2i dbar r(dbar sigma). Two seam-aware derivative passes.
inline CScalarField mu23_form(const FundamentalMesh& mesh, const ScalarField& lam,
                              const QuadDiffField& sigma) {
    CScalarField out = CScalarField::Zero(mesh.num_classes);
    if (sigma.zero()) return out;
    // expand dbar(f_zbar / Lambda) by the product rule so a single jet pass
    // supplies f_zbar and f_zbar_zbar; (log Lambda)_zbar = 2 conj((log lambda)_z)
    const auto fj = quaddiff_jets(mesh, sigma);
    const auto uj = log_lambda_jets(mesh, lam);
    for (int c = 0; c < mesh.num_classes; ++c) {
        const double Lam = lam[c] * lam[c];
        out[c] = -4.0 *
                 (fj[c].fzbzb - 2.0 * std::conj(uj[c].fz) * fj[c].fzb) /
                 (Lam * Lam);
    }
    return out;
}

/// Per-class truncation-leakage bound for mu23_form: the quartic-tail scale
/// of the same jets, propagated through the same formula. For holomorphic
/// sigma the density stays within a small factor of this; genuinely
/// non-holomorphic fields exceed it by orders of magnitude.
inline ScalarField mu23_stencil_tolerance(const FundamentalMesh& mesh,
                                          const ScalarField& lam,
                                          const QuadDiffField& sigma) {
    ScalarField out = ScalarField::Zero(mesh.num_classes);
    if (sigma.zero()) return out;
    const auto fj = quaddiff_jets(mesh, sigma);
    const auto uj = log_lambda_jets(mesh, lam);
    for (int c = 0; c < mesh.num_classes; ++c) {
        const double Lam = lam[c] * lam[c];
        out[c] = 4.0 *
                 (fj[c].lead4 / fj[c].scale +
                  2.0 * std::abs(uj[c].fz) * fj[c].lead4) /
                 (Lam * Lam);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rescaling between normalizations

/// One direction of the conformal rescaling between the two normalizations
/// of the moduli space: g_out = (1 + sqrt(1 - |sigma|_g^2)) g. Input and
/// output metrics as conformal factors lambda (length densities).
inline ScalarField rescale_metric(const FundamentalMesh& mesh,
                                  const ScalarField& lam,
                                  const QuadDiffField& sigma) {
    const ScalarField s = sigma_norm(mesh, lam, sigma);
    ScalarField out(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c) {
        if (s[c] >= 1.0)
            throw OutsideDiscBundle("rescale_metric: |sigma|_g >= 1");
        out[c] = lam[c] * std::sqrt(1.0 + std::sqrt(1.0 - s[c] * s[c]));
    }
    return out;
}

/// Inverse rescaling, recovering the source metric from the target:
/// g_src = (1 + |sigma|_g^2)/2 * g.
inline ScalarField rescale_metric_inverse(const FundamentalMesh& mesh,
                                          const ScalarField& lam,
                                          const QuadDiffField& sigma) {
    const ScalarField s = sigma_norm(mesh, lam, sigma);
    ScalarField out(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c) {
        if (s[c] >= 1.0)
            throw OutsideDiscBundle("rescale_metric_inverse: |sigma|_g >= 1");
        out[c] = lam[c] * std::sqrt((1.0 + s[c] * s[c]) / 2.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Area and Weil-Petersson functionals

/// Area of (Sigma, g): the Kaehler-potential functional on solved pairs.
inline double area_functional(const FundamentalMesh& mesh,
                              const ScalarField& lam) {
    return total_area(mesh, lam);
}

/// The same functional in the small-normalization model:
/// integral of (1 + sqrt(1 - |sigma|^2_g)) dvol_g.
inline double area_functional_s(const FundamentalMesh& mesh,
                                const ScalarField& lam,
                                const QuadDiffField& sigma) {
    const ScalarField s = sigma_norm(mesh, lam, sigma);
    const ScalarField A = metric_vertex_areas(mesh, lam);
    double total = 0;
    for (int c = 0; c < mesh.num_classes; ++c) {
        if (s[c] > 1.0)
            throw OutsideDiscBundle("area_functional_s: |sigma|_g > 1");
        total += (1.0 + std::sqrt(1.0 - s[c] * s[c])) * A[c];
    }
    return total;
}

/// Hermitian Weil-Petersson pairing of quadratic differentials against the
/// hyperbolic metric: integral of conj(f1) f2 / lambda_0^4 dvol_0.
inline cplx wp_pairing(const FundamentalMesh& mesh, const QuadDiffField& s1,
                       const QuadDiffField& s2) {
    if (s1.zero() || s2.zero()) return 0;
    const ScalarField lam0 = lambda0_field(mesh);
    const ScalarField A = metric_vertex_areas(mesh, lam0);
    cplx total = 0;
    for (int c = 0; c < mesh.num_classes; ++c) {
        const int rep = mesh.rep_of[c];
        const double l2 = lam0[c] * lam0[c];
        total += std::conj(s1.samples[rep]) * s2.samples[rep] / (l2 * l2) * A[c];
    }
    return total;
}

} // namespace afmod
