#include <afmod/higgs.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

using namespace afmod;

namespace {

const FuchsianGroup& bolza() {
    static FuchsianGroup G = build_bolza_group();
    return G;
}

const FundamentalMesh& mesh_at(int ref) {
    static std::map<int, FundamentalMesh> cache;
    auto it = cache.find(ref);
    if (it == cache.end()) it = cache.emplace(ref, build_mesh(bolza(), ref)).first;
    return it->second;
}

// holomorphic quadratic differential, max |sigma|_{g0} = 0.3 frozen at ref 4
const QuadDiffField& test_sigma(int ref) {
    static std::map<int, QuadDiffField> cache;
    auto it = cache.find(ref);
    if (it != cache.end()) return it->second;
    static const double scale = [] {
        const auto& m = mesh_at(4);
        auto raw = make_poincare_q4(bolza(), m, std::vector<cplx>{cplx(1)});
        return 0.3 / sigma_norm(m, lambda0_field(m), raw).maxCoeff();
    }();
    QuadDiffField s =
        make_poincare_q4(bolza(), mesh_at(ref), std::vector<cplx>{cplx(1)});
    for (auto& v : s.samples) v *= scale;
    std::function<cplx(cplx)> base = s.eval;
    s.eval = [base](cplx z) { return scale * base(z); };
    return cache.emplace(ref, std::move(s)).first->second;
}

struct SolvedCtx {
    AFGerm germ;
    double jet_gauss_floor;
};

const SolvedCtx& solved_ctx(int ref) {
    static std::map<int, SolvedCtx> cache;
    auto it = cache.find(ref);
    if (it != cache.end()) return it->second;
    const auto& m = mesh_at(ref);
    SolverConfig cfg;
    const ScalarField u = continuation_solve(m, test_sigma(ref), cfg, nullptr).u;
    SolvedCtx ctx{make_af_germ(m, u, test_sigma(ref)), 0.0};
    const ScalarField lam0 = lambda0_field(m);
    ScalarField lam(m.num_classes);
    for (int c = 0; c < m.num_classes; ++c) lam[c] = std::exp(u[c]) * lam0[c];
    const ScalarField K = gauss_curvature(m, lam);
    const ScalarField sn = sigma_norm(m, lam, test_sigma(ref));
    ctx.jet_gauss_floor =
        (K.array() + 1.0 + sn.array().square()).abs().maxCoeff();
    return cache.emplace(ref, std::move(ctx)).first->second;
}

const AFGerm& fuchsian_germ() {
    static AFGerm g = make_fuchsian_germ(mesh_at(3));
    return g;
}

// classes sorted by |sigma|_{g0} at the representative, largest first
std::vector<int> top_sigma_classes(int ref, int n) {
    const auto& m = mesh_at(ref);
    const ScalarField sn =
        sigma_norm(m, lambda0_field(m), test_sigma(ref));
    std::vector<int> idx(m.num_classes);
    for (int c = 0; c < m.num_classes; ++c) idx[c] = c;
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return sn[a] > sn[b]; });
    idx.resize(n);
    return idx;
}

} // namespace

TEST_CASE("germ field: reduction and automorphy of the metric data") {
    const HiggsData H(bolza(), fuchsian_germ());
    const auto& G = bolza();

    // Fuchsian case is exact: lambda(gz) |g'(z)| = lambda(z)
    for (cplx z : {cplx(0.1, 0.2), cplx(-0.25, 0.12)})
        for (int k : {0, 3, 6}) {
            const cplx gz = detail::mob(G.generators[k], z);
            const double jac = std::abs(detail::mob_deriv(G.generators[k], z));
            REQUIRE(std::abs(H.field.lambda(gz) * jac - H.field.lambda(z)) <
                    1e-10);
        }

    // solved case: the reduced evaluators agree with the raw data inside
    // the fundamental domain and stay metric-automorphic across a pairing
    const auto& ctx = solved_ctx(4);
    const HiggsData Hs(bolza(), ctx.germ);
    const cplx z(0.18, -0.07);
    REQUIRE(std::abs(Hs.field.f(z) - ctx.germ.sigma.eval(z)) < 1e-12);
    for (int k : {1, 5}) {
        const cplx gz = detail::mob(G.generators[k], z);
        const cplx dg = detail::mob_deriv(G.generators[k], z);
        REQUIRE(std::abs(Hs.field.lambda(gz) * std::abs(dg) -
                         Hs.field.lambda(z)) < 1e-3 * Hs.field.lambda(z));
        // quadratic-differential weight for f
        REQUIRE(std::abs(Hs.field.f(gz) * dg * dg - Hs.field.f(z)) < 1e-8);
    }
}

TEST_CASE("higgs pair structure") {
    const HiggsData H(bolza(), fuchsian_germ());
    const cplx z(0.2, 0.1);
    const double lam = lambda0(z);

    const Mat2C phi = H.phi(z);
    REQUIRE(std::abs(phi.a) + std::abs(phi.c) + std::abs(phi.d) == 0.0);
    REQUIRE(std::abs(phi.b - 0.5) < 1e-15);

    // sigma = 0: the (2,1) entry of B_z vanishes; B_zb entries carry the
    // metric weights
    const Mat2C bz = H.B_z(z);
    REQUIRE(std::abs(bz.c) == 0.0);
    REQUIRE(std::abs(bz.a + bz.d) < 1e-15); // traceless connection
    const Mat2C bzb = H.B_zb(z);
    REQUIRE(std::abs(bzb.b) == 0.0);
    REQUIRE(std::abs(bzb.c - 0.5 * lam * lam) < 1e-12);

    // the minimal-surface check gates construction: an unsolved germ with
    // sizable sigma is rejected, and accepted with an explicit allowance
    const auto& m = mesh_at(3);
    const AFGerm raw =
        make_af_germ(m, ScalarField::Zero(m.num_classes), test_sigma(3));
    REQUIRE_THROWS_AS(build_higgs(bolza(), raw), GaussResidualTooLarge);
    REQUIRE_NOTHROW(build_higgs(bolza(), raw, 0.2));
    REQUIRE_NOTHROW(build_higgs(bolza(), solved_ctx(4).germ));
}

TEST_CASE("connection component a: contour integral matches the curvature") {
    // loop integral of dz log(lambda) dz around a small square equals
    // i lambda^2 h^2 / 2 + O(h^4) for the hyperbolic metric (K = -1)
    const HiggsData H(bolza(), fuchsian_germ());
    const cplx z0(0.15, 0.1);
    const double h = 0.02;
    const std::array<cplx, 5> corner = {
        z0 + cplx(-h / 2, -h / 2), z0 + cplx(h / 2, -h / 2),
        z0 + cplx(h / 2, h / 2), z0 + cplx(-h / 2, h / 2),
        z0 + cplx(-h / 2, -h / 2)};
    cplx integral = 0;
    const int n = 64;
    for (int s = 0; s < 4; ++s)
        for (int i = 0; i < n; ++i) {
            const cplx dz = (corner[s + 1] - corner[s]) / double(n);
            const cplx zm = corner[s] + (double(i) + 0.5) * dz;
            integral += H.field.dz_log_lambda(zm) * dz;
        }
    const double lam = lambda0(z0);
    const cplx expected = cplx(0, 0.5) * lam * lam * h * h;
    REQUIRE(std::abs(integral - expected) < 0.01 * std::abs(expected));
}

TEST_CASE("parallel transport basics") {
    const auto zero_conn = [](cplx, cplx) {
        return Mat2C{cplx(0), cplx(0), cplx(0), cplx(0)};
    };
    const Mat2C F =
        transport_along(zero_conn, {cplx(0), cplx(0.3, 0.2), cplx(-0.1, 0.4)});
    REQUIRE(F.dist(Mat2C::identity()) < 1e-15);

    // flat connection: refinement changes the transport only at the
    // integrator's order floor, and splitting a segment is consistent
    const HiggsData H(bolza(), fuchsian_germ());
    const std::vector<cplx> path = {cplx(0), cplx(0.25, 0.15)};
    const Mat2C F1 = holonomy_along(H, path, 64);
    const Mat2C F2 = holonomy_along(H, path, 128);
    REQUIRE(F1.dist(F2) < 1e-6);
    const cplx mid = 0.5 * (path[0] + path[1]);
    const Mat2C Fsplit = holonomy_along(H, {path[0], mid, path[1]}, 64);
    REQUIRE(F2.dist(Fsplit) < 1e-7);

    // closed-loop traces are invariant under constant gauge transformations
    const Mat2C C{cplx(1.2, 0.3), cplx(0.1), cplx(-0.2, 0.1), cplx(0.9)};
    const Mat2C Ci = C.inverse();
    const auto conj_conn = [&](cplx z, cplx v) { return C * H.B(z, v) * Ci; };
    const std::vector<cplx> loop = {cplx(0.1), cplx(0.3, 0.1), cplx(0.15, 0.3),
                                    cplx(0.1)};
    const cplx t1 = holonomy_along(H, loop, 64).trace();
    const cplx t2 = transport_along(conj_conn, loop, 64).trace();
    REQUIRE(std::abs(t1 - t2) < 1e-8);
}

TEST_CASE("fuchsian holonomy: relator, traces, inversion symmetry") {
    const HiggsData H(bolza(), fuchsian_germ());
    const HolonomyRep rep = generator_holonomies(H);
    REQUIRE(rep.relator_residual < 1e-6);

    const double target = 2.0 * (1.0 + std::sqrt(2.0));
    for (const cplx t : rep.traces()) {
        REQUIRE(std::abs(t.imag()) < 1e-6);
        REQUIRE(std::abs(std::abs(t) - target) < 1e-4);
    }
    for (int k = 0; k < 8; ++k)
        REQUIRE(std::abs(std::abs(rep.rho[k].det()) - 1.0) < 1e-8);
    // the paired generators transport to inverse holonomies
    for (int k = 0; k < 4; ++k)
        REQUIRE(rep.rho[k + 4].dist(rep.rho[k].inverse()) < 1e-6);

    // an intolerably tight gate reports the inconsistency
    REQUIRE_THROWS_AS(generator_holonomies(H, cplx(0), 16, 1e-12),
                      HolonomyInconsistent);
}

TEST_CASE("solved holonomy closes the relator at the germ resolution") {
    const auto& ctx = solved_ctx(4);
    const HiggsData H = build_higgs(bolza(), ctx.germ);
    const HolonomyRep rep = generator_holonomies(H, cplx(0), 128, 1.0);
    REQUIRE(rep.relator_residual < 10.0 * ctx.jet_gauss_floor);
    for (int k = 0; k < 8; ++k)
        REQUIRE(std::abs(std::abs(rep.rho[k].det()) - 1.0) < 1e-6);
}

TEST_CASE("plaquette curvature: flat, unsolved, and step scaling") {
    // solved Fuchsian data: the connection is flat to integrator precision
    const HiggsData Hf(bolza(), fuchsian_germ());
    const auto subset = top_sigma_classes(3, 4);
    const HitchinResidual rf = hitchin_residual(Hf, 0.01, 8, subset);
    for (int c : subset) {
        REQUIRE(rf.gauss_part[c] < 1e-8);
        REQUIRE(rf.dbar_part[c] < 1e-8);
    }

    // unsolved germ (u = 0, sigma != 0): the diagonal part reproduces half
    // the Gauss defect |sigma|^2_{g0}, the off-diagonal part stays at the
    // discretization floor for a holomorphic sigma
    const auto& m = mesh_at(3);
    const AFGerm raw =
        make_af_germ(m, ScalarField::Zero(m.num_classes), test_sigma(3));
    const HiggsData Hu = build_higgs(bolza(), raw, 0.2);
    const ScalarField sn = sigma_norm(m, lambda0_field(m), test_sigma(3));
    const HitchinResidual ru = hitchin_residual(Hu, 0.01, 8, subset);
    for (int c : subset) {
        const double expected = 0.5 * sn[c] * sn[c];
        REQUIRE(std::abs(ru.gauss_part[c] - expected) < 0.01 * expected);
        REQUIRE(ru.dbar_part[c] < 0.1 * ru.gauss_part[c]);
    }

    // the plaquette defect of the non-flat connection scales as h^2
    const int c0 = subset[0];
    const cplx z = m.vertices[m.rep_of[c0]];
    const auto defect = [&](double h) {
        const std::vector<cplx> loop = {
            z + cplx(-h / 2, -h / 2), z + cplx(h / 2, -h / 2),
            z + cplx(h / 2, h / 2), z + cplx(-h / 2, h / 2),
            z + cplx(-h / 2, -h / 2)};
        return holonomy_along(Hu, loop, 16).dist(Mat2C::identity());
    };
    const double d1 = defect(0.02), d2 = defect(0.01), d3 = defect(0.005);
    REQUIRE(d1 / d2 > 3.6);
    REQUIRE(d1 / d2 < 4.4);
    REQUIRE(d2 / d3 > 3.6);
    REQUIRE(d2 / d3 < 4.4);
}

TEST_CASE("developing map: fuchsian immersion is the totally geodesic disc") {
    const HiggsData H(bolza(), fuchsian_germ());

    // equidistance check: hermitian-model distances match the hyperbolic
    // distance of the domain points
    const cplx z1(0.1, 0.05), z2(-0.2, 0.15);
    const auto P1 = develop_point(H, z1);
    const auto P2 = develop_point(H, z2);
    const double dom =
        2.0 * std::atanh(std::abs((z1 - z2) / (1.0 - std::conj(z1) * z2)));
    REQUIRE(std::abs(h3_dist(P1, P2) - dom) < 1e-5);

    // induced metric lambda0^2 |dz|^2, vanishing second fundamental form
    for (cplx z : {cplx(0.12, 0.04), cplx(-0.15, 0.2)}) {
        const auto ff = developed_forms(H, z);
        const double l2 = lambda0(z) * lambda0(z);
        REQUIRE((ff.first - l2 * Eigen::Matrix2d::Identity()).norm() <
                1e-4 * l2);
        REQUIRE(ff.second.norm() < 1e-4 * l2);
    }
}

TEST_CASE("developing map: solved immersion carries (g, Re sigma)") {
    const auto& ctx = solved_ctx(4);
    const HiggsData H = build_higgs(bolza(), ctx.germ);
    const cplx z(0.1, 0.05);
    const auto ff = developed_forms(H, z, 0.04, cplx(0), 96);

    const double lam = H.field.lambda(z);
    const cplx f = H.field.f(z);
    Eigen::Matrix2d rs;
    rs << f.real(), -f.imag(), -f.imag(), -f.real();

    const double floor = ctx.jet_gauss_floor;
    REQUIRE((ff.first - lam * lam * Eigen::Matrix2d::Identity()).norm() <
            3.0 * floor * lam * lam);
    REQUIRE((ff.second - rs).norm() < 3.0 * floor * rs.norm());
}
