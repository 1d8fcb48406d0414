// Command-line pipeline: build the surface, choose a quadratic differential,
// solve the Gauss equation, verify the geometry, and export reports.
//
// Exit codes: 0 = all checks pass, 1 = verification failure,
// 2 = regime exit (continuation left the almost-Fuchsian regime),
// 3 = usage/config error.

#include <afmod/af3d.hpp>
#include <afmod/fiber.hpp>
#include <afmod/germ.hpp>
#include <afmod/higgs.hpp>
#include <afmod/io.hpp>
#include <afmod/surface.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace afmod;
using afmod::io::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitRegime = 2;
constexpr int kExitUsage = 3;

struct Options {
    std::string config_path;
    int seed = -1;    // -1: take the config's seed
    int threads = 1;
    std::string out = "out";
};

struct RunConfig {
    json raw;
    uint64_t seed = 12345;
    int samples = 200;
    double fd_h = 1e-5;
    int refinement = 3;
    double sigma_scale = 0.3;
    double ball_radius = 12.0;
    double series_tol = 1e-5;
    double gauss_tol = 5e-2;
    double curvature_tol = 5e-2;
    int curvature_samples = 10;
    int holonomy_steps = 512;
    double holonomy_tol = 1e-4;
    SolverConfig solver;
};

RunConfig load_config(const Options& opt) {
    const json j = io::load_json(opt.config_path);
    if (!j.contains("schema") || j["schema"] != io::kConfigSchema)
        throw InvalidState("config: missing or wrong schema tag (expected " +
                           std::string(io::kConfigSchema) + ")");
    RunConfig cfg;
    cfg.raw = j;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.samples = j.value("samples", cfg.samples);
    cfg.fd_h = j.value("fd_h", cfg.fd_h);
    cfg.refinement = j.value("refinement", cfg.refinement);
    cfg.sigma_scale = j.value("sigma_scale", cfg.sigma_scale);
    cfg.ball_radius = j.value("ball_radius", cfg.ball_radius);
    cfg.series_tol = j.value("series_tol", cfg.series_tol);
    cfg.gauss_tol = j.value("gauss_tol", cfg.gauss_tol);
    cfg.curvature_tol = j.value("curvature_tol", cfg.curvature_tol);
    cfg.curvature_samples = j.value("curvature_samples", cfg.curvature_samples);
    cfg.holonomy_steps = j.value("holonomy_steps", cfg.holonomy_steps);
    cfg.holonomy_tol = j.value("holonomy_tol", cfg.holonomy_tol);
    cfg.solver.newton_tol = j.value("newton_tol", cfg.solver.newton_tol);
    cfg.solver.dt_init = j.value("dt_init", cfg.solver.dt_init);
    cfg.solver.dt_min = j.value("dt_min", cfg.solver.dt_min);
    if (opt.seed >= 0) cfg.seed = uint64_t(opt.seed);
    return cfg;
}

fs::path out_dir(const Options& opt) {
    const char* env = std::getenv("AFMOD_OUT");
    fs::path dir = env && *env ? fs::path(env) : fs::path(opt.out);
    fs::create_directories(dir);
    return dir;
}

struct Suite {
    std::string name;
    double measured;
    double tolerance;
    bool pass;
};

json suites_to_json(const std::string& command, uint64_t seed,
                    const std::vector<Suite>& suites) {
    json rep;
    rep["schema"] = "afmod-report-v1";
    rep["command"] = command;
    rep["seed"] = seed;
    json arr = json::array();
    bool all = true;
    for (const auto& s : suites) {
        arr.push_back({{"name", s.name},
                       {"measured", s.measured},
                       {"tolerance", s.tolerance},
                       {"status", s.pass ? "pass" : "fail"}});
        all = all && s.pass;
    }
    rep["suites"] = std::move(arr);
    rep["status"] = all ? "pass" : "fail";
    return rep;
}

// ---------------------------------------------------------------- fiber ---

using V4 = Eigen::Vector4d;

FiberPoint shift(const FiberPoint& p, const V4& d) {
    return {p.z + cplx(d[0], d[1]), p.w + cplx(d[2], d[3])};
}

int cmd_verify_fiber(const Options& opt) {
    const RunConfig cfg = load_config(opt);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ux(-2, 2), uy(0.3, 2.5), ur(0, 0.85),
        uth(0, 2 * M_PI), uu(-0.8, 0.8);
    const auto random_point = [&](double rmax) {
        const double y = uy(rng);
        return FiberPoint{cplx(ux(rng), y), std::polar(ur(rng) * rmax / 0.85 / y, uth(rng))};
    };

    std::vector<Suite> suites;

    double quat = 0, compat = 0;
    for (int k = 0; k < cfg.samples; ++k) {
        const auto f = hk_frame(random_point(0.85));
        quat = std::max({quat, (f.J[0] * f.J[1] - f.J[2]).norm(),
                         (f.J[1] * f.J[2] - f.J[0]).norm(),
                         (f.J[2] * f.J[0] - f.J[1]).norm()});
        for (int i = 0; i < 3; ++i) {
            quat = std::max(quat,
                            (f.J[i] * f.J[i] + Eigen::Matrix4d::Identity()).norm());
            compat = std::max(compat, (f.Omega[i] * f.J[i] - f.G).norm());
        }
    }
    suites.push_back({"quaternion-relations", quat, 1e-10, quat < 1e-10});
    suites.push_back({"metric-compatibility", compat, 1e-10, compat < 1e-10});

    // closedness of the three symplectic forms by finite differences
    const double h = cfg.fd_h;
    const auto omega = [](const FiberPoint& q, int i, int a, int b) {
        return hk_frame(q).Omega[i](a, b);
    };
    double closed = 0;
    for (int k = 0; k < 3; ++k) {
        const FiberPoint p = random_point(0.7);
        for (int i = 0; i < 3; ++i)
            for (int a = 0; a < 4; ++a)
                for (int b = a + 1; b < 4; ++b)
                    for (int c = b + 1; c < 4; ++c) {
                        V4 ea = V4::Zero(), eb = V4::Zero(), ec = V4::Zero();
                        ea[a] = h;
                        eb[b] = h;
                        ec[c] = h;
                        const double d =
                            (omega(shift(p, ea), i, b, c) - omega(shift(p, -ea), i, b, c)) -
                            (omega(shift(p, eb), i, a, c) - omega(shift(p, -eb), i, a, c)) +
                            (omega(shift(p, ec), i, a, b) - omega(shift(p, -ec), i, a, b));
                        closed = std::max(closed, std::abs(d / (2 * h)));
                    }
    }
    suites.push_back({"symplectic-closedness", closed, 1e-6, closed < 1e-6});

    // the radius function is a potential for the second structure
    double potential = 0;
    {
        const FiberPoint p = random_point(0.7);
        const auto dH = [&](const FiberPoint& q) {
            V4 g;
            for (int a = 0; a < 4; ++a) {
                V4 e = V4::Zero();
                e[a] = h;
                g[a] = (s1_hamiltonian(shift(q, e)) - s1_hamiltonian(shift(q, -e))) /
                       (2 * h);
            }
            return g;
        };
        const auto beta = [&](const FiberPoint& q, const V4& X) {
            return dH(q).dot(hk_frame(q).J[1] * X);
        };
        const auto f = hk_frame(p);
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b) {
                V4 ea = V4::Zero(), eb = V4::Zero();
                ea[a] = 1;
                eb[b] = 1;
                const double d =
                    (beta(shift(p, h * ea), eb) - beta(shift(p, -h * ea), eb)) / (2 * h) -
                    (beta(shift(p, h * eb), ea) - beta(shift(p, -h * eb), ea)) / (2 * h);
                potential = std::max(potential, std::abs(d - f.Omega[1](a, b)));
            }
    }
    suites.push_back({"kahler-potential", potential, 1e-6, potential < 1e-6});

    // hamiltonian property of the moment maps
    double moment = 0;
    for (int k = 0; k < std::max(1, cfg.samples / 4); ++k) {
        const FiberPoint p = random_point(0.7);
        const Mat2C xi{uu(rng), uu(rng), uu(rng), 0};
        const Mat2C xitr{xi.a, xi.b, xi.c, -xi.a};
        const auto f = hk_frame(p);
        const FiberTangent Lt = infinitesimal_act_X(xitr, p);
        const V4 L(Lt.dz.real(), Lt.dz.imag(), Lt.dw.real(), Lt.dw.imag());
        for (int b = 0; b < 4; ++b) {
            V4 e = V4::Zero();
            e[b] = h;
            V4 eb = V4::Zero();
            eb[b] = 1;
            const double d1 =
                (mu1_fiber(shift(p, e), xitr) - mu1_fiber(shift(p, -e), xitr)) / (2 * h);
            const cplx d23 =
                (mu23_fiber(shift(p, e), xitr) - mu23_fiber(shift(p, -e), xitr)) /
                (2 * h);
            moment = std::max({moment, std::abs(d1 - L.dot(f.Omega[0] * eb)),
                               std::abs(d23.real() - L.dot(f.Omega[1] * eb)),
                               std::abs(d23.imag() - L.dot(f.Omega[2] * eb))});
        }
    }
    suites.push_back({"moment-map-identity", moment, 1e-6, moment < 1e-6});

    // product-of-half-planes map: zero section, equivariance, holomorphy
    double alpha_eq = 0;
    for (int k = 0; k < cfg.samples; ++k) {
        const FiberPoint p0{random_point(0.85).z, 0};
        const auto [a1, a2] = hodge_alpha(p0);
        alpha_eq = std::max({alpha_eq, std::abs(a1.z - p0.z), std::abs(a2.z - p0.z)});
        const FiberPoint p = random_point(0.85);
        const double a = uu(rng), b = uu(rng), c = uu(rng);
        const Mat2C A = expm(Mat2C{a, b, c, -a});
        const auto [l1, l2] = hodge_alpha(act_X(A, p));
        const auto [r1, r2] = hodge_alpha(p);
        alpha_eq = std::max({alpha_eq, std::abs(l1.z - act_h2(A, r1).z),
                             std::abs(l2.z - act_h2(A, r2).z)});
    }
    suites.push_back({"hodge-map-equivariance", alpha_eq, 1e-11, alpha_eq < 1e-11});

    double alpha_holo = 0;
    for (int k = 0; k < 5; ++k) {
        const FiberPoint p = random_point(0.7);
        const auto f = hk_frame(p);
        const V4 X(uu(rng), uu(rng), uu(rng), uu(rng));
        const V4 JX = f.J[1] * X;
        const auto dalpha = [&](const V4& Y) {
            const auto [p1, p2] = hodge_alpha(shift(p, h * Y));
            const auto [m1, m2] = hodge_alpha(shift(p, -h * Y));
            return std::pair{(p1.z - m1.z) / (2 * h), (p2.z - m2.z) / (2 * h)};
        };
        const auto [dx1, dx2] = dalpha(X);
        const auto [dj1, dj2] = dalpha(JX);
        alpha_holo = std::max({alpha_holo, std::abs(dj1 - cplx(0, 1) * dx1),
                               std::abs(dj2 + cplx(0, 1) * dx2)});
    }
    suites.push_back({"hodge-map-holomorphy", alpha_holo, 1e-6, alpha_holo < 1e-6});

    const json rep = suites_to_json("verify-fiber", cfg.seed, suites);
    io::write_text(out_dir(opt) / "verify_fiber.json", rep.dump(2) + "\n");
    return rep["status"] == "pass" ? kExitPass : kExitVerifyFail;
}

// ---------------------------------------------------------------- solve ---

QuadDiffField scaled_sigma(const FuchsianGroup& G, const FundamentalMesh& mesh,
                           const RunConfig& cfg) {
    if (cfg.sigma_scale == 0.0) return QuadDiffField{};
    QuadDiffField s = make_poincare_q4(G, mesh, std::vector<cplx>{cplx(1)},
                                       cfg.ball_radius, cfg.series_tol);
    const double smax = sigma_norm(mesh, lambda0_field(mesh), s).maxCoeff();
    const double scale = cfg.sigma_scale / smax;
    for (auto& v : s.samples) v *= scale;
    std::function<cplx(cplx)> base = s.eval;
    s.eval = [base, scale](cplx z) { return scale * base(z); };
    return s;
}

int cmd_solve(const Options& opt) {
    const RunConfig cfg = load_config(opt);
    const fs::path dir = out_dir(opt);
    const FuchsianGroup G = build_bolza_group();
    const FundamentalMesh mesh = build_mesh(G, cfg.refinement);
    const QuadDiffField sigma = scaled_sigma(G, mesh, cfg);

    ContinuationTrace trace;
    json summary;
    summary["schema"] = "afmod-summary-v1";
    summary["command"] = "solve";
    summary["seed"] = cfg.seed;
    summary["refinement"] = cfg.refinement;
    summary["sigma_scale"] = cfg.sigma_scale;

    int exit_code = kExitPass;
    try {
        const GermPair germ = continuation_solve(mesh, sigma, cfg.solver, &trace);
        const ScalarField lam0 = lambda0_field(mesh);
        ScalarField lam(mesh.num_classes);
        for (int c = 0; c < mesh.num_classes; ++c)
            lam[c] = std::exp(germ.u[c]) * lam0[c];
        const double res =
            residual_gauss(mesh, germ.u, sigma, 1.0).cwiseAbs().maxCoeff();
        const double smax = sigma.zero()
                                ? 0.0
                                : sigma_norm(mesh, lam, sigma).maxCoeff();
        summary["status"] = "solved";
        summary["final_t"] = germ.t;
        summary["final_residual"] = res;
        summary["final_max_sigma_norm"] = smax;
        summary["area"] = area_functional(mesh, lam);

        std::map<std::string, std::vector<double>> fields;
        fields["u"] = std::vector<double>(germ.u.data(),
                                          germ.u.data() + germ.u.size());
        std::vector<double> sre(mesh.vertices.size(), 0.0),
            sim(mesh.vertices.size(), 0.0);
        if (!sigma.zero())
            for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
                sre[v] = sigma.samples[v].real();
                sim[v] = sigma.samples[v].imag();
            }
        fields["sigma_re"] = std::move(sre);
        fields["sigma_im"] = std::move(sim);
        io::write_text(dir / "mesh.json",
                       io::mesh_to_json(mesh, fields).dump(2) + "\n");
    } catch (const LeavesAlmostFuchsianRegime& e) {
        summary["status"] = "regime-exit";
        summary["error"] = "LeavesAlmostFuchsianRegime";
        summary["detail"] = e.what();
        summary["last_good_t"] = trace.steps.empty() ? 0.0 : trace.steps.back().t;
        exit_code = kExitRegime;
    } catch (const ContinuationStall& e) {
        summary["status"] = "stall";
        summary["error"] = "ContinuationStall";
        summary["detail"] = e.what();
        summary["last_good_t"] = trace.steps.empty() ? 0.0 : trace.steps.back().t;
        exit_code = kExitRegime;
    }

    io::write_text(dir / "trace.csv", io::trace_to_csv(trace));
    io::write_text(dir / "solve_summary.json", summary.dump(2) + "\n");
    return exit_code;
}

// ------------------------------------------------------------- verify-af ---

struct LoadedGerm {
    FuchsianGroup group;
    FundamentalMesh mesh;
    QuadDiffField sigma;
    ScalarField u;
};

LoadedGerm load_solved_germ(const Options& opt, const RunConfig& cfg) {
    const io::MeshArtifact art =
        io::mesh_from_json(io::load_json(out_dir(opt) / "mesh.json"));
    LoadedGerm lg{build_bolza_group(), build_mesh(build_bolza_group(), cfg.refinement),
                  {}, {}};
    if (art.vertices.size() != lg.mesh.vertices.size())
        throw InvalidState("mesh artifact does not match configured refinement");
    double vdev = 0;
    for (std::size_t v = 0; v < art.vertices.size(); ++v)
        vdev = std::max(vdev, std::abs(art.vertices[v] - lg.mesh.vertices[v]));
    if (vdev > 1e-12)
        throw InvalidState("mesh artifact vertices do not match configured mesh");

    const auto uf = art.fields.find("u");
    if (uf == art.fields.end() || int(uf->second.size()) != lg.mesh.num_classes)
        throw InvalidState("mesh artifact: missing or malformed field 'u'");
    lg.u = Eigen::Map<const ScalarField>(uf->second.data(), uf->second.size());

    const auto sr = art.fields.find("sigma_re");
    const auto si = art.fields.find("sigma_im");
    if (sr == art.fields.end() || si == art.fields.end())
        throw InvalidState("mesh artifact: missing sigma fields");
    double snorm = 0;
    for (double x : sr->second) snorm = std::max(snorm, std::abs(x));
    for (double x : si->second) snorm = std::max(snorm, std::abs(x));
    if (snorm > 0) {
        // the artifact stores samples; the smooth evaluator is rebuilt from
        // the configured series so off-vertex values are available
        lg.sigma = scaled_sigma(lg.group, lg.mesh, cfg);
        double sdev = 0;
        for (std::size_t v = 0; v < lg.mesh.vertices.size(); ++v)
            sdev = std::max(sdev,
                            std::abs(lg.sigma.samples[v] -
                                     cplx(sr->second[v], si->second[v])));
        if (sdev > 1e-10)
            throw InvalidState("mesh artifact sigma does not match config");
    }
    return lg;
}

int cmd_verify_af(const Options& opt) {
    const RunConfig cfg = load_config(opt);
    const LoadedGerm lg = load_solved_germ(opt, cfg);
    const fs::path dir = out_dir(opt);
    std::vector<Suite> suites;

    // gate: the artifact's u must solve the Gauss equation before any
    // curvature claims are evaluated
    const double gauss =
        residual_gauss(lg.mesh, lg.u, lg.sigma, 1.0).cwiseAbs().maxCoeff();
    suites.push_back({"gauss-residual", gauss, cfg.solver.newton_tol * 10,
                      gauss < cfg.solver.newton_tol * 10});
    if (!suites.back().pass) {
        const json rep = suites_to_json("verify-af", cfg.seed, suites);
        io::write_text(dir / "verify_af.json", rep.dump(2) + "\n");
        return kExitVerifyFail;
    }

    const AFGerm germ = lg.sigma.zero()
                            ? make_fuchsian_germ(lg.mesh)
                            : make_af_germ(lg.mesh, lg.u, lg.sigma);

    // sectional-curvature sweep
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> box(-0.4, 0.4), tt(-0.8, 0.8),
        uni(-1, 1);
    std::vector<io::SweepRow> rows;
    double worst_k = 0;
    for (int k = 0; k < cfg.curvature_samples; ++k) {
        const cplx z(box(rng), box(rng));
        const double t = tt(rng);
        Eigen::Vector3d v1, v2;
        for (int i = 0; i < 3; ++i) {
            v1[i] = uni(rng);
            v2[i] = uni(rng);
        }
        const LocalGerm loc(germ, z);
        const auto gfn = [&](const Eigen::Vector3d& p) {
            return af_metric_local(loc, cplx(p[0], p[1]), p[2]);
        };
        const Eigen::Vector3d p(z.real(), z.imag(), t);
        const double k1 = sectional_curvature_of(gfn, p, v1, v2, 1e-3);
        const double k2 = sectional_curvature_of(gfn, p, v1, v2, 5e-4);
        const double kk = (4.0 * k2 - k1) / 3.0;
        rows.push_back({z.real(), z.imag(), t, kk, std::abs(k2 - k1) / 3.0});
        worst_k = std::max(worst_k, std::abs(kk + 1.0));
    }
    io::write_text(dir / "curvature.csv", io::sweep_to_csv(rows));
    suites.push_back(
        {"sectional-curvature", worst_k, cfg.curvature_tol, worst_k < cfg.curvature_tol});

    // mean-curvature sweep: closed form, FD cross-check as error estimate
    rows.clear();
    double worst_h = 0;
    for (int k = 0; k < cfg.curvature_samples; ++k) {
        const cplx z(box(rng), box(rng));
        const double t = tt(rng);
        const double hc = mean_curvature_at(germ, z, t);
        const double hf = mean_curvature_fd(germ, z, t);
        rows.push_back({z.real(), z.imag(), t, hc, std::abs(hc - hf)});
        worst_h = std::max(worst_h, std::abs(hc - hf));
    }
    io::write_text(dir / "mean_curvature.csv", io::sweep_to_csv(rows));
    suites.push_back({"mean-curvature-fd", worst_h, 1e-4, worst_h < 1e-4});

    // boundary data: eigenvalue identity and the fibre cross-check
    double eig_dev = 0;
    const ScalarField lam0 = lambda0_field(lg.mesh);
    for (int sign : {+1, -1}) {
        const auto bm = boundary_metric(germ, sign);
        for (int c = 0; c < lg.mesh.num_classes; ++c) {
            const cplx z = lg.mesh.vertices[lg.mesh.rep_of[c]];
            const double lam =
                (germ.fuchsian_factor() ? 1.0 : std::exp(lg.u[c])) * lam0[c];
            const double s = lg.sigma.zero()
                                 ? 0.0
                                 : std::abs(lg.sigma.eval(z)) / (lam * lam);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(bm[c]);
            const double e1 = lam * lam * (1.0 - s) * (1.0 - s);
            const double e2 = lam * lam * (1.0 + s) * (1.0 + s);
            eig_dev = std::max({eig_dev,
                                std::abs(es.eigenvalues()[0] - e1) / (lam * lam),
                                std::abs(es.eigenvalues()[1] - e2) / (lam * lam)});
        }
    }
    suites.push_back({"boundary-eigenvalues", eig_dev, 1e-10, eig_dev < 1e-10});
    const double fib = fiber_consistency_check(germ);
    suites.push_back({"fiber-consistency", fib, 1e-8, fib < 1e-8});

    const json rep = suites_to_json("verify-af", cfg.seed, suites);
    io::write_text(dir / "verify_af.json", rep.dump(2) + "\n");
    return rep["status"] == "pass" ? kExitPass : kExitVerifyFail;
}

// -------------------------------------------------------------- holonomy ---

int cmd_holonomy(const Options& opt) {
    const RunConfig cfg = load_config(opt);
    const LoadedGerm lg = load_solved_germ(opt, cfg);
    const fs::path dir = out_dir(opt);

    const AFGerm germ = lg.sigma.zero()
                            ? make_fuchsian_germ(lg.mesh)
                            : make_af_germ(lg.mesh, lg.u, lg.sigma);
    const HiggsData H = build_higgs(lg.group, germ, cfg.gauss_tol);
    const HolonomyRep rep =
        generator_holonomies(H, cplx(0), cfg.holonomy_steps, cfg.holonomy_tol);
    io::write_text(dir / "holonomy.json",
                   io::holonomy_to_json(rep).dump(2) + "\n");

    std::vector<Suite> suites;
    suites.push_back({"relator-residual", rep.relator_residual, cfg.holonomy_tol,
                      rep.relator_residual < cfg.holonomy_tol});
    double det_dev = 0;
    for (int k = 0; k < 8; ++k)
        det_dev = std::max(det_dev, std::abs(std::abs(rep.rho[k].det()) - 1.0));
    suites.push_back({"unit-determinant", det_dev, 1e-6, det_dev < 1e-6});
    if (lg.sigma.zero()) {
        double im_tr = 0, abs_tr = 0;
        const double target = 2.0 * (1.0 + std::sqrt(2.0));
        for (const cplx t : rep.traces()) {
            im_tr = std::max(im_tr, std::abs(t.imag()));
            abs_tr = std::max(abs_tr, std::abs(std::abs(t) - target));
        }
        suites.push_back({"traces-real", im_tr, 1e-6, im_tr < 1e-6});
        suites.push_back({"trace-values", abs_tr, 1e-4, abs_tr < 1e-4});
    }

    const json summary = suites_to_json("holonomy", cfg.seed, suites);
    io::write_text(dir / "holonomy_summary.json", summary.dump(2) + "\n");
    return summary["status"] == "pass" ? kExitPass : kExitVerifyFail;
}

// ---------------------------------------------------------------- report ---

int cmd_report(const Options& opt) {
    const RunConfig cfg = load_config(opt);
    const fs::path dir = out_dir(opt);

    json rep;
    rep["schema"] = "afmod-report-v1";
    rep["command"] = "report";
    rep["seed"] = cfg.seed;
    json parts = json::object();
    bool all = true;
    bool any = false;
    std::ostringstream md;
    md << "# Pipeline report\n\n";
    for (const char* name : {"verify_fiber.json", "solve_summary.json",
                             "verify_af.json", "holonomy_summary.json"}) {
        const fs::path p = dir / name;
        if (!fs::exists(p)) continue;
        any = true;
        const json part = io::load_json(p);
        const std::string status = part.value("status", "unknown");
        parts[name] = part;
        const bool ok = status == "pass" || status == "solved";
        all = all && ok;
        md << "- `" << name << "`: **" << status << "**\n";
        if (part.contains("suites"))
            for (const auto& s : part["suites"])
                md << "  - " << s["name"].get<std::string>() << ": "
                   << s["status"].get<std::string>() << " (measured "
                   << io::fmt(s["measured"].get<double>()) << ", tolerance "
                   << io::fmt(s["tolerance"].get<double>()) << ")\n";
    }
    if (!any)
        throw ArtifactNotFound("report: no pipeline artifacts found in " +
                               dir.string());
    rep["parts"] = std::move(parts);
    rep["status"] = all ? "pass" : "fail";
    md << "\nOverall: **" << (all ? "pass" : "fail") << "**\n";
    io::write_text(dir / "report.json", rep.dump(2) + "\n");
    io::write_text(dir / "report.md", md.str());
    return all ? kExitPass : kExitVerifyFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Almost-Fuchsian moduli pipeline"};
    app.require_subcommand(1);

    Options opt;
    std::string command;
    for (const char* name :
         {"verify-fiber", "solve", "verify-af", "holonomy", "report"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "config JSON path")
            ->required();
        sub->add_option("--seed", opt.seed, "RNG seed override");
        sub->add_option("--threads", opt.threads, "worker cap (1 = reproducible)");
        sub->add_option("--out", opt.out, "output directory (env AFMOD_OUT overrides)");
        sub->callback([&command, name] { command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (command == "verify-fiber") return cmd_verify_fiber(opt);
        if (command == "solve") return cmd_solve(opt);
        if (command == "verify-af") return cmd_verify_af(opt);
        if (command == "holonomy") return cmd_holonomy(opt);
        if (command == "report") return cmd_report(opt);
        return kExitUsage;
    } catch (const ArtifactNotFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidState& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const LeavesAlmostFuchsianRegime& e) {
        std::cerr << "regime exit: " << e.what() << "\n";
        return kExitRegime;
    } catch (const Error& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return kExitVerifyFail;
    }
}
