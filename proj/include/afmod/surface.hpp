#pragma once

// A concrete closed genus-2 hyperbolic surface: the Bolza octagon group in
// the disc model, group enumeration, Poincare-series quadratic differentials,
// a triangulated fundamental domain with boundary identifications, and the
// discrete operators (Laplacian, curvature, derivative stencils) used by the
// solvers.

#include <afmod/error.hpp>
#include <afmod/mobius.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numeric>
#include <unordered_map>
#include <vector>

namespace afmod {

using ScalarField = Eigen::VectorXd;
using CScalarField = Eigen::VectorXcd;

struct FuchsianGroup {
    std::array<Mat2C, 8> generators; // disc model, SU(1,1)
    std::vector<int> relator_word;
    int genus = 2;
};

/// Derivative of the Mobius map of a disc-model element.
inline cplx mobius_deriv(const Mat2C& A, cplx z) {
    const cplx den = A.c * z + A.d;
    return 1.0 / (den * den);
}

inline cplx mobius_apply(const Mat2C& A, cplx z) {
    return (A.a * z + A.b) / (A.c * z + A.d);
}

/// Side-pairing generators of the regular-octagon surface of genus 2:
/// gamma_k = R_{k pi/4} T R_{k pi/4}^{-1} with T the hyperbolic translation
/// of trace 2(1+sqrt 2) along the real axis. gamma_{k+4} = gamma_k^{-1}.
inline FuchsianGroup build_bolza_group() {
    const double al = 1.0 + std::sqrt(2.0);
    const double be = std::sqrt(2.0 + 2.0 * std::sqrt(2.0));
    const Mat2C T{al, be, be, al};
    FuchsianGroup G;
    for (int k = 0; k < 8; ++k) {
        const cplx ph = std::polar(1.0, k * M_PI / 8);
        const Mat2C R{ph, 0, 0, std::conj(ph)};
        G.generators[k] = R * T * R.inverse();
    }
    G.relator_word = {0, 5, 2, 7, 4, 1, 6, 3};
    Mat2C P = Mat2C::identity();
    for (int i : G.relator_word) P = P * G.generators[i];
    const double res = std::min(P.dist(Mat2C::identity()), P.dist(-Mat2C::identity()));
    if (res > 1e-9) throw GroupConstructionError("build_bolza_group: relator residual");
    for (const auto& g : G.generators)
        if (!g.is_special(1e-12) || std::abs(g.trace()) <= 2.0)
            throw GroupConstructionError("build_bolza_group: bad generator");
    return G;
}

namespace detail {

// Open-addressing multimap from integer keys to item indices; much faster
// than the node-based standard containers in the enumeration hot loop.
class FlatMultiMap {
public:
    FlatMultiMap() { rehash(1 << 12); }

    template <class Visit>
    bool visit(long key, Visit&& v) const {
        std::size_t i = probe(key);
        while (slots_[i].used) {
            if (slots_[i].key == key && v(slots_[i].value)) return true;
            i = (i + 1) & mask_;
        }
        return false;
    }

    void insert(long key, int value) {
        if (2 * (count_ + 1) > slots_.size()) rehash(2 * slots_.size());
        std::size_t i = probe(key);
        while (slots_[i].used) i = (i + 1) & mask_;
        slots_[i] = {key, value, true};
        ++count_;
    }

private:
    struct Slot {
        long key = 0;
        int value = 0;
        bool used = false;
    };

    std::size_t probe(long key) const {
        return (static_cast<std::size_t>(key) * 0x9E3779B97F4A7C15ull) & mask_;
    }
    void rehash(std::size_t n) {
        std::vector<Slot> old = std::move(slots_);
        slots_.assign(n, {});
        mask_ = n - 1;
        for (const Slot& s : old)
            if (s.used) {
                std::size_t i = probe(s.key);
                while (slots_[i].used) i = (i + 1) & mask_;
                slots_[i] = s;
            }
    }

    std::vector<Slot> slots_;
    std::size_t mask_ = 0;
    std::size_t count_ = 0;
};

// Hash set of matrices up to sign, for deduplication during enumeration.
// Bucket keys use entry moduli (sign-invariant); comparisons are up to sign.
class MatSet {
public:
    explicit MatSet(double tol = 1e-8) : tol_(tol) {}

    bool insert(const Mat2C& m) {
        const long qa = std::lround(std::abs(m.a) / cell_);
        const long qb = std::lround(std::abs(m.b) / cell_);
        bool dup = false;
        for (long da = -1; da <= 1 && !dup; ++da)
            for (long db = -1; db <= 1 && !dup; ++db)
                dup = buckets_.visit((qa + da) * 2000003 + qb + db, [&](int idx) {
                    const Mat2C& o = items_[idx];
                    return m.dist(o) < tol_ || m.dist(-o) < tol_;
                });
        if (dup) return false;
        buckets_.insert(qa * 2000003 + qb, static_cast<int>(items_.size()));
        items_.push_back(m);
        return true;
    }

    std::size_t size() const { return items_.size(); }

private:
    double tol_;
    double cell_ = 1e-5;
    std::vector<Mat2C> items_;
    FlatMultiMap buckets_;
};

} // namespace detail

/// All distinct group elements of word length <= max_word_len, deduplicated
/// up to sign. Breadth-first over the generator set (which is closed under
/// inversion for the octagon group).
inline std::vector<Mat2C> enumerate_group(const FuchsianGroup& G, int max_word_len,
                                          std::size_t budget = 4'000'000) {
    if (max_word_len > 16)
        throw EnumerationOverflow("enumerate_group: word length cap is 16");
    detail::MatSet seen;
    std::vector<Mat2C> all{Mat2C::identity()};
    seen.insert(all[0]);
    std::size_t frontier_begin = 0;
    for (int len = 1; len <= max_word_len; ++len) {
        const std::size_t frontier_end = all.size();
        for (std::size_t i = frontier_begin; i < frontier_end; ++i)
            for (const auto& g : G.generators) {
                const Mat2C m = all[i] * g;
                if (seen.insert(m)) {
                    all.push_back(m);
                    if (all.size() > budget)
                        throw EnumerationOverflow("enumerate_group: budget");
                }
            }
        frontier_begin = frontier_end;
    }
    return all;
}

/// All distinct group elements whose displacement d(0, gamma 0) is at most
/// radius. Breadth-first with a displacement cap of radius + slack on
/// intermediate words; the slack absorbs the difference between word paths
/// and geodesics. Far better suited to series truncation than word length.
inline std::vector<Mat2C> enumerate_ball(const FuchsianGroup& G, double radius,
                                         double slack = 3.0,
                                         std::size_t budget = 4'000'000) {
    const auto disp = [](const Mat2C& m) {
        return 2.0 * std::atanh(std::min(1.0 - 1e-15, std::abs(m.b / m.d)));
    };
    detail::MatSet seen;
    std::vector<Mat2C> keep{Mat2C::identity()};
    std::vector<std::pair<Mat2C, int>> frontier{{Mat2C::identity(), -1}};
    seen.insert(keep[0]);
    while (!frontier.empty()) {
        std::vector<std::pair<Mat2C, int>> next;
        for (const auto& [m, last] : frontier)
            for (int gi = 0; gi < 8; ++gi) {
                if (last >= 0 && gi == (last + 4) % 8) continue; // backtrack
                const Mat2C p = m * G.generators[gi];
                const double d = disp(p);
                if (d > radius + slack) continue;
                if (seen.insert(p)) {
                    next.emplace_back(p, gi);
                    if (d <= radius) {
                        keep.push_back(p);
                        if (keep.size() > budget)
                            throw EnumerationOverflow("enumerate_ball: budget");
                    }
                }
            }
        frontier = std::move(next);
    }
    return keep;
}

/// Weight-4 Poincare series sum_gamma P(gamma z) gamma'(z)^2 evaluated with
/// a precomputed element list. P is a polynomial given by its coefficients.
inline cplx poincare_q4(const std::vector<Mat2C>& elements,
                        const std::vector<cplx>& poly, cplx z) {
    cplx sum = 0;
    for (const auto& g : elements) {
        const cplx gz = mobius_apply(g, z);
        cplx p = 0;
        for (auto it = poly.rbegin(); it != poly.rend(); ++it) p = p * gz + *it;
        const cplx d = mobius_deriv(g, z);
        sum += p * d * d;
    }
    return sum;
}

/// Holomorphic quadratic differential sigma = f dz^2 on the quotient,
/// given by a truncated Poincare series with cached vertex samples.
struct QuadDiffField {
    std::function<cplx(cplx)> eval; // f(z), single global disc chart
    std::vector<cplx> samples;      // per raw mesh vertex
    int weight = 4;

    bool zero() const { return !eval; }
};

// ---------------------------------------------------------------------------
// Fundamental mesh

struct FundamentalMesh {
    struct Ident {
        int i, j, gen; // gamma_gen * v_i == v_j
    };

    std::vector<cplx> vertices; // raw positions in the closed octagon
    std::vector<std::array<int, 3>> triangles;
    std::vector<Ident> identifications;
    std::array<Mat2C, 8> pairing; // side-pairing generators of the group

    std::vector<int> class_of;  // raw vertex -> class index
    std::vector<int> rep_of;    // class -> representative raw vertex
    std::vector<char> interior_mask; // raw vertex: not identified with anyone
    int num_classes = 0;

    /// V - E + F of the quotient surface. Raw edges adjacent to one triangle
    /// lie on the boundary and are glued in pairs; edges with two adjacent
    /// triangles are interior.
    int euler_characteristic() const {
        std::unordered_map<long, int> mult;
        const long n = static_cast<long>(vertices.size());
        for (const auto& t : triangles)
            for (int e = 0; e < 3; ++e) {
                long a = t[e], b = t[(e + 1) % 3];
                if (a > b) std::swap(a, b);
                ++mult[a * n + b];
            }
        int interior = 0, boundary = 0;
        for (const auto& [k, m] : mult) (m == 2 ? interior : boundary)++;
        if (boundary % 2) throw MeshIdentificationError("unpaired boundary edge");
        const int E = interior + boundary / 2;
        return num_classes - E + static_cast<int>(triangles.size());
    }
};

/// Hyperbolic conformal factor of the disc, lambda_0(z) = 2/(1-|z|^2).
inline double lambda0(cplx z) { return 2.0 / (1.0 - std::norm(z)); }

/// Geodesic midpoint of two points in the disc model.
inline cplx geodesic_midpoint(cplx a, cplx b) {
    // move a to the origin, halve the radius hyperbolically, move back
    const cplx m = (b - a) / (1.0 - std::conj(a) * b);
    const double t = std::tanh(0.5 * std::atanh(std::abs(m)));
    const cplx half = (std::abs(m) > 0) ? t * m / std::abs(m) : cplx(0);
    return (half + a) / (1.0 + std::conj(a) * half);
}

namespace detail {

struct VertexPool {
    std::vector<cplx> pts;
    std::unordered_multimap<long, int> grid;
    double cell = 1e-6;

    long key(double x, double y) const {
        return std::lround(x / cell) * 2000003 + std::lround(y / cell);
    }
    int find_or_add(cplx z, double tol = 1e-10) {
        for (long dx = -1; dx <= 1; ++dx)
            for (long dy = -1; dy <= 1; ++dy) {
                const long k =
                    (std::lround(z.real() / cell) + dx) * 2000003 +
                    (std::lround(z.imag() / cell) + dy);
                auto [lo, hi] = grid.equal_range(k);
                for (auto it = lo; it != hi; ++it)
                    if (std::abs(pts[it->second] - z) < tol) return it->second;
            }
        grid.emplace(key(z.real(), z.imag()), static_cast<int>(pts.size()));
        pts.push_back(z);
        return static_cast<int>(pts.size()) - 1;
    }
    // nearest existing point within tol, or -1; errors out if two distinct
    // points both lie within tol (ambiguous snap)
    int find(cplx z, double tol) const {
        int best = -1, second = -1;
        double bd = tol;
        for (long dx = -1; dx <= 1; ++dx)
            for (long dy = -1; dy <= 1; ++dy) {
                const long k =
                    (std::lround(z.real() / cell) + dx) * 2000003 +
                    (std::lround(z.imag() / cell) + dy);
                auto [lo, hi] = grid.equal_range(k);
                for (auto it = lo; it != hi; ++it) {
                    const double d = std::abs(pts[it->second] - z);
                    if (d < bd) {
                        if (best >= 0 && it->second != static_cast<std::size_t>(best))
                            second = best;
                        bd = d;
                        best = it->second;
                    } else if (d < tol && it->second != static_cast<std::size_t>(best)) {
                        second = it->second;
                    }
                }
            }
        if (second >= 0)
            throw MeshIdentificationError("ambiguous vertex snap");
        return best;
    }
};

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace detail

/// Triangulated fundamental octagon with boundary identifications.
/// The base mesh is the fan over the octagon corners; each refinement step
/// splits every triangle four ways at geodesic edge midpoints (equivariant,
/// so paired boundary subdivisions match exactly).
inline FundamentalMesh build_mesh(const FuchsianGroup& G, int refinement) {
    if (refinement < 0) throw MeshQualityError("build_mesh: negative refinement");

    // octagon corner radius: the Dirichlet domain of the origin has its
    // corners at directions (k+1/2) pi/4 and hyperbolic radius with
    // cosh R = (1+sqrt2)^2, i.e. euclidean radius 2^{-1/4}
    const double rv = std::pow(2.0, -0.25);

    detail::VertexPool pool;
    std::vector<std::array<int, 3>> tris;
    const int center = pool.find_or_add(0.0);
    std::array<int, 8> corner;
    for (int k = 0; k < 8; ++k)
        corner[k] = pool.find_or_add(std::polar(rv, (k + 0.5) * M_PI / 4));
    for (int k = 0; k < 8; ++k)
        tris.push_back({center, corner[k], corner[(k + 1) % 8]});

    for (int r = 0; r < refinement; ++r) {
        std::vector<std::array<int, 3>> next;
        next.reserve(4 * tris.size());
        for (const auto& t : tris) {
            const int m01 = pool.find_or_add(
                geodesic_midpoint(pool.pts[t[0]], pool.pts[t[1]]));
            const int m12 = pool.find_or_add(
                geodesic_midpoint(pool.pts[t[1]], pool.pts[t[2]]));
            const int m20 = pool.find_or_add(
                geodesic_midpoint(pool.pts[t[2]], pool.pts[t[0]]));
            next.push_back({t[0], m01, m20});
            next.push_back({t[1], m12, m01});
            next.push_back({t[2], m20, m12});
            next.push_back({m01, m12, m20});
        }
        tris = std::move(next);
    }

    FundamentalMesh mesh;
    mesh.pairing = G.generators;
    mesh.vertices = pool.pts;
    mesh.triangles = std::move(tris);

    const int n = static_cast<int>(mesh.vertices.size());
    detail::UnionFind uf(n);
    mesh.interior_mask.assign(n, 1);
    const double snap = 1e-8;
    for (int i = 0; i < n; ++i)
        for (int g = 0; g < 8; ++g) {
            const cplx img = mobius_apply(G.generators[g], mesh.vertices[i]);
            if (std::abs(img) > rv + 1e-6) continue;
            const int j = pool.find(img, snap);
            if (j < 0) continue;
            mesh.identifications.push_back({i, j, g});
            uf.unite(i, j);
            mesh.interior_mask[i] = 0;
            mesh.interior_mask[j] = 0;
        }

    mesh.class_of.assign(n, -1);
    mesh.rep_of.clear();
    for (int i = 0; i < n; ++i) {
        const int r = uf.find(i);
        if (mesh.class_of[r] < 0) {
            mesh.class_of[r] = mesh.num_classes++;
            mesh.rep_of.push_back(r);
        }
        mesh.class_of[i] = mesh.class_of[r];
    }
    // representatives should be the raw vertex itself where possible
    for (int c = 0; c < mesh.num_classes; ++c) mesh.rep_of[c] = -1;
    for (int i = n - 1; i >= 0; --i) mesh.rep_of[mesh.class_of[i]] = i;

    if (mesh.euler_characteristic() != 2 - 2 * G.genus)
        throw MeshIdentificationError("build_mesh: wrong Euler characteristic");
    return mesh;
}

// ---------------------------------------------------------------------------
// Conformal factors across the seam
//
// An invariant metric g = lambda^2 |dz|^2 has lambda(gamma z)|gamma'(z)| =
// lambda(z), so the chart factor is not a weight-0 scalar. Fields store
// lambda at class representatives; u = log(lambda/lambda_0) is the invariant
// scalar used to transport values to arbitrary raw positions.

/// lambda at a raw vertex from per-class samples taken at representatives.
inline double lambda_at_raw(const FundamentalMesh& mesh, const ScalarField& lam,
                            int raw) {
    const int c = mesh.class_of[raw];
    const double u = std::log(lam[c] / lambda0(mesh.vertices[mesh.rep_of[c]]));
    return std::exp(u) * lambda0(mesh.vertices[raw]);
}

/// Per-class samples of the hyperbolic factor lambda_0.
inline ScalarField lambda0_field(const FundamentalMesh& mesh) {
    ScalarField lam(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        lam[c] = lambda0(mesh.vertices[mesh.rep_of[c]]);
    return lam;
}

namespace detail {

inline double triangle_cot(cplx a, cplx b, cplx c) {
    // cotangent of the angle at a in the euclidean chart triangle
    const cplx u = b - a, v = c - a;
    const double cross = u.real() * v.imag() - u.imag() * v.real();
    const double dot = u.real() * v.real() + u.imag() * v.imag();
    if (std::abs(cross) < 1e-15) throw MeshQualityError("degenerate triangle");
    return dot / cross;
}

} // namespace detail

/// Cotangent stiffness matrix over vertex classes: <S f, f> approximates the
/// Dirichlet energy, which is conformally invariant, so euclidean chart
/// coordinates give the right operator for every metric in the class.
inline Eigen::SparseMatrix<double> stiffness_matrix(const FundamentalMesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            const int i = t[e], j = t[(e + 1) % 3], k = t[(e + 2) % 3];
            const double w =
                0.5 * detail::triangle_cot(mesh.vertices[k], mesh.vertices[i],
                                           mesh.vertices[j]);
            const int ci = mesh.class_of[i], cj = mesh.class_of[j];
            trip.emplace_back(ci, ci, w);
            trip.emplace_back(cj, cj, w);
            trip.emplace_back(ci, cj, -w);
            trip.emplace_back(cj, ci, -w);
        }
    Eigen::SparseMatrix<double> S(mesh.num_classes, mesh.num_classes);
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
}

/// Metric vertex areas (one third of adjacent triangle areas), with the
/// conformal factor integrated by edge-midpoint quadrature in each
/// triangle's own chart.
inline ScalarField metric_vertex_areas(const FundamentalMesh& mesh,
                                       const ScalarField& lam) {
    ScalarField A = ScalarField::Zero(mesh.num_classes);
    for (const auto& t : mesh.triangles) {
        const cplx a = mesh.vertices[t[0]], b = mesh.vertices[t[1]],
                   c = mesh.vertices[t[2]];
        const double area_euc =
            0.5 * std::abs((b - a).real() * (c - a).imag() -
                           (b - a).imag() * (c - a).real());
        const double la = lambda_at_raw(mesh, lam, t[0]);
        const double lb = lambda_at_raw(mesh, lam, t[1]);
        const double lc = lambda_at_raw(mesh, lam, t[2]);
        double q = 0;
        q += std::pow(0.5 * (la + lb), 2);
        q += std::pow(0.5 * (lb + lc), 2);
        q += std::pow(0.5 * (lc + la), 2);
        const double area = area_euc * q / 3.0;
        for (int e = 0; e < 3; ++e) A[mesh.class_of[t[e]]] += area / 3.0;
    }
    return A;
}

inline double total_area(const FundamentalMesh& mesh, const ScalarField& lam) {
    return metric_vertex_areas(mesh, lam).sum();
}

/// Positive Laplace-Beltrami operator of g = lambda^2 |dz|^2:
/// (Delta f)_i = (S f)_i / A_i. Annihilates constants exactly.
inline ScalarField laplace_beltrami(const FundamentalMesh& mesh,
                                    const ScalarField& lam, const ScalarField& f) {
    const Eigen::SparseMatrix<double> S = stiffness_matrix(mesh);
    const ScalarField A = metric_vertex_areas(mesh, lam);
    return (S * f).cwiseQuotient(A);
}

/// Pointwise norm |sigma|_g = |f|/lambda^2 per vertex class.
inline ScalarField sigma_norm(const FundamentalMesh& mesh, const ScalarField& lam,
                              const QuadDiffField& sigma) {
    ScalarField out = ScalarField::Zero(mesh.num_classes);
    if (sigma.zero()) return out;
    for (int c = 0; c < mesh.num_classes; ++c)
        out[c] = std::abs(sigma.samples[mesh.rep_of[c]]) / (lam[c] * lam[c]);
    return out;
}

// ---------------------------------------------------------------------------
// Least-squares derivative stencils

namespace detail {

// neighbor classes-of-raw adjacency over raw vertices
inline std::vector<std::vector<int>> raw_adjacency(const FundamentalMesh& mesh) {
    std::vector<std::vector<int>> adj(mesh.vertices.size());
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            adj[t[e]].push_back(t[(e + 1) % 3]);
            adj[t[e]].push_back(t[(e + 2) % 3]);
        }
    for (auto& v : adj) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return adj;
}

} // namespace detail

/// Two-jet of a chart function at a point, from a least-squares cubic fit.
struct Jet2 {
    cplx f{0}, fz{0}, fzb{0}, fzz{0}, fzzb{0}, fzbzb{0};
    /// Size of the quartic tail of the fit in first-derivative units; the
    /// truncation leakage into fz/fzb is a moderate fraction of this, and
    /// the leakage into second derivatives a moderate fraction of
    /// lead4/scale.
    double lead4{0};
    /// Stencil radius used by the fit.
    double scale{0};
};

/// Least-squares quartic fit of samples vals[k] at offsets dpos[k] from the
/// expansion point (dpos[0] is expected to be 0). A quartic basis keeps the
/// second-derivative truncation error at O(h^3) on irregular stencils.
inline Jet2 fit_jet(const std::vector<cplx>& dpos, const std::vector<cplx>& vals) {
    const int m = static_cast<int>(dpos.size());
    if (m < 15) throw MeshQualityError("fit_jet: not enough samples");
    double scale = 0;
    for (const cplx& d : dpos) scale = std::max(scale, std::abs(d));
    Eigen::MatrixXcd M(m, 15);
    Eigen::VectorXcd rhs(m);
    for (int a = 0; a < m; ++a) {
        const cplx d = dpos[a] / scale, db = std::conj(d);
        int k = 0;
        for (int tot = 0; tot <= 4; ++tot)
            for (int i = tot; i >= 0; --i) {
                cplx t = 1.0;
                for (int q = 0; q < i; ++q) t *= d;
                for (int q = 0; q < tot - i; ++q) t *= db;
                M(a, k++) = t;
            }
        rhs(a) = vals[a];
    }
    const Eigen::VectorXcd c = M.colPivHouseholderQr().solve(rhs);
    // basis order per degree: d^tot, d^{tot-1} db, ..., db^tot
    Jet2 j;
    j.f = c(0);
    j.fz = c(1) / scale;
    j.fzb = c(2) / scale;
    j.fzz = 2.0 * c(3) / (scale * scale);
    j.fzzb = c(4) / (scale * scale);
    j.fzbzb = 2.0 * c(5) / (scale * scale);
    for (int k = 10; k < 15; ++k) j.lead4 = std::max(j.lead4, std::abs(c(k)) / scale);
    j.scale = scale;
    return j;
}

/// One sample point of a vertex star developed into a fixed chart.
struct StarEntry {
    int cls;   // vertex class supplying the field value
    int raw;   // raw source vertex (chart in which djac is taken)
    cplx pos;  // position in the developing chart
    cplx djac; // derivative of the developing map at the source vertex
};

/// Develops vertex stars across seams: positions of neighboring vertex
/// classes are expressed in the chart of a class representative by chaining
/// side-pairing isometries, so stencils at boundary and corner classes see
/// a full smooth neighborhood.
class StarBuilder {
public:
    explicit StarBuilder(const FundamentalMesh& mesh)
        : mesh_(mesh), adj_(detail::raw_adjacency(mesh)), chart_(mesh.vertices.size()) {
        for (const auto& id : mesh.identifications) {
            // points near v_i transfer into the chart around v_j and back
            chart_[id.j].push_back({id.i, mesh.pairing[id.gen]});
            chart_[id.i].push_back({id.j, mesh.pairing[id.gen].inverse()});
        }
    }

    std::vector<StarEntry> star(int cls, std::size_t min_points = 16) const {
        return star_at_raw(mesh_.rep_of[cls], min_points);
    }

    /// Same development, but centered at an arbitrary raw vertex (in its
    /// own chart rather than the class representative's).
    std::vector<StarEntry> star_at_raw(int rep, std::size_t min_points = 16) const {
        std::vector<StarEntry> out{
            {mesh_.class_of[rep], rep, mesh_.vertices[rep], cplx(1, 0)}};
        std::vector<std::pair<int, Mat2C>> frontier{{rep, Mat2C::identity()}};
        std::vector<cplx> seen{mesh_.vertices[rep]};
        const auto visit = [&](cplx p) {
            for (const cplx& q : seen)
                if (std::abs(q - p) < 1e-9) return false;
            seen.push_back(p);
            return true;
        };
        for (int depth = 0; depth < 6 && out.size() < min_points; ++depth) {
            std::vector<std::pair<int, Mat2C>> next;
            for (const auto& [raw, M] : frontier) {
                // chart switches at the current vertex keep the same point
                for (const auto& [other, T] : chart_[raw]) {
                    const Mat2C M2 = M * T;
                    bool dup = false;
                    for (const auto& [r2, Mx] : next)
                        if (r2 == other && Mx.dist(M2) + Mx.dist(-M2) > 0 &&
                            std::min(Mx.dist(M2), Mx.dist(-M2)) < 1e-9)
                            dup = true;
                    if (!dup) next.emplace_back(other, M2);
                }
                for (int nb : adj_[raw]) {
                    const cplx p = mobius_apply(M, mesh_.vertices[nb]);
                    if (visit(p))
                        out.push_back({mesh_.class_of[nb], nb, p,
                                       mobius_deriv(M, mesh_.vertices[nb])});
                    next.emplace_back(nb, M);
                }
            }
            frontier = std::move(next);
        }
        return out;
    }

private:
    const FundamentalMesh& mesh_;
    std::vector<std::vector<int>> adj_;
    std::vector<std::vector<std::pair<int, Mat2C>>> chart_; // raw -> transfers
};

/// Jets of log(lambda) in each class representative's chart, seam-aware.
/// lambda is the chart factor of an invariant metric sampled at class
/// representatives; its invariant part u = log(lambda/lambda_0) transports
/// to developed positions exactly.
inline std::vector<Jet2> log_lambda_jets(const FundamentalMesh& mesh,
                                         const ScalarField& lam) {
    ScalarField u(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        u[c] = std::log(lam[c] / lambda0(mesh.vertices[mesh.rep_of[c]]));
    const StarBuilder sb(mesh);
    std::vector<Jet2> jets(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c) {
        const auto star = sb.star(c);
        std::vector<cplx> dpos(star.size());
        std::vector<cplx> vals(star.size());
        for (std::size_t k = 0; k < star.size(); ++k) {
            dpos[k] = star[k].pos - star[0].pos;
            vals[k] = u[star[k].cls] + std::log(lambda0(star[k].pos));
        }
        jets[c] = fit_jet(dpos, vals);
    }
    return jets;
}

/// Jets of an invariant (weight-0) scalar at class representatives.
inline std::vector<Jet2> scalar_jets(const FundamentalMesh& mesh,
                                     const CScalarField& f) {
    const StarBuilder sb(mesh);
    std::vector<Jet2> jets(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c) {
        const auto star = sb.star(c);
        std::vector<cplx> dpos(star.size());
        std::vector<cplx> vals(star.size());
        for (std::size_t k = 0; k < star.size(); ++k) {
            dpos[k] = star[k].pos - star[0].pos;
            vals[k] = f[star[k].cls];
        }
        jets[c] = fit_jet(dpos, vals);
    }
    return jets;
}

/// Jets of the coefficient of a weight-4 field (quadratic differential) in
/// the representative charts; samples transport with the automorphy factor.
inline std::vector<Jet2> quaddiff_jets(const FundamentalMesh& mesh,
                                       const QuadDiffField& sigma) {
    const StarBuilder sb(mesh);
    std::vector<Jet2> jets(mesh.num_classes);
    if (sigma.zero()) return jets;
    // per class: a raw sample (any raw copy serves; use the representative)
    for (int c = 0; c < mesh.num_classes; ++c) {
        const auto star = sb.star(c);
        std::vector<cplx> dpos(star.size());
        std::vector<cplx> vals(star.size());
        for (std::size_t k = 0; k < star.size(); ++k) {
            dpos[k] = star[k].pos - star[0].pos;
            // the raw sample transports to the developed position with the
            // squared inverse jacobian of the developing map
            vals[k] = sigma.samples[star[k].raw] / (star[k].djac * star[k].djac);
        }
        jets[c] = fit_jet(dpos, vals);
    }
    return jets;
}

/// Jets at every raw vertex of a per-raw-vertex field in the global chart,
/// transported across seams as a form of type (a,b): the transported sample
/// at a developed position is sample / (djac^a * conj(djac)^b). A quadratic
/// differential f dz^2 is (2,0); a (1,0)-form is (1,0); dbar of a quadratic
/// differential is (2,1).
inline std::vector<Jet2> form_raw_jets(const FundamentalMesh& mesh,
                                       const std::vector<cplx>& samples,
                                       int a, int b) {
    const StarBuilder sb(mesh);
    std::vector<Jet2> jets(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const auto star = sb.star_at_raw(static_cast<int>(v));
        std::vector<cplx> dpos(star.size());
        std::vector<cplx> vals(star.size());
        for (std::size_t k = 0; k < star.size(); ++k) {
            dpos[k] = star[k].pos - star[0].pos;
            cplx fac(1, 0);
            for (int q = 0; q < a; ++q) fac *= star[k].djac;
            for (int q = 0; q < b; ++q) fac *= std::conj(star[k].djac);
            vals[k] = samples[star[k].raw] / fac;
        }
        jets[v] = fit_jet(dpos, vals);
    }
    return jets;
}

/// Gaussian curvature of g = lambda^2 |dz|^2 at vertex classes,
/// K = -Delta_euc(log lambda)/lambda^2 with the Laplacian from seam-aware
/// least-squares jets.
inline ScalarField gauss_curvature(const FundamentalMesh& mesh,
                                   const ScalarField& lam) {
    const auto jets = log_lambda_jets(mesh, lam);
    ScalarField K(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        K[c] = -4.0 * jets[c].fzzb.real() / (lam[c] * lam[c]);
    return K;
}

namespace detail {

/// Jets of chart samples at interior raw vertices, from raw-adjacency rings.
/// No seam development: well-defined for fields with no automorphy,
/// matching a plain finite-difference check in the fundamental domain.
inline std::vector<std::pair<int, Jet2>> interior_raw_jets(
    const FundamentalMesh& mesh, const std::vector<cplx>& samples) {
    const auto adj = raw_adjacency(mesh);
    std::vector<std::pair<int, Jet2>> out;
    std::vector<char> in(mesh.vertices.size(), 0);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (!mesh.interior_mask[v]) continue;
        std::vector<int> ring{static_cast<int>(v)};
        in[v] = 1;
        std::size_t lo = 0;
        while (ring.size() < 18 && lo < ring.size()) {
            const std::size_t hi = ring.size();
            for (; lo < hi; ++lo)
                for (int nb : adj[ring[lo]])
                    if (!in[nb]) {
                        in[nb] = 1;
                        ring.push_back(nb);
                    }
        }
        std::vector<cplx> dpos(ring.size()), vals(ring.size());
        for (std::size_t k = 0; k < ring.size(); ++k) {
            dpos[k] = mesh.vertices[ring[k]] - mesh.vertices[v];
            vals[k] = samples[ring[k]];
            in[ring[k]] = 0;
        }
        out.emplace_back(static_cast<int>(v), fit_jet(dpos, vals));
    }
    return out;
}

} // namespace detail

/// Discrete sup-norm of dbar f over interior raw vertices.
inline double dbar_residual(const FundamentalMesh& mesh, const QuadDiffField& sigma) {
    if (sigma.zero()) return 0.0;
    double sup = 0;
    for (const auto& [v, j] : detail::interior_raw_jets(mesh, sigma.samples))
        sup = std::max(sup, std::abs(j.fzb));
    return sup;
}

/// Truncation-leakage scale of the same stencils: the quartic tail of the
/// fit, in first-derivative units. A holomorphic field's dbar_residual is
/// a fraction of this; a genuinely non-holomorphic field exceeds it.
inline double dbar_stencil_tolerance(const FundamentalMesh& mesh,
                                     const QuadDiffField& sigma) {
    if (sigma.zero()) return 0.0;
    double sup = 0;
    for (const auto& [v, j] : detail::interior_raw_jets(mesh, sigma.samples))
        sup = std::max(sup, j.lead4);
    return sup;
}

/// Contraction r(gamma) = gamma(v)(v,.)/|v|^2 of a (0,1)-form with values in
/// quadratic differentials, yielding a (1,0)-form. In the chart this is
/// G conj(vt) vt / (lambda^2 |vt|^2) = G/lambda^2, independent of v.
inline CScalarField r_contraction(const FundamentalMesh& mesh, const ScalarField& lam,
                                  const CScalarField& gamma_samples,
                                  cplx v = cplx(1, 0)) {
    if (std::abs(v) < 1e-14) throw NotATangentVector("r_contraction: v = 0");
    CScalarField out(mesh.num_classes);
    for (int c = 0; c < mesh.num_classes; ++c)
        out[c] = gamma_samples[c] * std::conj(v) * v /
                 (lam[c] * lam[c] * std::norm(v));
    return out;
}

// ---------------------------------------------------------------------------
// Poincare series fields

/// Automorphy residual sup |f(gamma z) gamma'(z)^2 - f(z)| of a weight-4
/// evaluator over sampled boundary pairs of the fundamental octagon.
inline double automorphy_residual(const FuchsianGroup& G,
                                  const std::function<cplx(cplx)>& f,
                                  int samples_per_side = 8) {
    const double rv = std::pow(2.0, -0.25);
    double sup = 0;
    for (int k = 0; k < 8; ++k) {
        const cplx a = std::polar(rv, (k - 0.5) * M_PI / 4);
        const cplx b = std::polar(rv, (k + 0.5) * M_PI / 4);
        for (int s = 0; s <= samples_per_side; ++s) {
            // walk the geodesic side by iterated midpoints
            cplx z = a;
            double t = static_cast<double>(s) / samples_per_side;
            cplx lo = a, hi = b;
            for (int it = 0; it < 30; ++it) {
                const cplx mid = geodesic_midpoint(lo, hi);
                if (t < 0.5) { hi = mid; t *= 2; }
                else { lo = mid; t = 2 * t - 1; }
            }
            z = lo;
            // side k lies on the bisector of [0, gamma_k 0]; gamma_{k+4}
            // maps it onto side k+4
            const Mat2C& g = G.generators[(k + 4) % 8];
            const cplx d = mobius_deriv(g, z);
            sup = std::max(sup, std::abs(f(mobius_apply(g, z)) * d * d - f(z)));
        }
    }
    return sup;
}

/// Build a holomorphic quadratic differential as a truncated Poincare
/// series, sampling it at the mesh vertices and validating automorphy.
inline QuadDiffField make_poincare_q4(const FuchsianGroup& G,
                                      const FundamentalMesh& mesh,
                                      const std::vector<cplx>& poly,
                                      double ball_radius = 12.0,
                                      double tol = 1e-5) {
    auto elements = std::make_shared<std::vector<Mat2C>>(
        enumerate_ball(G, ball_radius));
    QuadDiffField f;
    f.eval = [elements, poly](cplx z) { return poincare_q4(*elements, poly, z); };
    const double res = automorphy_residual(G, f.eval);
    if (res > tol)
        throw TruncationInsufficient("make_poincare_q4: residual " +
                                     std::to_string(res));
    f.samples.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        f.samples[i] = f.eval(mesh.vertices[i]);
    double mx = 0;
    for (const cplx& s : f.samples) mx = std::max(mx, std::abs(s));
    if (!(mx > 0)) throw TruncationInsufficient("make_poincare_q4: zero field");
    return f;
}

} // namespace afmod
