#include "srblab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "srblab/errors.hpp"
#include "srblab/parallel.hpp"

namespace srblab {

namespace {

constexpr int kRenorm = 32;

// Product of differentials along an orbit, kept as scale * P with |P| = 1 after renormalization.
struct ScaledProduct {
    Mat2 P = Mat2::identity();
    double log_scale = 0;
    double log_det = 0;

    void apply(const Mat2& D, long k) {
        P = D * P;
        log_det += std::log(std::abs(D.det()));
        if ((k + 1) % kRenorm == 0) renormalize();
    }
    void renormalize() {
        double s = op_norm(P);
        if (s > 0 && std::isfinite(s)) {
            P = P * (1 / s);
            log_scale += std::log(s);
        }
    }
    double log_norm() const { return log_scale + std::log(op_norm(P)); }
};

Vec2 step_or_throw(const SurfaceMap& f, Vec2 x, long k, double partial) {
    Vec2 y = f.normalize(f.lift(x));
    if (!f.in_domain(y)) throw EscapeError(f.name() + ": orbit left the declared domain", k + 1, partial);
    return y;
}

}  // namespace

ProjectiveStep project_step(const SurfaceMap& f, const ProjectivePoint& p) {
    if (!f.in_domain(p.base)) throw EscapeError(f.name() + ": base point outside the declared domain", 0, 0);
    Mat2 D = f.differential(p.base);
    Vec2 img = D * p.direction();
    ProjectiveStep s;
    s.next = ProjectivePoint::make(step_or_throw(f, p.base, 0, 0), img);
    s.value.phi = std::log(norm(img));
    s.value.w = std::max(0.0, std::log(op_norm(D)) - s.value.phi);
    return s;
}

double phi_sum(const SurfaceMap& f, ProjectivePoint p, long n) {
    double total = 0;
    for (long k = 0; k < n; ++k) {
        auto s = project_step(f, p);
        total += s.value.phi;
        p = s.next;
    }
    return total;
}

double lyapunov_max(const SurfaceMap& f, Vec2 x, long n) {
    if (n <= 0) throw DomainError("lyapunov_max: n must be positive");
    ScaledProduct prod;
    for (long k = 0; k < n; ++k) {
        prod.apply(f.differential(x), k);
        double partial = prod.log_norm() / static_cast<double>(k + 1);
        x = step_or_throw(f, x, k, partial);
    }
    return prod.log_norm() / static_cast<double>(n);
}

LyapunovPair lyapunov_pair(const SurfaceMap& f, Vec2 x, long n) {
    if (n <= 0) throw DomainError("lyapunov_pair: n must be positive");
    ScaledProduct prod;
    for (long k = 0; k < n; ++k) {
        prod.apply(f.differential(x), k);
        x = step_or_throw(f, x, k, prod.log_norm() / static_cast<double>(k + 1));
    }
    double l1 = prod.log_norm();
    return {l1 / static_cast<double>(n), (prod.log_det - l1) / static_cast<double>(n)};
}

namespace {

double grid_max(const SurfaceMap& f, long n, int grid, int& escaped) {
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    std::size_t cells = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    std::vector<double> vals(cells, -std::numeric_limits<double>::infinity());
    std::vector<char> esc(cells, 0);
    parallel_for(cells, [&](std::size_t i) {
        int ix = static_cast<int>(i % static_cast<std::size_t>(grid)), iy = static_cast<int>(i / static_cast<std::size_t>(grid));
        Vec2 x{lo.x + (hi.x - lo.x) * (ix + 0.5) / grid, lo.y + (hi.y - lo.y) * (iy + 0.5) / grid};
        try {
            vals[i] = lyapunov_max(f, x, n);
        } catch (const EscapeError&) {
            esc[i] = 1;
        }
    });
    escaped = static_cast<int>(std::count(esc.begin(), esc.end(), 1));
    return std::max(0.0, *std::max_element(vals.begin(), vals.end()));
}

}  // namespace

REstimate R_estimate(const SurfaceMap& f, long n, int grid) {
    if (n <= 0 || grid < 2) throw DomainError("R_estimate: need n >= 1 and grid >= 2");
    REstimate r;
    r.n = n;
    r.grid = grid;
    int dummy = 0;
    r.value = grid_max(f, n, grid, r.escaped);
    r.coarse = grid_max(f, n, grid / 2, dummy);
    return r;
}

double omega_q(const SurfaceMap& f, const ProjectivePoint& p, int q) {
    if (q < 1) throw DomainError("omega_q: q must be positive");
    std::vector<Vec2> orbit{p.base};
    for (int k = 0; k < 2 * q - 1; ++k) orbit.push_back(step_or_throw(f, orbit.back(), k, 0));
    double acc = 0;
    for (int k = 0; k < q; ++k) {
        ScaledProduct prod;
        for (int j = 0; j < q; ++j) prod.apply(f.differential(orbit[static_cast<std::size_t>(k + j)]), j);
        acc += prod.log_norm() / q;
    }
    double phi = std::log(norm(f.differential(p.base) * p.direction()));
    return acc / q - phi;
}

MatrixSupCheck matrix_cocycle_sup_check(const std::vector<Mat2>& seq, int directions) {
    if (seq.empty()) throw DomainError("matrix_cocycle_sup_check: empty sequence");
    if (directions < 1) throw DomainError("matrix_cocycle_sup_check: need at least one direction");
    ScaledProduct prod;
    for (std::size_t k = 0; k < seq.size(); ++k) prod.apply(seq[k], static_cast<long>(k));
    prod.renormalize();
    double n = static_cast<double>(seq.size());
    MatrixSupCheck out;
    out.norm_value = prod.log_norm() / n;
    out.direction_max = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < directions; ++j) {
        Vec2 v = unit_from_angle(std::numbers::pi * j / directions);
        out.direction_max = std::max(out.direction_max, (prod.log_scale + std::log(norm(prod.P * v))) / n);
    }
    out.gap = out.norm_value - out.direction_max;
    out.tolerance = -std::log(std::cos(std::numbers::pi / (2.0 * directions))) / n;
    if (out.gap < -1e-12) throw InvariantError("matrix_cocycle_sup_check: direction growth exceeds the norm");
    return out;
}

namespace {

struct Interval {
    double lo, hi;
    int depth;
};

enum class Verdict { Inside, Outside, Split };

}  // namespace

VolumeGrowth local_volume_growth(const SurfaceMap& f, const CurveJet& sigma, double t_x, double eps, long n) {
    if (n <= 0 || !(eps > 0)) throw DomainError("local_volume_growth: need n >= 1 and eps > 0");
    if (t_x < -1 || t_x > 1) throw PreconditionError("local_volume_growth: x must lie on sigma");
    constexpr int kMaxDepth = 60;
    std::vector<Vec2> xs{f.normalize(sigma.eval(t_x))};
    for (long k = 0; k < n; ++k) xs.push_back(step_or_throw(f, xs.back(), k, 0));

    // Orbit of the piece centre with its tangent; returns the final-level length estimate.
    auto classify = [&](const Interval& I, double& final_len) {
        double h = 0.5 * (I.hi - I.lo), tm = 0.5 * (I.lo + I.hi);
        Vec2 y = f.normalize(sigma.eval(tm)), v = sigma.derivative(tm);
        bool undecided = false;
        for (long k = 0;; ++k) {
            double d = f.distance(y, xs[static_cast<std::size_t>(k)]);
            double L = norm(v) * 2 * h;
            if (k == n) {
                final_len = L;
                break;
            }
            if (d - L / 2 >= eps) return Verdict::Outside;
            if (d + L / 2 >= eps || L > eps / 4) undecided = true;
            v = f.differential(y) * v;
            y = f.normalize(f.lift(y));
            if (!f.in_domain(y)) return Verdict::Outside;
        }
        if (!undecided) return Verdict::Inside;
        if (I.depth < kMaxDepth) return Verdict::Split;
        // At the refinement floor the centre decides.
        Vec2 z = f.normalize(sigma.eval(tm));
        for (long k = 0; k < n; ++k) {
            if (f.distance(z, xs[static_cast<std::size_t>(k)]) >= eps) return Verdict::Outside;
            z = f.normalize(f.lift(z));
        }
        return Verdict::Inside;
    };

    VolumeGrowth out;
    std::vector<Interval> stack;
    for (int i = 63; i >= 0; --i) stack.push_back({-1 + i / 32.0, -1 + (i + 1) / 32.0, 0});
    while (!stack.empty()) {
        Interval I = stack.back();
        stack.pop_back();
        double len = 0;
        switch (classify(I, len)) {
            case Verdict::Inside:
                out.length += len;
                ++out.pieces;
                break;
            case Verdict::Outside:
                break;
            case Verdict::Split: {
                double m = 0.5 * (I.lo + I.hi);
                stack.push_back({m, I.hi, I.depth + 1});
                stack.push_back({I.lo, m, I.depth + 1});
                break;
            }
        }
    }
    if (out.length <= 0) throw InvariantError("local_volume_growth: the piece through x was dropped");
    out.rate = std::log(out.length) / static_cast<double>(n);
    return out;
}

ContractingProfile contracting_profile(const SurfaceMap& f, const std::vector<Vec2>& U, double eps, long N) {
    if (U.size() < 2) throw PreconditionError("contracting_profile: need at least two sample points");
    if (N < 1 || !(eps > 0)) throw DomainError("contracting_profile: need N >= 1 and eps > 0");
    ContractingProfile out;
    std::vector<Vec2> pts;
    for (auto p : U) pts.push_back(f.normalize(p));
    std::vector<std::int64_t> E;
    for (long k = 0; k <= N; ++k) {
        double diam = 0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) diam = std::max(diam, f.distance(pts[i], pts[j]));
        out.diameters.push_back(diam);
        if (k >= 1 && diam > eps) E.push_back(k);
        if (k == N) break;
        for (auto& p : pts) p = step_or_throw(f, p, k, 0);
    }
    out.E = IntegerSet(E, N);
    std::vector<std::int64_t> ns;
    for (std::int64_t m = 1; m <= N; m *= 2) ns.push_back(m);
    if (ns.back() != N) ns.push_back(N);
    out.report = density_report(out.E, ns);
    out.exponents.resize(U.size());
    parallel_for(U.size(), [&](std::size_t i) { out.exponents[i] = lyapunov_max(f, f.normalize(U[i]), N); });
    return out;
}

}  // namespace srblab
