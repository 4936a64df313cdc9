#include "srblab/srb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "srblab/dynamics.hpp"
#include "srblab/errors.hpp"
#include "srblab/parallel.hpp"
#include "srblab/reptree.hpp"

namespace srblab {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::SrbConsistent: return "SRB-consistent";
        case Verdict::Inconsistent: return "inconsistent";
        case Verdict::InsufficientData: return "insufficient-data";
    }
    return "insufficient-data";
}

Histogram Histogram::of(const std::vector<double>& values, double width) {
    if (!(width > 0)) throw DomainError("Histogram: bin width must be positive");
    Histogram h;
    h.width = width;
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (double v : values)
        if (std::isfinite(v)) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
    if (!(mn <= mx)) return h;
    h.lo = std::floor(mn / width) * width;
    h.counts.assign(static_cast<std::size_t>(std::floor((mx - h.lo) / width)) + 1, 0);
    for (double v : values)
        if (std::isfinite(v)) {
            auto i = static_cast<std::size_t>(std::floor((v - h.lo) / width));
            ++h.counts[std::min(i, h.counts.size() - 1)];
        }
    return h;
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

double PsiObservable::operator()(const ProjectivePoint& p) const {
    if (!f) throw DomainError("PsiObservable: no map");
    if (r < 2) throw DomainError("PsiObservable: r must be at least 2");
    return project_step(*f, p).value.phi - omega_q(*f, p, q) / (r - 1);
}

namespace {

struct BlockTable {
    std::vector<double> H;            // H[m - 1] = H(P^m)
    std::vector<std::size_t> words;  // occupied words of P^m
};

BlockTable block_table(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& mu, const BoxPartition& P, int depth) {
    if (depth < 1) throw DomainError("block_entropies: depth must be positive");
    const std::size_t N = mu.atoms.size(), D = static_cast<std::size_t>(depth);
    if (N == 0) throw DomainError("block_entropies: empty measure");
    std::vector<std::int64_t> it(N * D);
    parallel_for(N, [&](std::size_t i) {
        Vec2 y = mu.atoms[i].state;
        std::size_t k = 0;
        try {
            for (; k < D; ++k) {
                it[i * D + k] = P.cell(y);
                if (k + 1 < D) y = f.forward(y);
            }
        } catch (const EscapeError&) {
            for (; k < D; ++k) it[i * D + k] = -1;
        }
    });
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(it.begin() + static_cast<std::ptrdiff_t>(a * D), it.begin() + static_cast<std::ptrdiff_t>((a + 1) * D),
                                            it.begin() + static_cast<std::ptrdiff_t>(b * D), it.begin() + static_cast<std::ptrdiff_t>((b + 1) * D)) ||
               (std::equal(it.begin() + static_cast<std::ptrdiff_t>(a * D), it.begin() + static_cast<std::ptrdiff_t>((a + 1) * D),
                           it.begin() + static_cast<std::ptrdiff_t>(b * D)) &&
                a < b);
    });
    double W = mu.total();
    if (!(W > 0)) throw DomainError("block_entropies: zero total mass");
    BlockTable t;
    for (std::size_t m = 1; m <= D; ++m) {
        double h = 0, run = 0;
        std::size_t words = 0;
        for (std::size_t j = 0; j < N; ++j) {
            std::size_t a = order[j];
            bool fresh = j == 0 || !std::equal(it.begin() + static_cast<std::ptrdiff_t>(a * D), it.begin() + static_cast<std::ptrdiff_t>(a * D + m),
                                               it.begin() + static_cast<std::ptrdiff_t>(order[j - 1] * D));
            if (fresh) {
                if (run > 0) h -= (run / W) * std::log(run / W);
                run = 0;
                ++words;
            }
            run += mu.atoms[a].weight;
        }
        if (run > 0) h -= (run / W) * std::log(run / W);
        t.H.push_back(std::max(0.0, h));
        t.words.push_back(words);
    }
    return t;
}

struct QuadMass {
    int levels = 0;
    std::vector<double> m;  // finest level, row-major
};

QuadMass quad_mass(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& mu, int levels) {
    if (levels < 1 || levels > 12) throw DomainError("grid_wasserstein: levels must lie in [1, 12]");
    const std::int64_t S = std::int64_t{1} << levels;
    QuadMass q{levels, std::vector<double>(static_cast<std::size_t>(S * S), 0)};
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    double W = mu.total();
    if (!(W > 0)) throw DomainError("grid_wasserstein: zero total mass");
    for (const auto& a : mu.atoms) {
        Vec2 y = f.normalize(a.state);
        auto idx = [&](double v, double l, double h) {
            return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((v - l) / (h - l) * static_cast<double>(S))), 0, S - 1);
        };
        q.m[static_cast<std::size_t>(idx(y.y, lo.y, hi.y) * S + idx(y.x, lo.x, hi.x))] += a.weight / W;
    }
    return q;
}

double quad_distance(const SurfaceMap& f, const QuadMass& a, const QuadMass& b) {
    Vec2 side = f.box_hi() - f.box_lo();
    std::vector<double> d(a.m.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.m[i] - b.m[i];
    double total = 0;
    for (int l = a.levels; l >= 1; --l) {
        const std::int64_t S = std::int64_t{1} << l;
        double parent = std::ldexp(1.0, -(l - 1));
        double w = 0.5 * std::hypot(side.x * parent, side.y * parent);
        double s = 0;
        for (double v : d) s += std::abs(v);
        total += w * s;
        const std::int64_t H = S / 2;
        std::vector<double> up(static_cast<std::size_t>(H * H), 0);
        for (std::int64_t iy = 0; iy < S; ++iy)
            for (std::int64_t ix = 0; ix < S; ++ix) up[static_cast<std::size_t>((iy / 2) * H + ix / 2)] += d[static_cast<std::size_t>(iy * S + ix)];
        d = std::move(up);
    }
    return total;
}

WeightedPointMeasure<Vec2> project(const SurfaceMap& f, const WeightedPointMeasure<ProjectivePoint>& mu) {
    WeightedPointMeasure<Vec2> out;
    out.atoms.reserve(mu.atoms.size());
    for (const auto& a : mu.atoms) out.atoms.push_back({f.normalize(a.state.base), a.weight});
    return out;
}

double eigen_min_modulus(const Mat2& M) {
    double tr = M.a + M.d, det = M.det(), disc = tr * tr - 4 * det;
    if (disc < 0) return std::sqrt(std::abs(det));
    double s = std::sqrt(disc);
    return std::min(std::abs((tr + s) / 2), std::abs((tr - s) / 2));
}

// Grid cell ix, iy with an R2-sequence offset inside the cell; exact dyadic points would
// sit on periodic orbits of the linear maps.
Vec2 grid_point(const SurfaceMap& f, int grid, std::size_t i) {
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    double k = static_cast<double>(i + 1);
    double ux = k * 0.7548776662466927, uy = k * 0.5698402909980532;
    ux -= std::floor(ux);
    uy -= std::floor(uy);
    double gx = (static_cast<double>(i % static_cast<std::size_t>(grid)) + ux) / grid;
    double gy = (static_cast<double>(i / static_cast<std::size_t>(grid)) + uy) / grid;
    return {lo.x + (hi.x - lo.x) * gx, lo.y + (hi.y - lo.y) * gy};
}

Mat2 orbit_jacobian(const SurfaceMap& f, Vec2 x, int k) {
    Mat2 D = Mat2::identity();
    for (int j = 0; j < k; ++j) {
        D = f.differential(x) * D;
        x = f.forward(x);
    }
    return D;
}

}  // namespace

std::vector<double> block_entropies(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& mu, const BoxPartition& P, int depth) {
    return block_table(f, mu, P, depth).H;
}

EntropyEstimate entropy_estimate(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& mu, int resolution, int max_depth,
                                 std::uint64_t seed) {
    if (resolution < 1 || max_depth < 1) throw DomainError("entropy_estimate: resolution and depth must be positive");
    auto P = BoxPartition::grid(f, resolution, seed);
    auto t = block_table(f, mu, P, max_depth + 1);
    double cap = static_cast<double>(mu.atoms.size()) / kAtomsPerWord;
    int m = 1;
    for (int j = 1; j <= max_depth; ++j)
        if (static_cast<double>(t.words[static_cast<std::size_t>(j)]) <= cap) m = j;
    EntropyEstimate e;
    e.resolution = resolution;
    e.m = m;
    e.h = t.H[static_cast<std::size_t>(m)] - t.H[static_cast<std::size_t>(m - 1)];
    e.words = t.words[static_cast<std::size_t>(m)];
    return e;
}

double grid_wasserstein(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& a, const WeightedPointMeasure<Vec2>& b, int levels) {
    return quad_distance(f, quad_mass(f, a, levels), quad_mass(f, b, levels));
}

std::vector<PeriodicPoint> periodic_sources(const SurfaceMap& f, int max_period, int grid) {
    if (max_period < 1 || grid < 1) throw DomainError("periodic_sources: period and grid must be positive");
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    const std::size_t G = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    std::vector<PeriodicPoint> out;
    for (int k = 1; k <= max_period; ++k) {
        std::vector<PeriodicPoint> found(G);
        std::vector<char> ok(G, 0);
        parallel_for(G, [&](std::size_t i) {
            double gx = (static_cast<double>(i % static_cast<std::size_t>(grid)) + 0.5) / grid;
            double gy = (static_cast<double>(i / static_cast<std::size_t>(grid)) + 0.5) / grid;
            Vec2 x{lo.x + (hi.x - lo.x) * gx, lo.y + (hi.y - lo.y) * gy};
            try {
                for (int it = 0; it < 60; ++it) {
                    Vec2 r = f.displacement(x, f.iterate(x, k));
                    Mat2 J = orbit_jacobian(f, x, k);
                    if (norm(r) < 1e-11) {
                        if (eigen_min_modulus(J) > 1 + 1e-9) {
                            found[i] = {f.normalize(x), k};
                            ok[i] = 1;
                        }
                        return;
                    }
                    Mat2 A{J.a - 1, J.b, J.c, J.d - 1};
                    if (std::abs(A.det()) < 1e-12) return;
                    x = f.normalize(x - A.inverse() * r);
                }
            } catch (const EscapeError&) {
            }
        });
        for (std::size_t i = 0; i < G; ++i) {
            if (!ok[i]) continue;
            bool dup = false;
            for (const auto& q : out) dup = dup || f.distance(q.x, found[i].x) < 1e-8;
            if (!dup) out.push_back(found[i]);
        }
    }
    return out;
}

double distance_to_curve(const SurfaceMap& f, const CurveJet& sigma, Vec2 x) {
    double best = std::numeric_limits<double>::infinity();
    bool torus = f.domain() == DomainKind::Torus;
    for (const auto& pc : sigma.pieces()) {
        Vec2 c0 = pc.p.c.at(0);
        Vec2 base{std::round(c0.x - x.x), std::round(c0.y - x.y)};
        int span = torus ? 1 : 0;
        if (!torus) base = {0, 0};
        for (int dx = -span; dx <= span; ++dx)
            for (int dy = -span; dy <= span; ++dy) {
                poly::VPoly q = pc.p;
                q.c[0] = q.c[0] - (x + base + Vec2{static_cast<double>(dx), static_cast<double>(dy)});
                best = std::min(best, std::sqrt(std::max(0.0, poly::min_on(q.norm2(), -1, 1))));
            }
    }
    return best;
}

CurveJet seed_curve(const SurfaceMap& f, const std::string& spec, double eps) {
    if (!(eps > 0)) throw DomainError("seed_curve: eps must be positive");
    if (spec.empty()) throw DomainError("seed_curve: empty spec");
    char kind = spec[0];
    double off = 0.5;
    if (spec.size() > 1) {
        if (spec[1] != ':') throw DomainError("seed_curve: expected h|v|d[:OFFSET], got '" + spec + "'");
        try {
            std::size_t used = 0;
            off = std::stod(spec.substr(2), &used);
            if (used != spec.size() - 2) throw DomainError("");
        } catch (const std::exception&) {
            throw DomainError("seed_curve: bad offset in '" + spec + "'");
        }
    }
    if (!(off >= 0 && off <= 1)) throw DomainError("seed_curve: offset must lie in [0, 1]");
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    auto at = [&](double u, double v) { return Vec2{lo.x + (hi.x - lo.x) * u, lo.y + (hi.y - lo.y) * v}; };
    switch (kind) {
        case 'h': return CurveJet::segment(at(0.5, off), Vec2{eps, 0});
        case 'v': return CurveJet::segment(at(off, 0.5), Vec2{0, eps});
        case 'd': return CurveJet::segment(at(off, off), Vec2{1, 1} * (eps / std::sqrt(2.0)));
        default: throw DomainError("seed_curve: expected h|v|d[:OFFSET], got '" + spec + "'");
    }
}

SrbCandidate candidate_from_measure(const SurfaceMap& f, WeightedPointMeasure<ProjectivePoint> mu, long horizon, int resolution,
                                    int max_word, std::uint64_t seed) {
    if (horizon < 1) throw DomainError("candidate: horizon must be positive");
    if (mu.atoms.empty()) throw DomainError("candidate: empty measure");
    mu.normalize();
    SrbCandidate c;
    const std::size_t N = mu.atoms.size();
    std::vector<double> rate(N), jac(N);
    parallel_for(N, [&](std::size_t i) {
        ProjectivePoint p = mu.atoms[i].state;
        double s = 0, d = 0;
        for (long k = 0; k < horizon; ++k) {
            d += std::log(std::abs(f.differential(p.base).det()));
            auto st = project_step(f, p);
            s += st.value.phi;
            p = st.next;
        }
        rate[i] = s / static_cast<double>(horizon);
        jac[i] = d / static_cast<double>(horizon);
    });
    for (std::size_t i = 0; i < N; ++i) {
        c.chi1 += mu.atoms[i].weight * rate[i];
        c.chi2 += mu.atoms[i].weight * (jac[i] - rate[i]);
    }
    c.projected = project(f, mu);
    for (int R : {resolution, 2 * resolution, 4 * resolution}) c.entropy_by_resolution.push_back(entropy_estimate(f, c.projected, R, max_word, seed));
    c.entropy = c.entropy_by_resolution.front().h;
    c.measure = std::move(mu);
    return c;
}

SrbCandidate run_pipeline(const SurfaceMap& f, const CurveJet& sigma, const PipelineOptions& opt) {
    if (opt.p < 1 || opt.depth < 1 || opt.q < 1 || opt.horizon < 1 || opt.samples < 2)
        throw DomainError("run_pipeline: p, depth, q, horizon must be positive and samples at least 2");
    const int r = sigma.order();
    SrbCandidate c;
    c.b_threshold = opt.b;
    c.r_estimate = R_estimate(f, 64, 16).value;
    if (!(opt.b > c.r_estimate / r))
        throw PreconditionError("run_pipeline: b=" + std::to_string(opt.b) + " must exceed R(f)/r=" + std::to_string(c.r_estimate / r));
    c.eps = opt.eps > 0 ? opt.eps : choose_scale(f, opt.p, 16, r).eps;
    if (!is_strongly_bounded(sigma, c.eps)) throw PreconditionError("run_pipeline: sigma is not strongly eps-bounded");
    for (const auto& s : periodic_sources(f))
        if (distance_to_curve(f, sigma, s.x) < opt.source_radius)
            throw PreconditionError("run_pipeline: sigma passes within " + std::to_string(opt.source_radius) + " of a period-" +
                                    std::to_string(s.period) + " source");
    c.tau = std::log(10.0) / opt.p;

    const std::size_t K = static_cast<std::size_t>(opt.samples);
    const long nA = static_cast<long>(opt.depth) * opt.p;
    std::vector<double> params(K), weight(K), stretch(K);
    for (std::size_t i = 0; i < K; ++i) {
        params[i] = -1 + (2.0 * static_cast<double>(i) + 1) / static_cast<double>(K);
        weight[i] = norm(sigma.derivative(params[i]));
    }
    parallel_for(K, [&](std::size_t i) {
        Vec2 y = f.normalize(sigma.eval(params[i]));
        Vec2 v = sigma.derivative(params[i]);
        v = v * (1 / norm(v));
        double acc = 0;
        try {
            for (long k = 0; k < nA; ++k) {
                v = f.differential(y) * v;
                double s = norm(v);
                acc += std::log(s);
                v = v * (1 / s);
                y = f.forward(y);
            }
            stretch[i] = acc / static_cast<double>(nA);
        } catch (const EscapeError&) {
            stretch[i] = -std::numeric_limits<double>::infinity();
        }
    });
    c.samples = K;
    c.exponents = Histogram::of(stretch, 0.05);
    std::vector<char> inA(K);
    for (std::size_t i = 0; i < K; ++i) {
        inA[i] = stretch[i] > opt.b;
        c.in_A += static_cast<std::size_t>(inA[i]);
    }
    if (c.in_A == 0) {
        c.verdict = Verdict::InsufficientData;
        c.reason = "no sample stretches beyond e^{nb}";
        return c;
    }

    std::vector<IntegerSet> family(K, IntegerSet({}, nA));
    parallel_for(K, [&](std::size_t i) {
        if (inA[i]) family[i] = follow_branch(f, opt.p, sigma, c.eps, params[i], opt.depth).E;
    });
    double W = std::accumulate(weight.begin(), weight.end(), 0.0);
    std::vector<double> wn(K);
    for (std::size_t i = 0; i < K; ++i) wn[i] = weight[i] / W;
    double beta = opt.beta > 0 ? opt.beta : 1.0 / (4 * opt.p);
    FolnerPlan plan = borel_cantelli_select(family, wn, beta, SelectOptions{8, opt.plan_tolerance, 2.0});
    c.plan_entries = plan.entries.size();
    if (plan.empty()) {
        c.verdict = Verdict::InsufficientData;
        c.reason = "Folner plan: " + plan.verdict;
        return c;
    }

    const StepFn<ProjectivePoint> pstep = [&f](const ProjectivePoint& p) { return project_step(f, p).next; };
    auto measure_for = [&](const PlanEntry& e) {
        WeightedPointMeasure<ProjectivePoint> mu;
        for (auto i : e.selected) mu.atoms.push_back({ProjectivePoint::make(f.normalize(sigma.eval(params[i])), sigma.derivative(params[i])), weight[i]});
        mu.normalize();
        return mu;
    };
    const PlanEntry& last = plan.entries.back();
    auto mu_n = measure_for(last);
    SrbCandidate cand = candidate_from_measure(f, empirical_measure(mu_n, last.F, pstep), opt.horizon, opt.resolution, opt.max_word, opt.seed);
    cand.b_threshold = c.b_threshold;
    cand.r_estimate = c.r_estimate;
    cand.eps = c.eps;
    cand.tau = c.tau;
    cand.samples = c.samples;
    cand.in_A = c.in_A;
    cand.exponents = c.exponents;
    cand.plan_entries = c.plan_entries;
    cand.selected = last.selected.size();
    cand.n = last.n;
    cand.F = last.F;
    cand.largeness_margin = cand.chi1 - cand.tau;

    if (plan.entries.size() >= 2) {
        const PlanEntry& prev = plan.entries[plan.entries.size() - 2];
        auto prev_proj = project(f, empirical_measure(mu_n, last.F.truncate(prev.n), pstep));
        cand.stability = grid_wasserstein(f, cand.projected, prev_proj);
    } else {
        cand.stability = std::numeric_limits<double>::infinity();
    }

    // Gibbs slack at a partition finer than eps gives delta_q.
    int Rg = static_cast<int>(std::ceil(std::hypot(f.box_hi().x - f.box_lo().x, f.box_hi().y - f.box_lo().y) / c.eps)) + 1;
    auto Pg = BoxPartition::grid(f, Rg, opt.seed);
    PsiObservable psi{&f, opt.q, r, 0};
    GibbsInput gin{&f, &sigma, params, last.selected, last.F, 0, c.eps};
    auto gib = gibbs_diagnostic(gin, Pg, [&](const ProjectivePoint& p) { return psi(p); });
    double worst = 0;
    for (const auto& s : gib.samples) worst = std::max(worst, s.slack);
    cand.delta_q = worst / static_cast<double>(last.F.size());
    double mean_psi = 0;
    {
        std::vector<double> pv(cand.measure.atoms.size());
        parallel_for(pv.size(), [&](std::size_t i) { pv[i] = psi(cand.measure.atoms[i].state); });
        for (std::size_t i = 0; i < pv.size(); ++i) mean_psi += cand.measure.atoms[i].weight * pv[i];
    }
    cand.psi_margin = cand.entropy - (mean_psi + cand.delta_q);

    WeightedPointMeasure<Vec2> base;
    for (const auto& a : mu_n.atoms) base.atoms.push_back({a.state.base, a.weight});
    const StepFn<Vec2> vstep = [&f](const Vec2& y) { return f.forward(y); };
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    std::function<double(const Vec2&)> cx = [&](const Vec2& y) { return (f.normalize(y).x - lo.x) / (hi.x - lo.x); };
    std::function<double(const Vec2&)> cy = [&](const Vec2& y) { return (f.normalize(y).y - lo.y) / (hi.y - lo.y); };
    cand.defects.push_back(invariance_defect(base, last.F, cx, 1.0, vstep));
    cand.defects.push_back(invariance_defect(base, last.F, cy, 1.0, vstep));

    if (plan.entries.size() < 2) {
        cand.verdict = Verdict::InsufficientData;
        cand.reason = "fewer than two plan checkpoints";
        return cand;
    }
    double rel = std::abs(cand.entropy - cand.chi1) / std::max(cand.chi1, 0.01);
    bool ok = rel <= opt.tolerance && cand.chi1 > opt.b && cand.stability < opt.stability_cap;
    cand.verdict = ok ? Verdict::SrbConsistent : Verdict::Inconsistent;
    cand.reason = "relative entropy gap " + std::to_string(rel);
    return cand;
}

RuelleReport ruelle_check(const SrbCandidate& c, double tolerance) {
    if (!std::isfinite(c.chi1)) throw PreconditionError("ruelle_check: chi1 is not computed");
    RuelleReport r;
    r.tolerance = tolerance;
    r.margin = c.chi1 - c.entropy;
    r.backward_margin = -c.chi2 - c.entropy;
    r.ok = r.margin >= -tolerance && r.backward_margin >= -tolerance;
    return r;
}

ExponentPartition exponent_partition(const SurfaceMap& f, int grid, long n, double b, double bin_width) {
    if (grid < 1 || n < 1) throw DomainError("exponent_partition: grid and n must be positive");
    ExponentPartition out;
    const std::size_t G = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    out.chi.assign(G, std::numeric_limits<double>::quiet_NaN());
    parallel_for(G, [&](std::size_t i) {
        try {
            out.chi[i] = lyapunov_max(f, grid_point(f, grid, i), n);
        } catch (const EscapeError&) {
        }
    });
    out.hist = Histogram::of(out.chi, bin_width);
    std::size_t finite = 0, above = 0;
    for (double v : out.chi) {
        if (std::isnan(v)) {
            ++out.escaped;
            continue;
        }
        ++finite;
        above += static_cast<std::size_t>(v > b);
    }
    if (finite) out.mass_above_b = static_cast<double>(above) / static_cast<double>(finite);
    const auto& h = out.hist.counts;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(out.hist.center(i) > b)) continue;
        bool peak = (i == 0 || h[i] >= h[i - 1]) && (i + 1 == h.size() || h[i] >= h[i + 1]);
        if (peak && h[i] > 0 && static_cast<double>(h[i]) >= 0.05 * static_cast<double>(above)) out.modes.push_back(out.hist.center(i));
    }
    std::size_t outside = 0;
    for (double v : out.chi) {
        if (!(v > b)) continue;
        bool near = false;
        for (double m : out.modes) near = near || std::abs(v - m) <= bin_width;
        outside += static_cast<std::size_t>(!near);
    }
    if (above) out.outside_modes = static_cast<double>(outside) / static_cast<double>(above);
    return out;
}

BasinRaster basin_raster(const SurfaceMap& f, const std::vector<SrbCandidate>& candidates, int grid, long n, double b,
                         double threshold, int levels) {
    if (candidates.empty()) throw PreconditionError("basin_raster: at least one candidate is required");
    if (grid < 1 || n < 1) throw DomainError("basin_raster: grid and n must be positive");
    std::vector<QuadMass> cm;
    for (const auto& c : candidates) cm.push_back(quad_mass(f, c.projected, levels));
    BasinRaster out;
    out.grid = grid;
    const std::size_t G = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    out.label.assign(G, -1);
    out.distance.assign(G, std::numeric_limits<double>::infinity());
    out.chi.assign(G, std::numeric_limits<double>::quiet_NaN());
    parallel_for(G, [&](std::size_t i) {
        Vec2 x = grid_point(f, grid, i);
        try {
            WeightedPointMeasure<Vec2> orbit;
            Vec2 y = x;
            for (long k = 0; k < n; ++k) {
                orbit.atoms.push_back({y, 1.0});
                y = f.forward(y);
            }
            out.chi[i] = lyapunov_max(f, x, n);
            auto om = quad_mass(f, orbit, levels);
            for (std::size_t j = 0; j < cm.size(); ++j) {
                double d = quad_distance(f, om, cm[j]);
                if (d < out.distance[i]) {
                    out.distance[i] = d;
                    out.label[i] = static_cast<int>(j);
                }
            }
            if (out.distance[i] > threshold) out.label[i] = -1;
        } catch (const EscapeError&) {
        }
    });
    std::size_t hit = 0;
    for (std::size_t i = 0; i < G; ++i)
        if (out.chi[i] > b) {
            ++out.above_b;
            hit += static_cast<std::size_t>(out.label[i] >= 0);
        }
    if (out.above_b) out.classified_fraction = static_cast<double>(hit) / static_cast<double>(out.above_b);
    return out;
}

Vec2 raster_point(const SurfaceMap& f, int grid, std::size_t i) {
    if (grid < 1) throw DomainError("raster_point: grid must be positive");
    return grid_point(f, grid, i);
}

}  // namespace srblab
