#include "srblab/cocycle.hpp"

#include <random>

#include "srblab/dynamics.hpp"

namespace srblab {

BoxPartition::BoxPartition(Vec2 lo, Vec2 hi, int nx, int ny, Vec2 jitter, bool periodic)
    : lo_(lo), hi_(hi), nx_(nx), ny_(ny), jitter_(jitter), periodic_(periodic) {
    if (nx < 1 || ny < 1 || !(hi.x > lo.x) || !(hi.y > lo.y)) throw DomainError("BoxPartition: degenerate grid");
    if (jitter.x < 0 || jitter.x >= 1 || jitter.y < 0 || jitter.y >= 1) throw DomainError("BoxPartition: jitter must lie in [0, 1)");
}

BoxPartition BoxPartition::with_diameter(Vec2 lo, Vec2 hi, double eps, std::uint64_t seed) {
    if (!(eps > 0)) throw DomainError("BoxPartition: eps must be positive");
    double w = std::max(hi.x - lo.x, hi.y - lo.y);
    int n = static_cast<int>(std::floor(std::sqrt(2.0) * w / eps)) + 1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    double jx = u(rng), jy = u(rng);
    return BoxPartition(lo, hi, n, n, {jx, jy});
}

BoxPartition BoxPartition::grid(const SurfaceMap& f, int resolution, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    double jx = u(rng), jy = u(rng);
    return BoxPartition(f.box_lo(), f.box_hi(), resolution, resolution, {jx, jy}, f.domain() == DomainKind::Torus);
}

std::int64_t BoxPartition::cell(Vec2 p) const {
    auto index = [&](double v, double lo, double hi, int n, double j) -> std::int64_t {
        double u = (v - lo) / (hi - lo) * n + j;
        auto i = static_cast<std::int64_t>(std::floor(u));
        if (periodic_) {
            i %= n;
            if (i < 0) i += n;
            return i;
        }
        return std::clamp<std::int64_t>(i, 0, n);
    };
    return index(p.y, lo_.y, hi_.y, ny_, jitter_.y) * (nx_ + extra()) + index(p.x, lo_.x, hi_.x, nx_, jitter_.x);
}

double BoxPartition::diameter() const { return std::hypot((hi_.x - lo_.x) / nx_, (hi_.y - lo_.y) / ny_); }

LabelPartition LabelPartition::points(int n) {
    LabelPartition p;
    for (int i = 0; i < n; ++i) p.labels.push_back(i);
    p.cells = n;
    return p;
}

std::int64_t connected_components(const IntegerSet& F) {
    std::int64_t K = 0;
    const auto& e = F.elements();
    for (std::size_t i = 0; i < e.size(); ++i)
        if (i == 0 || e[i - 1] != e[i] - 1) ++K;
    return K;
}

namespace {

std::vector<std::int64_t> word_at(const SurfaceMap& f, const CurveJet& sigma, double t, const IntegerSet& F, const BoxPartition& P) {
    std::vector<std::int64_t> w;
    w.reserve(F.size());
    Vec2 y = f.normalize(sigma.eval(t));
    std::int64_t k = 0;
    for (std::int64_t e : F.elements()) {
        for (; k < e; ++k) y = f.forward(y);
        w.push_back(P.cell(y));
    }
    return w;
}

// Largest h in [0, 1 + d t] (clipped to the parameter interval) with the same word at t + d h.
double cylinder_reach(const SurfaceMap& f, const CurveJet& sigma, double t, int d, const IntegerSet& F, const BoxPartition& P,
                      const std::vector<std::int64_t>& w0) {
    double limit = d > 0 ? 1 - t : 1 + t;
    if (limit <= 0) return 0;
    double good = 0, bad = -1;
    for (double h = 1e-15; ; h *= 2) {
        if (h >= limit) {
            if (word_at(f, sigma, t + d * limit, F, P) == w0) return limit;
            bad = limit;
            break;
        }
        if (word_at(f, sigma, t + d * h, F, P) != w0) {
            bad = h;
            break;
        }
        good = h;
    }
    for (int it = 0; it < 60 && bad - good > 1e-16; ++it) {
        double mid = 0.5 * (good + bad);
        if (word_at(f, sigma, t + d * mid, F, P) == w0)
            good = mid;
        else
            bad = mid;
    }
    return good;
}

}  // namespace

GibbsReport gibbs_diagnostic(const GibbsInput& in, const BoxPartition& P, const std::function<double(const ProjectivePoint&)>& psi) {
    GibbsReport r;
    r.partition_diameter = P.diameter();
    if (in.max_diameter > 0 && r.partition_diameter >= in.max_diameter)
        throw PreconditionError("gibbs_diagnostic: partition diameter " + std::to_string(r.partition_diameter) +
                                " is not below " + std::to_string(in.max_diameter));
    if (in.A.empty()) return r;
    if (!in.f || !in.sigma) throw DomainError("gibbs_diagnostic: map and curve are required");
    const SurfaceMap& f = *in.f;
    const CurveJet& sigma = *in.sigma;
    double total = sigma.arc_length(-1, 1);
    IntegerSet Fm = minus_part(in.F);
    for (std::size_t idx : in.A) {
        double t = in.params.at(idx);
        auto w0 = word_at(f, sigma, t, in.F, P);
        double hi = cylinder_reach(f, sigma, t, +1, in.F, P, w0), lo = cylinder_reach(f, sigma, t, -1, in.F, P, w0);
        double len = sigma.arc_length(t - lo, t + hi);
        GibbsSample s;
        s.index = idx;
        s.log_cylinder = std::log(std::max(len, 1e-300) / total);
        ProjectivePoint p = ProjectivePoint::make(f.normalize(sigma.eval(t)), sigma.derivative(t));
        std::int64_t k = 0;
        for (std::int64_t e : Fm.elements()) {
            for (; k < e; ++k) p = project_step(f, p).next;
            s.psi_sum += psi(p);
        }
        s.slack = s.log_cylinder + s.psi_sum - in.delta * static_cast<double>(in.F.size());
        s.violated = s.slack > 0;
        if (s.violated) ++r.violations;
        r.samples.push_back(s);
    }
    return r;
}

}  // namespace srblab
