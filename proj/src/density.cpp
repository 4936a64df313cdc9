#include "srblab/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

#include "srblab/errors.hpp"

namespace srblab {

IntegerSet::IntegerSet(std::vector<std::int64_t> elements, std::int64_t horizon)
    : e_(std::move(elements)), horizon_(horizon) {
    if (horizon_ < 1) throw DomainError("IntegerSet: horizon must be positive");
    for (std::size_t i = 0; i < e_.size(); ++i) {
        if (e_[i] < 0) throw DomainError("IntegerSet: negative element");
        if (e_[i] > horizon_) throw DomainError("IntegerSet: element " + std::to_string(e_[i]) + " exceeds horizon");
        if (i > 0 && e_[i] <= e_[i - 1]) throw DomainError("IntegerSet: elements not strictly increasing");
    }
}

IntegerSet IntegerSet::from_unsorted(std::vector<std::int64_t> elements, std::int64_t horizon) {
    std::sort(elements.begin(), elements.end());
    elements.erase(std::unique(elements.begin(), elements.end()), elements.end());
    return IntegerSet(std::move(elements), horizon);
}

IntegerSet IntegerSet::interval(std::int64_t a, std::int64_t b, std::int64_t horizon) {
    std::vector<std::int64_t> v;
    if (b >= a) v.reserve(static_cast<std::size_t>(b - a + 1));
    for (std::int64_t k = a; k <= b; ++k) v.push_back(k);
    return IntegerSet(std::move(v), horizon);
}

bool IntegerSet::contains(std::int64_t k) const { return std::binary_search(e_.begin(), e_.end(), k); }

std::int64_t IntegerSet::count_upto(std::int64_t n) const {
    auto lo = std::lower_bound(e_.begin(), e_.end(), std::int64_t{1});
    auto hi = std::upper_bound(e_.begin(), e_.end(), n);
    return hi > lo ? hi - lo : 0;
}

IntegerSet IntegerSet::truncate(std::int64_t n) const {
    auto lo = std::lower_bound(e_.begin(), e_.end(), std::int64_t{1});
    auto hi = std::upper_bound(e_.begin(), e_.end(), n);
    return IntegerSet(std::vector<std::int64_t>(lo, std::max(lo, hi)), std::max<std::int64_t>(n, 1));
}

IntegerSet IntegerSet::intersect(const IntegerSet& o) const {
    std::vector<std::int64_t> r;
    std::set_intersection(e_.begin(), e_.end(), o.e_.begin(), o.e_.end(), std::back_inserter(r));
    return IntegerSet(std::move(r), std::min(horizon_, o.horizon_));
}

IntegerSet IntegerSet::unite(const IntegerSet& o) const {
    std::vector<std::int64_t> r;
    std::set_union(e_.begin(), e_.end(), o.e_.begin(), o.e_.end(), std::back_inserter(r));
    return IntegerSet(std::move(r), std::max(horizon_, o.horizon_));
}

IntegerSet IntegerSet::minus(const IntegerSet& o) const {
    std::vector<std::int64_t> r;
    std::set_difference(e_.begin(), e_.end(), o.e_.begin(), o.e_.end(), std::back_inserter(r));
    return IntegerSet(std::move(r), horizon_);
}

bool IntegerSet::subset_of(const IntegerSet& o) const {
    return std::includes(o.e_.begin(), o.e_.end(), e_.begin(), e_.end());
}

Rational density_exact(const IntegerSet& E, std::int64_t n) {
    if (n <= 0 || n > E.horizon())
        throw DomainError("density_upto: n=" + std::to_string(n) + " outside [1, " + std::to_string(E.horizon()) + "]");
    return {E.count_upto(n), n};
}

double density_upto(const IntegerSet& E, std::int64_t n) { return density_exact(E, n).value(); }

DensityReport density_report(const IntegerSet& E, const std::vector<std::int64_t>& ns) {
    DensityReport r;
    r.upper = 0;
    r.lower = ns.empty() ? 0 : 1;
    for (auto n : ns) {
        double d = density_upto(E, n);
        r.samples.emplace_back(n, d);
        r.upper = std::max(r.upper, d);
        r.lower = std::min(r.lower, d);
    }
    return r;
}

IntegerSet closure_M(const IntegerSet& E, std::int64_t M) {
    const auto& e = E.elements();
    std::vector<std::int64_t> r;
    r.reserve(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (i > 0 && e[i] - e[i - 1] <= M)
            for (std::int64_t k = e[i - 1] + 1; k < e[i]; ++k) r.push_back(k);
        r.push_back(e[i]);
    }
    return IntegerSet(std::move(r), E.horizon());
}

IntegerSet boundary(const IntegerSet& E) {
    const auto& e = E.elements();
    std::vector<std::int64_t> r;
    for (std::size_t i = 0; i < e.size(); ++i) {
        bool left_open = i == 0 || e[i - 1] != e[i] - 1;
        bool right_open = i + 1 == e.size() || e[i + 1] != e[i] + 1;
        if (left_open || right_open) r.push_back(e[i]);
    }
    return IntegerSet(std::move(r), E.horizon());
}

IntegerSet minus_part(const IntegerSet& F) {
    const auto& e = F.elements();
    std::vector<std::int64_t> r;
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
        if (e[i + 1] == e[i] + 1) r.push_back(e[i]);
    return IntegerSet(std::move(r), F.horizon());
}

std::vector<HalfOpen> irreducible_decomposition(const IntegerSet& F, const IntegerSet& E) {
    IntegerSet bF = boundary(F);
    for (auto b : bF.elements())
        if (!E.contains(b))
            throw PreconditionError("irreducible_decomposition: boundary point " + std::to_string(b) + " of F is not in E");
    std::vector<HalfOpen> out;
    const auto& f = F.elements();
    const auto& e = E.elements();
    std::size_t i = 0;
    while (i < f.size()) {
        std::size_t j = i;
        while (j + 1 < f.size() && f[j + 1] == f[j] + 1) ++j;
        std::int64_t s = f[i], t = f[j];
        if (t > s) {
            auto it = std::lower_bound(e.begin(), e.end(), s);
            std::int64_t prev = *it;
            for (++it; it != e.end() && *it <= t; ++it) {
                out.push_back({prev, *it});
                prev = *it;
            }
        }
        i = j + 1;
    }
    return out;
}

std::int64_t default_M0(double observed_upper) {
    if (!(observed_upper > 0)) throw PreconditionError("folner_fill: observed upper density is not positive");
    return static_cast<std::int64_t>(std::floor(2.0 / observed_upper)) + 1;
}

namespace {

IntegerSet slice(const IntegerSet& E, std::int64_t a, std::int64_t b) {
    const auto& e = E.elements();
    auto lo = std::lower_bound(e.begin(), e.end(), a);
    auto hi = std::upper_bound(e.begin(), e.end(), b);
    return IntegerSet(std::vector<std::int64_t>(lo, hi), E.horizon());
}

std::vector<std::int64_t> build_ladder(const IntegerSet& Epos, double rho) {
    const auto& e = Epos.elements();
    std::vector<std::int64_t> ladder{e.front()};
    while (ladder.back() < e.back()) {
        std::int64_t prev = ladder.back();
        auto target = static_cast<std::int64_t>(std::ceil(rho * static_cast<double>(prev)));
        target = std::max(target, prev + 1);
        auto it = std::upper_bound(e.begin(), e.end(), target);
        std::int64_t snapped = *(it - 1);
        if (snapped <= prev) snapped = *std::upper_bound(e.begin(), e.end(), prev);
        ladder.push_back(snapped);
    }
    return ladder;
}

}  // namespace

FolnerFill folner_fill(const IntegerSet& E, std::int64_t M0, int checkpoints, const FillOptions& opt) {
    if (checkpoints < 1) throw DomainError("folner_fill: checkpoints must be positive");
    if (!(opt.rho > 1)) throw DomainError("folner_fill: ladder ratio must exceed 1");
    IntegerSet Epos = E.truncate(E.horizon());
    if (Epos.empty()) throw PreconditionError("folner_fill: E has zero density at the horizon; construction refused");

    FolnerFill out;
    out.ladder = build_ladder(Epos, opt.rho);
    std::size_t K = out.ladder.size();
    std::size_t first = K > static_cast<std::size_t>(checkpoints) ? K - checkpoints : 0;
    std::vector<std::int64_t> window(out.ladder.begin() + static_cast<std::ptrdiff_t>(first), out.ladder.end());
    out.report = density_report(E, window);
    out.observed_upper = out.report.upper;
    if (!(out.observed_upper > 0)) throw PreconditionError("folner_fill: observed upper density is not positive");
    if (M0 == 0) M0 = default_M0(out.observed_upper);
    if (!(static_cast<double>(M0) > 2.0 / out.observed_upper))
        throw PreconditionError("folner_fill: M0=" + std::to_string(M0) + " must exceed 2/d=" +
                                std::to_string(2.0 / out.observed_upper));

    for (auto& [n, d] : out.report.samples)
        if (d >= out.observed_upper - opt.tolerance / 2) out.subsequence.push_back(n);

    std::vector<std::int64_t> f{out.ladder.front()};
    for (std::size_t k = 1; k < K; ++k) {
        IntegerSet piece = closure_M(slice(Epos, out.ladder[k - 1], out.ladder[k]), M0 * static_cast<std::int64_t>(k));
        for (auto v : piece.elements())
            if (v > f.back()) f.push_back(v);
    }
    out.F = IntegerSet(std::move(f), E.horizon());

    IntegerSet bF = boundary(out.F);
    if (!bF.subset_of(E)) throw InvariantError("folner_fill: boundary of F escaped E");

    double last = std::numeric_limits<double>::infinity();
    for (auto n : window) {
        IntegerSet Fn = out.F.truncate(n);
        FillCheckpoint c{n, density_upto(Fn, n), density_upto(Fn.intersect(Epos.truncate(n)), n),
                         static_cast<double>(boundary(Fn).size()) / static_cast<double>(n)};
        if (c.d_boundary > last + 1e-15) out.boundary_nonincreasing = false;
        last = c.d_boundary;
        out.checkpoints.push_back(c);
    }

    std::int64_t N = out.ladder.back();
    std::int64_t topM = 2 * M0 * static_cast<std::int64_t>(K);
    for (std::int64_t M = 1; M <= topM; M *= 2) {
        IntegerSet rest = out.F.minus(closure_M(Epos, M));
        out.residual_by_M.emplace_back(M, static_cast<double>(rest.count_upto(N)) / static_cast<double>(N));
    }
    return out;
}

double log_binomial_mass(std::int64_t n, std::int64_t K) {
    K = std::min(K, n);
    double ln1 = std::lgamma(static_cast<double>(n) + 1);
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(K + 1));
    for (std::int64_t k = 0; k <= K; ++k)
        terms.push_back(ln1 - std::lgamma(static_cast<double>(k) + 1) - std::lgamma(static_cast<double>(n - k) + 1));
    double m = *std::max_element(terms.begin(), terms.end());
    double s = 0;
    for (double t : terms) s += std::exp(t - m);
    return std::log(2.0) + m + std::log(s);
}

const PlanEntry* FolnerPlan::find(std::int64_t n) const {
    for (const auto& e : entries)
        if (e.n == n) return &e;
    return nullptr;
}

FolnerPlan borel_cantelli_select(const std::vector<IntegerSet>& family, const std::vector<double>& weights,
                                 double beta, const SelectOptions& opt) {
    if (family.size() != weights.size()) throw DomainError("borel_cantelli_select: family and weights differ in size");
    double total = 0;
    for (double w : weights) {
        if (!(w >= 0)) throw DomainError("borel_cantelli_select: negative weight");
        total += w;
    }
    if (std::abs(total - 1) > 1e-9) throw DomainError("borel_cantelli_select: weights must sum to 1");

    FolnerPlan plan;
    std::vector<int> eligible(family.size(), 0);
    std::vector<FolnerFill> fills(family.size());
    FillOptions fo{opt.rho, opt.tolerance};
    for (std::size_t i = 0; i < family.size(); ++i) {
        IntegerSet pos = family[i].truncate(family[i].horizon());
        if (pos.empty() || weights[i] == 0) continue;
        try {
            FolnerFill ff = folner_fill(family[i], 0, opt.checkpoints, fo);
            if (ff.observed_upper > beta) {
                fills[i] = std::move(ff);
                eligible[i] = 1;
            }
        } catch (const PreconditionError&) {
        }
    }
    if (std::none_of(eligible.begin(), eligible.end(), [](int v) { return v; })) {
        plan.verdict = "empty: no sample exceeds beta";
        return plan;
    }

    std::map<std::int64_t, std::vector<std::size_t>> by_n;
    for (std::size_t i = 0; i < family.size(); ++i)
        if (eligible[i])
            for (auto n : fills[i].subsequence) by_n[n].push_back(i);

    for (auto& [n, members] : by_n) {
        double cw = 0;
        for (auto i : members) cw += weights[i];
        double dn = static_cast<double>(n);
        if (cw < 1.0 / (dn * dn)) continue;
        plan.admissible.push_back(n);

        std::map<IntegerSet, std::vector<std::size_t>> classes;
        std::int64_t K = 0;
        for (auto i : members) {
            IntegerSet Fn = fills[i].F.truncate(n);
            K = std::max<std::int64_t>(K, static_cast<std::int64_t>(boundary(Fn).size()));
            classes[Fn].push_back(i);
        }
        const IntegerSet* best = nullptr;
        double bw = -1;
        for (auto& [F, xs] : classes) {
            double w = 0;
            for (auto i : xs) w += weights[i];
            if (w > bw) {
                bw = w;
                best = &F;
            }
        }
        PlanEntry e;
        e.n = n;
        e.F = *best;
        e.selected = classes[*best];
        e.weight = bw;
        e.candidate_weight = cw;
        e.classes = static_cast<int>(classes.size());
        e.alpha = static_cast<double>(K) / dn;
        e.delta = log_binomial_mass(n, K) / dn;
        e.min_density = 1;
        IntegerSet bF = boundary(e.F);
        for (auto i : e.selected) {
            if (!bF.subset_of(family[i]))
                throw InvariantError("borel_cantelli_select: boundary of F_n not contained in E(x)");
            e.min_density = std::min(e.min_density, density_upto(family[i].truncate(n).intersect(e.F), n));
        }
        if (std::log(e.weight) < -dn * e.delta - 2 * std::log(dn) - 1e-12)
            throw InvariantError("borel_cantelli_select: selected weight below e^{-n delta}/n^2 at n=" + std::to_string(n));
        plan.entries.push_back(std::move(e));
    }
    plan.verdict = plan.entries.empty() ? "empty: no admissible horizon" : "nonempty";
    return plan;
}

IntegerSet parse_set_spec(const std::string& spec, std::int64_t horizon) {
    if (horizon < 1) throw DomainError("set spec: horizon must be positive");
    std::vector<std::int64_t> v;
    if (spec == "evens" || spec == "odds" || spec == "all") {
        for (std::int64_t k = 1; k <= horizon; ++k)
            if (spec == "all" || (k % 2 == 0) == (spec == "evens")) v.push_back(k);
        return IntegerSet(std::move(v), horizon);
    }
    static const std::regex blocks(R"(blocks:(\d+)\^k\.\.(\d+)\*(\d+)\^k)");
    std::smatch m;
    if (std::regex_match(spec, m, blocks)) {
        std::int64_t B = std::stoll(m[1]), C = std::stoll(m[2]), B2 = std::stoll(m[3]);
        if (B < 2 || B != B2 || C < 1) throw DomainError("set spec: malformed block family " + spec);
        for (std::int64_t p = 1; p <= horizon; p *= B)
            for (std::int64_t k = std::max(p, v.empty() ? 0 : v.back() + 1); k <= std::min(C * p, horizon); ++k)
                v.push_back(k);
        return IntegerSet(std::move(v), horizon);
    }
    if (spec.rfind("file:", 0) == 0) {
        std::ifstream in(spec.substr(5));
        if (!in) throw DomainError("set spec: cannot open " + spec.substr(5));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::int64_t k = std::stoll(line);
            if (k >= 1 && k <= horizon) v.push_back(k);
        }
        return IntegerSet::from_unsorted(std::move(v), horizon);
    }
    throw DomainError("set spec: unrecognized '" + spec + "'");
}

}  // namespace srblab
