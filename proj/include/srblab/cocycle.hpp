#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "srblab/curves.hpp"
#include "srblab/density.hpp"
#include "srblab/errors.hpp"
#include "srblab/maps.hpp"

namespace srblab {

template <class S>
struct WeightedPointMeasure {
    struct Atom {
        S state;
        double weight;
    };
    std::vector<Atom> atoms;

    double total() const {
        double t = 0;
        for (const auto& a : atoms) t += a.weight;
        return t;
    }
    void normalize() {
        double t = total();
        if (!(t > 0)) throw DomainError("WeightedPointMeasure: zero total mass");
        for (auto& a : atoms) a.weight /= t;
    }
    static WeightedPointMeasure dirac(const S& s) { return {{{s, 1.0}}}; }
};

template <class S>
using StepFn = std::function<S(const S&)>;

// phi_n(x) given through `eval`; additive processes also carry the generator phi.
template <class S>
struct SubadditiveProcess {
    std::function<double(const S&, std::int64_t)> eval;
    bool additive = false;
    std::function<double(const S&)> generator;

    static SubadditiveProcess from_generator(std::function<double(const S&)> phi, StepFn<S> step) {
        SubadditiveProcess p;
        p.additive = true;
        p.generator = phi;
        p.eval = [phi, step](const S& x, std::int64_t n) {
            double s = 0;
            S y = x;
            for (std::int64_t k = 0; k < n; ++k) {
                s += phi(y);
                if (k + 1 < n) y = step(y);
            }
            return s;
        };
        return p;
    }
};

// Axis-aligned grid of nx * ny cells over [lo, hi] with grid lines shifted by a seeded
// fraction `jitter` of a cell. Periodic grids wrap indices; otherwise each axis gets one
// extra cell for the shifted remainder and points outside the box are clamped.
class BoxPartition {
public:
    BoxPartition(Vec2 lo, Vec2 hi, int nx, int ny, Vec2 jitter = {0, 0}, bool periodic = false);
    // Finest square grid over the box whose cell diagonal is below eps.
    static BoxPartition with_diameter(Vec2 lo, Vec2 hi, double eps, std::uint64_t seed);
    static BoxPartition grid(const SurfaceMap& f, int resolution, std::uint64_t seed);

    std::int64_t cell(Vec2 p) const;
    std::int64_t cell(const ProjectivePoint& p) const { return cell(p.base); }
    std::int64_t size() const { return static_cast<std::int64_t>(nx_ + extra()) * (ny_ + extra()); }
    double diameter() const;
    int nx() const { return nx_; }
    int ny() const { return ny_; }

private:
    int extra() const { return periodic_ ? 0 : 1; }
    Vec2 lo_, hi_;
    int nx_, ny_;
    Vec2 jitter_;
    bool periodic_;
};

// Partition of a finite state space {0, ..., labels.size()-1} by labels.
struct LabelPartition {
    std::vector<std::int64_t> labels;
    std::int64_t cells = 0;

    static LabelPartition points(int n);
    std::int64_t cell(int s) const { return labels.at(static_cast<std::size_t>(s)); }
    std::int64_t size() const { return cells; }
};

template <class S>
WeightedPointMeasure<S> empirical_measure(const WeightedPointMeasure<S>& mu, const IntegerSet& F, const StepFn<S>& step) {
    if (F.empty()) throw DomainError("empirical_measure: F is empty");
    double tot = mu.total();
    if (!(tot > 0)) throw DomainError("empirical_measure: zero total mass");
    WeightedPointMeasure<S> out;
    out.atoms.reserve(mu.atoms.size() * F.size());
    double nf = static_cast<double>(F.size());
    for (const auto& a : mu.atoms) {
        S y = a.state;
        std::int64_t k = 0;
        for (std::int64_t e : F.elements()) {
            for (; k < e; ++k) y = step(y);
            out.atoms.push_back({y, a.weight / tot / nf});
        }
    }
    return out;
}

struct DefectReport {
    double value = 0;
    double bound = 0;            // sup|phi| #dF / #F
    double corrected_bound = 0;  // sup|phi| 2 K / #F with K connected components
    std::int64_t components = 0;
};

std::int64_t connected_components(const IntegerSet& F);

// |int phi d mu^F - int phi o T d mu^F| as two explicit sums. The corrected bound is asserted.
template <class S>
DefectReport invariance_defect(const WeightedPointMeasure<S>& mu, const IntegerSet& F, const std::function<double(const S&)>& phi,
                               double sup_phi, const StepFn<S>& step) {
    if (F.empty()) throw DomainError("invariance_defect: F is empty");
    double tot = mu.total(), nf = static_cast<double>(F.size());
    double a = 0, b = 0;
    for (const auto& at : mu.atoms) {
        S y = at.state;
        std::int64_t k = 0;
        double sa = 0, sb = 0;
        for (std::int64_t e : F.elements()) {
            for (; k < e; ++k) y = step(y);
            sa += phi(y);
            sb += phi(step(y));
        }
        a += at.weight * sa;
        b += at.weight * sb;
    }
    DefectReport r;
    r.value = std::abs(a - b) / tot / nf;
    r.components = connected_components(F);
    r.bound = sup_phi * static_cast<double>(boundary(F).size()) / nf;
    r.corrected_bound = sup_phi * 2.0 * static_cast<double>(r.components) / nf;
    if (r.value > r.corrected_bound * (1 + 1e-12) + 1e-15)
        throw InvariantError("invariance_defect: defect exceeds sup|phi| 2K/#F");
    return r;
}

// Sum over the E-irreducible decomposition of F^- of phi_{b-a}(T^a x).
template <class S>
double cocycle_over_irreducibles(const S& x, const IntegerSet& F, const IntegerSet& E, const SubadditiveProcess<S>& Phi,
                                 const StepFn<S>& step) {
    auto parts = irreducible_decomposition(F, E);
    double total = 0;
    S y = x;
    std::int64_t k = 0;
    for (const auto& iv : parts) {
        for (; k < iv.a; ++k) y = step(y);
        total += Phi.eval(y, iv.b - iv.a);
    }
    if (Phi.additive && Phi.generator) {
        double brute = 0;
        S z = x;
        k = 0;
        IntegerSet Fm = minus_part(F);
        for (std::int64_t e : Fm.elements()) {
            for (; k < e; ++k) z = step(z);
            brute += Phi.generator(z);
        }
        if (std::abs(brute - total) > 1e-9 * std::max(1.0, std::abs(brute)))
            throw InvariantError("cocycle_over_irreducibles: additive sum differs from the F^- sum");
    }
    return total;
}

struct LargenessReport {
    bool ok = true;
    double margin = 0;
    std::int64_t worst_k = -1, worst_l = -1;
};

template <class S>
LargenessReport largeness_check(const S& x, const IntegerSet& E, const SubadditiveProcess<S>& Phi, double a, const StepFn<S>& step) {
    if (E.size() < 2) throw PreconditionError("largeness_check: E needs at least two elements");
    LargenessReport r;
    r.margin = std::numeric_limits<double>::infinity();
    const auto& e = E.elements();
    S y = x;
    std::int64_t k = 0;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        for (; k < e[i]; ++k) y = step(y);
        double m = Phi.eval(y, e[i + 1] - e[i]) - static_cast<double>(e[i + 1] - e[i]) * a;
        if (m < r.margin) {
            r.margin = m;
            r.worst_k = e[i];
            r.worst_l = e[i + 1];
        }
    }
    r.ok = r.margin >= 0;
    return r;
}

// -sum p log p over a weighted list of keys.
template <class K>
double entropy_of(const std::map<K, double>& w) {
    double tot = 0;
    for (const auto& [k, v] : w) tot += v;
    double h = 0;
    for (const auto& [k, v] : w)
        if (v > 0) h -= (v / tot) * std::log(v / tot);
    return std::max(0.0, h);
}

template <class S, class P>
double static_entropy(const WeightedPointMeasure<S>& mu, const P& part) {
    std::map<std::int64_t, double> w;
    for (const auto& a : mu.atoms) w[part.cell(a.state)] += a.weight;
    return entropy_of(w);
}

// H_mu(P^F) with P^F the join of T^{-k} P over k in F.
template <class S, class P>
double join_entropy(const WeightedPointMeasure<S>& mu, const P& part, const IntegerSet& F, const StepFn<S>& step) {
    std::map<std::vector<std::int64_t>, double> w;
    for (const auto& a : mu.atoms) {
        std::vector<std::int64_t> word;
        word.reserve(F.size());
        S y = a.state;
        std::int64_t k = 0;
        for (std::int64_t e : F.elements()) {
            for (; k < e; ++k) y = step(y);
            word.push_back(part.cell(y));
        }
        w[std::move(word)] += a.weight;
    }
    return entropy_of(w);
}

template <class S, class P>
double iterated_entropy(const WeightedPointMeasure<S>& mu, const P& part, int m, const StepFn<S>& step) {
    return join_entropy(mu, part, IntegerSet::interval(0, m - 1, m), step);
}

struct MisiurewiczReport {
    double lhs = 0, rhs = 0, correction = 0;
    bool verdict = false;
};

// lhs = (1/m) H_{mu^F}(P^m), rhs = H_mu(P^F)/#F - 3 m log#P #dF/#F. A failed verdict raises InvariantError.
template <class S, class P>
MisiurewiczReport misiurewicz_check(const WeightedPointMeasure<S>& mu, const IntegerSet& F, const P& part, int m,
                                    const StepFn<S>& step) {
    if (m < 1) throw DomainError("misiurewicz_check: m must be positive");
    if (F.empty()) throw DomainError("misiurewicz_check: F is empty");
    MisiurewiczReport r;
    double nf = static_cast<double>(F.size());
    r.lhs = iterated_entropy(empirical_measure(mu, F, step), part, m, step) / m;
    r.correction = 3.0 * m * std::log(static_cast<double>(part.size())) * static_cast<double>(boundary(F).size()) / nf;
    r.rhs = join_entropy(mu, part, F, step) / nf - r.correction;
    r.verdict = r.lhs >= r.rhs - 1e-12;
    if (!r.verdict) throw InvariantError("misiurewicz_check: lhs below rhs");
    return r;
}

// Checked inequality for 0-large E: phi_E^F(x)/#F >= int phi_N^+/N d delta_x^F
// - (d_n(F \ E_M) + N d_n(dF) + 4M/N) / d_n(F) sup|phi_1|.
struct CocycleLemmaReport {
    double lhs = 0, rhs = 0;
    bool ok = false;
};

template <class S>
CocycleLemmaReport cocycle_lemma_check(const S& x, const IntegerSet& F, const IntegerSet& E, const SubadditiveProcess<S>& Phi,
                                       std::int64_t n, std::int64_t N, std::int64_t M, double sup_phi1, const StepFn<S>& step) {
    if (!(n >= N && N >= M && M >= 1)) throw DomainError("cocycle_lemma_check: need n >= N >= M >= 1");
    CocycleLemmaReport r;
    double nf = static_cast<double>(F.size());
    r.lhs = cocycle_over_irreducibles(x, F, E, Phi, step) / nf;
    double avg = 0;
    S y = x;
    std::int64_t k = 0;
    for (std::int64_t e : F.elements()) {
        for (; k < e; ++k) y = step(y);
        avg += std::max(0.0, Phi.eval(y, N)) / static_cast<double>(N);
    }
    avg /= nf;
    double dn = static_cast<double>(n);
    double resid = static_cast<double>(F.minus(closure_M(E, M)).size()) / dn;
    double dbd = static_cast<double>(boundary(F).size()) / dn;
    double corr = (resid + static_cast<double>(N) * dbd + 4.0 * M / static_cast<double>(N)) / (nf / dn) * sup_phi1;
    r.rhs = avg - corr;
    r.ok = r.lhs >= r.rhs - 1e-9;
    return r;
}

struct GibbsSample {
    std::size_t index = 0;
    double log_cylinder = 0;
    double psi_sum = 0;
    double slack = 0;
    bool violated = false;
};

struct GibbsReport {
    std::vector<GibbsSample> samples;
    std::size_t violations = 0;
    double partition_diameter = 0;
};

struct GibbsInput {
    const SurfaceMap* f = nullptr;
    const CurveJet* sigma = nullptr;
    std::vector<double> params;  // sample parameters on sigma
    std::vector<std::size_t> A;  // indices into params forming A_n
    IntegerSet F;
    double delta = 0;
    double max_diameter = 0;  // the scale eps'_q
};

// For each x in A: log lambda(P^F(x)) + psi^F(x) - delta #F with lambda the normalized arc length on
// sigma and the cylinder found as the parameter interval around x carrying the same P^F word.
GibbsReport gibbs_diagnostic(const GibbsInput& in, const BoxPartition& P, const std::function<double(const ProjectivePoint&)>& psi);

}  // namespace srblab
