#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace srblab {

// Finite sorted set of nonnegative integers, all at most `horizon`.
class IntegerSet {
public:
    IntegerSet() = default;
    // Elements must be strictly increasing, >= 0 and <= horizon.
    IntegerSet(std::vector<std::int64_t> elements, std::int64_t horizon);
    static IntegerSet from_unsorted(std::vector<std::int64_t> elements, std::int64_t horizon);
    static IntegerSet interval(std::int64_t a, std::int64_t b, std::int64_t horizon);

    const std::vector<std::int64_t>& elements() const { return e_; }
    std::int64_t horizon() const { return horizon_; }
    std::size_t size() const { return e_.size(); }
    bool empty() const { return e_.empty(); }
    std::int64_t min() const { return e_.front(); }
    std::int64_t max() const { return e_.back(); }
    bool contains(std::int64_t k) const;
    // Number of elements in [1, n].
    std::int64_t count_upto(std::int64_t n) const;
    // Elements in [1, n] as a set with horizon n.
    IntegerSet truncate(std::int64_t n) const;

    IntegerSet intersect(const IntegerSet& o) const;
    IntegerSet unite(const IntegerSet& o) const;
    IntegerSet minus(const IntegerSet& o) const;
    bool subset_of(const IntegerSet& o) const;

    bool operator==(const IntegerSet& o) const { return e_ == o.e_; }
    bool operator<(const IntegerSet& o) const { return e_ < o.e_; }

private:
    std::vector<std::int64_t> e_;
    std::int64_t horizon_ = 1;
};

struct DensityReport {
    double upper = 0, lower = 0;
    std::vector<std::pair<std::int64_t, double>> samples;
};

struct Rational {
    std::int64_t num = 0, den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Rational density_exact(const IntegerSet& E, std::int64_t n);
double density_upto(const IntegerSet& E, std::int64_t n);
// Max and min of d_n over the given horizons.
DensityReport density_report(const IntegerSet& E, const std::vector<std::int64_t>& ns);

IntegerSet closure_M(const IntegerSet& E, std::int64_t M);
IntegerSet boundary(const IntegerSet& E);
// F^- = {n in F : n + 1 in F}.
IntegerSet minus_part(const IntegerSet& F);

// Half-open integer interval [a, b).
struct HalfOpen {
    std::int64_t a, b;
    bool operator==(const HalfOpen&) const = default;
};

std::vector<HalfOpen> irreducible_decomposition(const IntegerSet& F, const IntegerSet& E);

struct FillCheckpoint {
    std::int64_t n;
    double d_F, d_EF, d_boundary;
};

struct FolnerFill {
    std::vector<std::int64_t> ladder;
    std::vector<std::int64_t> subsequence;
    IntegerSet F;
    DensityReport report;
    std::vector<FillCheckpoint> checkpoints;
    double observed_upper = 0;
    bool boundary_nonincreasing = true;
    // d_n(F \ E_M) at the final checkpoint for M = 1, 2, 4, ...
    std::vector<std::pair<std::int64_t, double>> residual_by_M;
};

struct FillOptions {
    double rho = 2.0;
    double tolerance = 0.05;
};

// M0 = 0 selects default_M0 of the observed upper density.
FolnerFill folner_fill(const IntegerSet& E, std::int64_t M0, int checkpoints, const FillOptions& opt = {});

// Smallest admissible M0 for folner_fill given an observed upper density.
std::int64_t default_M0(double observed_upper);

struct PlanEntry {
    std::int64_t n;
    IntegerSet F;
    std::vector<std::size_t> selected;
    double weight = 0;
    double candidate_weight = 0;
    double alpha = 0;
    double delta = 0;
    double min_density = 0;
    int classes = 0;
};

struct FolnerPlan {
    std::vector<PlanEntry> entries;
    std::vector<std::int64_t> admissible;
    std::string verdict;
    bool empty() const { return entries.empty(); }
    const PlanEntry* find(std::int64_t n) const;
};

struct SelectOptions {
    int checkpoints = 8;
    double tolerance = 0.05;
    double rho = 2.0;
};

FolnerPlan borel_cantelli_select(const std::vector<IntegerSet>& family, const std::vector<double>& weights,
                                 double beta, const SelectOptions& opt = {});

// log(2 * sum_{k<=K} C(n, k)) by log-sum-exp over exact lgamma terms.
double log_binomial_mass(std::int64_t n, std::int64_t K);

// Grammar: "evens", "odds", "all", "blocks:B^k..C*B^k", "file:PATH".
IntegerSet parse_set_spec(const std::string& spec, std::int64_t horizon);

}  // namespace srblab
