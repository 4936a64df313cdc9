#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srblab/cocycle.hpp"
#include "srblab/curves.hpp"
#include "srblab/density.hpp"
#include "srblab/maps.hpp"

namespace srblab {

enum class Verdict { SrbConsistent, Inconsistent, InsufficientData };
std::string to_string(Verdict v);

struct Histogram {
    double lo = 0;
    double width = 0;
    std::vector<std::size_t> counts;

    static Histogram of(const std::vector<double>& values, double width);
    double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width; }
    std::size_t total() const;
};

// psi^q = phi - omega_q / (r - 1) on the projective bundle.
struct PsiObservable {
    const SurfaceMap* f = nullptr;
    int q = 1;
    int r = CurveJet::kDefaultOrder;
    double delta_q = 0;

    double operator()(const ProjectivePoint& p) const;
};

// H(P^(m+1)) - H(P^m) for the grid partition at `resolution`, with m the largest depth up to
// max_depth whose P^(m+1) word count stays below atoms / kAtomsPerWord.
inline constexpr double kAtomsPerWord = 20;
struct EntropyEstimate {
    int resolution = 0;
    int m = 0;
    double h = 0;
    std::size_t words = 0;
};
EntropyEstimate entropy_estimate(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& mu, int resolution, int max_depth,
                                 std::uint64_t seed);
// H(P^1), ..., H(P^depth) for the same partition, from one sort of the itineraries.
std::vector<double> block_entropies(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& mu, const BoxPartition& P, int depth);

// W1 for the quadtree metric on the domain box down to 2^levels cells per side. Edges from a
// level-l cell to its parent have length half the parent's diagonal.
double grid_wasserstein(const SurfaceMap& f, const WeightedPointMeasure<Vec2>& a, const WeightedPointMeasure<Vec2>& b,
                        int levels = 4);

struct PeriodicPoint {
    Vec2 x;
    int period = 1;
};
// Periodic sources of period <= max_period from Newton's method on f^k(x) - x started at a grid.
std::vector<PeriodicPoint> periodic_sources(const SurfaceMap& f, int max_period = 6, int grid = 24);
double distance_to_curve(const SurfaceMap& f, const CurveJet& sigma, Vec2 x);

// Seed families: "h:OFFSET", "v:OFFSET", "d:OFFSET" with OFFSET a box fraction (default 0.5).
// The segment has speed eps, so it is strongly eps-bounded.
CurveJet seed_curve(const SurfaceMap& f, const std::string& spec, double eps);

struct PipelineOptions {
    double b = 0.5;
    int p = 4;
    int depth = 7;
    int q = 1;
    long horizon = 1000;
    int samples = 4000;
    double eps = 0;   // 0 selects choose_scale
    double beta = 0;  // 0 selects 1/(4p)
    double plan_tolerance = 0.25;
    int resolution = 2;
    int max_word = 8;
    double tolerance = 0.15;
    double stability_cap = 0.05;
    double source_radius = 1e-6;
    std::uint64_t seed = 1;
};

struct SrbCandidate {
    WeightedPointMeasure<ProjectivePoint> measure;
    WeightedPointMeasure<Vec2> projected;
    double chi1 = 0, chi2 = 0;
    double entropy = 0;
    std::vector<EntropyEstimate> entropy_by_resolution;
    double b_threshold = 0;
    Verdict verdict = Verdict::InsufficientData;
    std::string reason;
    double stability = 0;
    double delta_q = 0;
    double eps = 0, tau = 0, r_estimate = 0;
    std::int64_t n = 0;
    IntegerSet F;
    std::size_t samples = 0, in_A = 0, selected = 0, plan_entries = 0;
    // chi1 - tau_p
    double largeness_margin = 0;
    // entropy - (mean psi^q + delta_q)
    double psi_margin = 0;
    std::vector<DefectReport> defects;  // x and y coordinates
    Histogram exponents;                // finite-horizon stretch rates of the samples
};

SrbCandidate run_pipeline(const SurfaceMap& f, const CurveJet& sigma, const PipelineOptions& opt);

// chi1, chi2 and entropies of a given projective measure; verdict fields are left unset.
SrbCandidate candidate_from_measure(const SurfaceMap& f, WeightedPointMeasure<ProjectivePoint> mu, long horizon, int resolution,
                                    int max_word, std::uint64_t seed);

struct RuelleReport {
    double margin = 0;           // chi1 - entropy
    double backward_margin = 0;  // -chi2 - entropy
    double tolerance = 0;
    bool ok = false;
};
RuelleReport ruelle_check(const SrbCandidate& c, double tolerance = 0.05);

struct ExponentPartition {
    std::vector<double> chi;  // one per grid point, NaN when the orbit escapes
    Histogram hist;
    std::vector<double> modes;  // Lambda estimate
    double mass_above_b = 0;
    double outside_modes = 0;  // fraction of {chi > b} farther than one bin from every mode
    std::size_t escaped = 0;
};
// Modes are bins above b holding at least 5% of the {chi > b} mass and no less than either neighbour.
ExponentPartition exponent_partition(const SurfaceMap& f, int grid, long n, double b, double bin_width = 0.01);

struct BasinRaster {
    int grid = 0;
    std::vector<int> label;  // candidate index or -1
    std::vector<double> distance;
    std::vector<double> chi;
    double classified_fraction = 0;  // over grid points with chi > b
    std::size_t above_b = 0;
};
// Grid point i (row-major) used by exponent_partition and basin_raster.
Vec2 raster_point(const SurfaceMap& f, int grid, std::size_t i);
BasinRaster basin_raster(const SurfaceMap& f, const std::vector<SrbCandidate>& candidates, int grid, long n, double b,
                         double threshold = 0.1, int levels = 4);

}  // namespace srblab
