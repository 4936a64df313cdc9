#pragma once

#include <vector>

#include "srblab/curves.hpp"
#include "srblab/density.hpp"
#include "srblab/maps.hpp"

namespace srblab {

struct CocycleValue {
    double phi = 0;  // log |d_x f(v)|
    double w = 0;    // log |d_x f| - phi
};

struct ProjectiveStep {
    ProjectivePoint next;
    CocycleValue value;
};

ProjectiveStep project_step(const SurfaceMap& f, const ProjectivePoint& p);
// Sum of phi along n projective steps.
double phi_sum(const SurfaceMap& f, ProjectivePoint p, long n);

// (1/n) log |d_x f^n| with the product renormalized every 32 steps. Escape raises
// EscapeError whose `partial` holds the estimate over the completed steps.
double lyapunov_max(const SurfaceMap& f, Vec2 x, long n);

struct LyapunovPair {
    double chi1 = 0, chi2 = 0;
};
// chi2 = ((1/n) sum log |det d f| ) - chi1.
LyapunovPair lyapunov_pair(const SurfaceMap& f, Vec2 x, long n);

struct REstimate {
    double value = 0;   // grid x grid
    double coarse = 0;  // (grid / 2) x (grid / 2)
    int grid = 0;
    long n = 0;
    int escaped = 0;
};
// (1/n) log+ of the largest |d_x f^n| over cell centres of the domain box.
REstimate R_estimate(const SurfaceMap& f, long n, int grid);

// (1/q) sum_{k<q} (1/q) log |d_{f^k x} f^q| - log |d_x f(v)|.
double omega_q(const SurfaceMap& f, const ProjectivePoint& p, int q);

struct MatrixSupCheck {
    double direction_max = 0;
    double norm_value = 0;
    double gap = 0;
    double tolerance = 0;
};
// Product A_{n-1} ... A_0 against `directions` equally spaced lines.
MatrixSupCheck matrix_cocycle_sup_check(const std::vector<Mat2>& seq, int directions);

struct VolumeGrowth {
    double rate = 0;
    double length = 0;
    std::size_t pieces = 0;
};
// (1/n) log length f^n(B(x, eps, n) ∩ sigma), x = sigma(t_x), by refining sigma's parameter
// interval until each piece is classified inside or outside the dynamical ball.
VolumeGrowth local_volume_growth(const SurfaceMap& f, const CurveJet& sigma, double t_x, double eps, long n);

struct ContractingProfile {
    IntegerSet E;
    DensityReport report;
    std::vector<double> diameters;  // index k = 0..N
    std::vector<double> exponents;
};
// E = {k in [1, N] : diam f^k(U) > eps} with diameters over the sample points.
ContractingProfile contracting_profile(const SurfaceMap& f, const std::vector<Vec2>& U, double eps, long N);

}  // namespace srblab
