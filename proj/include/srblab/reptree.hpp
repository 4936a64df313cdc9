#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "srblab/curves.hpp"
#include "srblab/density.hpp"
#include "srblab/maps.hpp"

namespace srblab {

// Valence constant measured on the calibration suite (linear maps and the standard map up
// to depth 3) and frozen; every build is asserted against it.
inline constexpr double kValenceConstant = 64;
// Per-step constant and B_q of the dynamical-ball cover, frozen the same way.
inline constexpr double kCoverRate = 1;
inline constexpr double kCoverConstant = 16;

// Step-map rate caps below a blue and below a red parent.
inline constexpr double kBlueRateCap = 0.1;
inline constexpr double kRedRateCap = 0.01;

struct ScaleChoice {
    double eps = 0;
    double r_inj = 0;
    int ladder_index = 0;
    int grid = 0;
    // Largest value of |d^s g_{2 eps}^x| / (3 eps |d_x g|) over the samples at the returned eps.
    double jet_ratio = 0;
    // Largest log-derivative jump between eps-close projective points at the returned eps.
    double continuity = 0;
};

// Injectivity radius: 1/2 on the torus, half the smaller box side in the plane.
double injectivity_radius(const SurfaceMap& f);

// Largest eps = (R_inj / 2) 2^-j with the jet bound and the continuity condition at all
// grid x grid sample points for g = f^p. Throws PreconditionError below 1e-6.
ScaleChoice choose_scale(const SurfaceMap& f, int p, int grid = 16, int order = CurveJet::kDefaultOrder);

struct Label {
    int k = 0;
    int kprime = 0;
    auto operator<=>(const Label&) const = default;
};

// (floor log |d_y g|, floor log |d_y g(v)|) with g = f^p.
Label point_label(const SurfaceMap& f, int p, Vec2 y, Vec2 v);
// k^m(x) for x = sigma(t).
std::vector<Label> label_sequence(const SurfaceMap& f, int p, const CurveJet& sigma, double t, int m);

struct RepTreeNode {
    int level = 0;
    bool red = false;
    AffineMap theta;
    std::int64_t parent = -1;
    Label label;
    double rate = 1;     // rate of the step map relative to the parent's theta
    double speed0 = 0;   // |d(g^n o sigma o theta)(0)|
    double speed = 0;    // sup |d(g^n o sigma o theta)|
    std::int64_t first_child = -1;
    int children = 0;

    // theta([-1/3, 1/3]) for red nodes, theta([-1, 1]) for blue ones.
    double core_lo() const { return red ? theta(-1.0 / 3) : theta.lo(); }
    double core_hi() const { return red ? theta(1.0 / 3) : theta.hi(); }
    // Shared endpoints of sibling cores count for both up to rounding.
    bool covers(double t) const { return t >= core_lo() - 1e-14 && t <= core_hi() + 1e-14; }
};

struct TreeOptions {
    std::size_t max_nodes = 2'000'000;
    double valence_constant = kValenceConstant;
    int label_grid = 129;
};

struct ValenceStats {
    double red_ratio = 0;   // max red count / e^max(k', (k - k')/(r - 1))
    double blue_ratio = 0;  // max blue count / e^((k - k')/(r - 1))
    int violations = 0;
};

struct RepTree {
    std::string map_spec;
    int p = 1;
    double eps = 0;
    int order = CurveJet::kDefaultOrder;
    CurveJet sigma;
    int depth = 0;
    std::vector<RepTreeNode> nodes;
    // nodes[level_begin[n] .. level_begin[n + 1]) are the nodes of level n.
    std::vector<std::size_t> level_begin;
    bool truncated = false;
    std::size_t pruned = 0;
    ValenceStats valence;
    int max_split = 1;          // largest third-step cut count used
    double worst_remainder = 0; // largest relative Taylor remainder over the node curves

    std::size_t level_size(int n) const { return level_begin[static_cast<std::size_t>(n) + 1] - level_begin[static_cast<std::size_t>(n)]; }
    std::vector<Label> path(std::size_t node) const;
    // Nodes of level n whose path equals `labels` and whose core contains t.
    std::vector<std::size_t> covering(int n, double t, const std::vector<Label>& labels) const;
};

// g^n o sigma o theta as a curve jet with the relative Taylor remainder.
CurveJet level_curve(const SurfaceMap& f, int steps, const CurveJet& sigma, const AffineMap& theta, double* rel_remainder = nullptr);

RepTree build_tree(const SurfaceMap& f, int p, const CurveJet& sigma, double eps, int depth, const TreeOptions& opt = {});

struct CoverageReport {
    int samples = 0;
    int covered = 0;
    int miss_level = -1;
    double miss_t = 0;
    bool complete() const { return covered == samples; }
};

// Stratified t_i = -1 + (2i + 1)/K checked at every level 1..depth.
CoverageReport check_coverage(const SurfaceMap& f, const RepTree& tree, int samples);

// Leaf counts per label sequence against the product of the per-step valence bounds.
struct LeafBoundReport {
    std::size_t sequences = 0;
    double worst_ratio = 0;
    int violations = 0;
};
LeafBoundReport leaf_bound_check(const RepTree& tree);

struct GeometricSet {
    double t = 0;
    Vec2 x;
    IntegerSet E;  // multiples of p
    int p = 1;
    double alpha = 0, eps = 0, tau = 0;
    double largeness_margin = 0;  // +inf when E has fewer than two elements
    int certified = 0;
};

// alpha_p with the intermediate f-steps absorbed through the largest |d f^j|, j < p.
double geometric_alpha(const SurfaceMap& f, int p);

GeometricSet geometric_set(const SurfaceMap& f, const RepTree& tree, double t);

// A single root-to-leaf path: only the child whose core contains t and whose label
// matches the orbit of sigma(t) is expanded, preferring red children.
struct BranchResult {
    std::vector<RepTreeNode> path;  // path[n] is the node at level n
    IntegerSet E;
    int depth = 0;
    int p = 1;
};
BranchResult follow_branch(const SurfaceMap& f, int p, const CurveJet& sigma, double eps, double t, int depth);

GeometricSet geometric_set_branch(const SurfaceMap& f, const BranchResult& br, const CurveJet& sigma, double eps, double t);

struct LebgeoRow {
    std::int64_t n = 0;
    double fraction = 0;
    int count = 0;
};
struct LebgeoTable {
    std::vector<LebgeoRow> rows;
    double log_slope = 0;  // least squares over rows with positive fraction; 0 if fewer than two
    bool nonincreasing = true;
    int burn_in = 1;
};
// sigma-length fraction of K stratified samples with d_n(E_p(x)) < beta and |d_x f^n(v_x)| >= e^{nb}.
LebgeoTable lebgeo_diagnostic(const SurfaceMap& f, const CurveJet& sigma, int p, double eps, double b, double beta,
                              const std::vector<std::int64_t>& n_list, int samples);

struct BallCover {
    std::vector<AffineMap> pieces;
    std::size_t count = 0;
    double bound = 0;
    double omega = 0;  // omega_q^n(x)
    double cr = 0, bq = 0;
    double contained = 1;  // fraction of ball samples inside the union
};
// Pieces of sigma whose union contains B_sigma(x, eps, n), x = sigma(t_x), each
// strongly (n, eps)-bounded for f.
BallCover cover_dynamical_ball(const SurfaceMap& f, const CurveJet& sigma, double t_x, int q, int n, double eps);

}  // namespace srblab
