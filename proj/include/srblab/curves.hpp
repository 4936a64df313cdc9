#pragma once

#include <vector>

#include "srblab/maps.hpp"
#include "srblab/poly.hpp"

namespace srblab {

// t -> c + rho t with rho > 0.
struct AffineMap {
    double c = 0, rho = 1;

    double operator()(double t) const { return c + rho * t; }
    double inverse(double t) const { return (t - c) / rho; }
    // this o inner
    AffineMap after(const AffineMap& inner) const { return {c + rho * inner.c, rho * inner.rho}; }
    double lo() const { return c - rho; }
    double hi() const { return c + rho; }
};

// A polynomial on the parameter interval [lo, hi], written in the local variable
// u in [-1, 1] with t = mid + half u.
struct CurvePiece {
    double lo = -1, hi = 1;
    poly::VPoly p;
    double remainder = 0;

    double mid() const { return 0.5 * (lo + hi); }
    double half() const { return 0.5 * (hi - lo); }
    double local(double t) const { return (t - mid()) / half(); }
};

class CurveJet {
public:
    static constexpr int kDefaultOrder = 3;

    CurveJet() = default;
    explicit CurveJet(poly::VPoly p, int order = kDefaultOrder);
    CurveJet(std::vector<CurvePiece> pieces, int order);
    // t -> x + t v
    static CurveJet segment(Vec2 x, Vec2 v, int order = kDefaultOrder);

    int order() const { return r_; }
    const std::vector<CurvePiece>& pieces() const { return pieces_; }
    std::size_t piece_index(double t) const;

    Vec2 eval(double t) const;
    Vec2 derivative(double t, int s = 1) const;
    // Exact sup over [-1, 1] of the s-th derivative norm, from critical points on each piece.
    double sup_derivative(int s) const;
    double inf_speed() const;
    // Sup norms for s = 1..order.
    std::vector<double> derivative_bounds() const;
    double remainder() const;
    double arc_length(double a, double b) const;
    // Throws InvariantError unless the pieces tile [-1, 1] and agree at shared endpoints within tol.
    void validate(double tol = 1e-9) const;

private:
    std::vector<CurvePiece> pieces_;
    int r_ = kDefaultOrder;
};

struct BoundedVerdict {
    bool ok = false;
    double margin = 0;
    double speed = 0;
    double higher = 0;
};

BoundedVerdict is_bounded(const CurveJet& g);
bool is_strongly_bounded(const CurveJet& g, double eps);
double distortion(const CurveJet& g);
double oscillation(const CurveJet& g);

// g o theta restricted to theta([-1, 1]) which must lie in [-1, 1].
CurveJet compose(const CurveJet& g, const AffineMap& theta);
CurveJet rescale(const CurveJet& g, double a);
// Rescale with the boundedness closure assertions; eps <= 0 skips the strong check.
CurveJet rescale_checked(const CurveJet& g, double a, double eps);

struct TechPiece {
    AffineMap iota;
    bool red = false;
};

struct TechResult {
    std::vector<TechPiece> pieces;
    double rate = 0;
    int blue = 0, red = 0;
};

TechResult subdivide_tech(const CurveJet& g, double eps);
// Largest number of pieces whose image meets B(x, eps), over x sampled on the curve.
int tech_overlap(const CurveJet& g, const TechResult& t, double eps, int samples = 65);

// Taylor coefficients at u = 0, to the given order, of f^steps o p. Torus lifts are
// shifted by integers after each step to keep the constant term in [0, 1).
poly::VPoly jet_iterate(const SurfaceMap& f, const poly::VPoly& p, int steps, int order);
// Same, returning the curve after each step k = 1..steps.
std::vector<poly::VPoly> jet_orbit(const SurfaceMap& f, const poly::VPoly& p, int steps, int order);
// max over 8 Chebyshev nodes of |f^steps(p(u)) - q(u)| / |u|^(deg q + 1).
double jet_remainder(const SurfaceMap& f, const poly::VPoly& p, const poly::VPoly& q, int steps);

struct PushOptions {
    double relative_tol = 1e-6;
    int max_depth = 24;
};

CurveJet push(const SurfaceMap& f, const CurveJet& g, const PushOptions& opt = {});

struct GeometricCertificate {
    bool ok = false;
    AffineMap theta;
    double derivative = 0;
    double required = 0;
    double semi_length = 0;
    double distortion_ratio = 0;
    int failed_step = -1;
};

// Widest theta(s) = t_x + rho s, rho found by bisection on a log scale, such that every
// f^k o sigma o theta (k <= n) is strongly eps-bounded and |d(f^n o sigma o theta)(0)| >= 1.5 alpha eps.
GeometricCertificate geometric_time_certificate(const SurfaceMap& f, const CurveJet& sigma, double t_x, int n,
                                                double alpha, double eps);

}  // namespace srblab
