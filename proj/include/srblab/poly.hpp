#pragma once

#include <vector>

#include "srblab/linalg.hpp"

namespace srblab::poly {

// Scalar polynomial, coefficients in increasing degree.
using Poly = std::vector<double>;

double eval(const Poly& p, double t);
Poly derivative(const Poly& p);
Poly add(const Poly& a, const Poly& b);
Poly mul(const Poly& a, const Poly& b);
Poly scale(const Poly& a, double s);
void trim(Poly& p);

// Real roots of p in [lo, hi], isolated between critical points and refined
// by bisection to the given tolerance. Identically zero polynomials yield none.
std::vector<double> roots_in(const Poly& p, double lo, double hi, double tol = 1e-13);

// Maximum and minimum of p on [lo, hi] from endpoints and critical points.
double max_on(const Poly& p, double lo, double hi);
double min_on(const Poly& p, double lo, double hi);

// Planar polynomial curve t -> sum c_j t^j.
struct VPoly {
    std::vector<Vec2> c;

    int degree() const { return static_cast<int>(c.size()) - 1; }
    Vec2 eval(double t) const;
    VPoly derivative(int s = 1) const;
    // A polynomial in v equal to p(alpha + beta v).
    VPoly affine(double alpha, double beta) const;
    // |p(t)|^2 as a scalar polynomial.
    Poly norm2() const;
    Poly dot_with(const VPoly& o) const;
};

// sup_{t in [lo,hi]} |p^{(s)}(t)| computed through the critical points of |p^{(s)}|^2.
double sup_norm(const VPoly& p, int s = 0, double lo = -1, double hi = 1);
double inf_norm(const VPoly& p, int s = 0, double lo = -1, double hi = 1);

// Parameter in [lo, hi] where |p'| is maximal.
double argmax_speed(const VPoly& p, double lo = -1, double hi = 1);

// Arc length of p on [a, b] by composite Gauss-Legendre quadrature.
double arc_length(const VPoly& p, double a, double b, int panels = 16);

}  // namespace srblab::poly
