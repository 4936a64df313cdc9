#include "srblab/poly.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace srblab::poly {

double eval(const Poly& p, double t) {
    double r = 0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) r = r * t + *it;
    return r;
}

Poly derivative(const Poly& p) {
    if (p.size() <= 1) return {0.0};
    Poly d(p.size() - 1);
    for (size_t j = 1; j < p.size(); ++j) d[j - 1] = p[j] * static_cast<double>(j);
    return d;
}

Poly add(const Poly& a, const Poly& b) {
    Poly r(std::max(a.size(), b.size()), 0.0);
    for (size_t i = 0; i < a.size(); ++i) r[i] += a[i];
    for (size_t i = 0; i < b.size(); ++i) r[i] += b[i];
    return r;
}

Poly mul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {0.0};
    Poly r(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

Poly scale(const Poly& a, double s) {
    Poly r(a);
    for (auto& x : r) x *= s;
    return r;
}

void trim(Poly& p) {
    while (p.size() > 1 && p.back() == 0.0) p.pop_back();
}

namespace {

double bisect(const Poly& p, double a, double b, double fa, double tol) {
    for (int it = 0; it < 200 && b - a > tol; ++it) {
        double m = 0.5 * (a + b);
        double fm = eval(p, m);
        if (fm == 0) return m;
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

std::vector<double> roots_in(const Poly& p_in, double lo, double hi, double tol) {
    Poly p = p_in;
    trim(p);
    std::vector<double> out;
    int deg = static_cast<int>(p.size()) - 1;
    if (deg <= 0) return out;
    if (deg == 1) {
        double r = -p[0] / p[1];
        if (r >= lo && r <= hi) out.push_back(r);
        return out;
    }
    std::vector<double> pts{lo};
    for (double c : roots_in(derivative(p), lo, hi, tol)) pts.push_back(c);
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double a = pts[i], b = pts[i + 1];
        double fa = eval(p, a), fb = eval(p, b);
        if (fa == 0) {
            out.push_back(a);
            continue;
        }
        if (fb == 0) continue;
        if ((fa < 0) != (fb < 0)) out.push_back(bisect(p, a, b, fa, tol));
    }
    if (eval(p, hi) == 0) out.push_back(hi);
    std::sort(out.begin(), out.end());
    std::vector<double> dedup;
    for (double r : out)
        if (dedup.empty() || r - dedup.back() > tol) dedup.push_back(r);
    return dedup;
}

double max_on(const Poly& p, double lo, double hi) {
    double m = std::max(eval(p, lo), eval(p, hi));
    for (double c : roots_in(derivative(p), lo, hi)) m = std::max(m, eval(p, c));
    return m;
}

double min_on(const Poly& p, double lo, double hi) {
    double m = std::min(eval(p, lo), eval(p, hi));
    for (double c : roots_in(derivative(p), lo, hi)) m = std::min(m, eval(p, c));
    return m;
}

Vec2 VPoly::eval(double t) const {
    Vec2 r;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * t + *it;
    return r;
}

VPoly VPoly::derivative(int s) const {
    VPoly d{c};
    for (int k = 0; k < s; ++k) {
        if (d.c.size() <= 1) {
            d.c.assign(1, Vec2{});
            break;
        }
        std::vector<Vec2> n(d.c.size() - 1);
        for (size_t j = 1; j < d.c.size(); ++j) n[j - 1] = d.c[j] * static_cast<double>(j);
        d.c = std::move(n);
    }
    return d;
}

VPoly VPoly::affine(double alpha, double beta) const {
    // Horner in the polynomial ring: r <- r * (alpha + beta v) + c_j.
    std::vector<Vec2> r{Vec2{}};
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        std::vector<Vec2> n(r.size() + 1, Vec2{});
        for (size_t i = 0; i < r.size(); ++i) {
            n[i] += r[i] * alpha;
            n[i + 1] += r[i] * beta;
        }
        n[0] += *it;
        r = std::move(n);
    }
    r.resize(c.empty() ? 1 : c.size());
    return VPoly{r};
}

Poly VPoly::dot_with(const VPoly& o) const {
    Poly r(c.size() + o.c.size() - 1, 0.0);
    for (size_t i = 0; i < c.size(); ++i)
        for (size_t j = 0; j < o.c.size(); ++j) r[i + j] += srblab::dot(c[i], o.c[j]);
    return r;
}

Poly VPoly::norm2() const { return dot_with(*this); }

double sup_norm(const VPoly& p, int s, double lo, double hi) {
    VPoly d = p.derivative(s);
    if (d.c.size() == 1) return srblab::norm(d.c[0]);
    return std::sqrt(std::max(0.0, max_on(d.norm2(), lo, hi)));
}

double inf_norm(const VPoly& p, int s, double lo, double hi) {
    VPoly d = p.derivative(s);
    if (d.c.size() == 1) return srblab::norm(d.c[0]);
    return std::sqrt(std::max(0.0, min_on(d.norm2(), lo, hi)));
}

double argmax_speed(const VPoly& p, double lo, double hi) {
    Poly q = p.derivative(1).norm2();
    double best = lo, bv = eval(q, lo);
    if (eval(q, hi) > bv) { best = hi; bv = eval(q, hi); }
    for (double c : roots_in(derivative(q), lo, hi)) {
        double v = eval(q, c);
        if (v > bv) { bv = v; best = c; }
    }
    return best;
}

double arc_length(const VPoly& p, double a, double b, int panels) {
    static const std::array<double, 5> x{0.0, 0.5384693101056831, -0.5384693101056831,
                                         0.9061798459386640, -0.9061798459386640};
    static const std::array<double, 5> w{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                         0.2369268850561891, 0.2369268850561891};
    VPoly d = p.derivative(1);
    double h = (b - a) / panels, total = 0;
    for (int k = 0; k < panels; ++k) {
        double m = a + (k + 0.5) * h;
        for (int i = 0; i < 5; ++i) total += w[i] * srblab::norm(d.eval(m + 0.5 * h * x[i])) * 0.5 * h;
    }
    return total;
}

}  // namespace srblab::poly
