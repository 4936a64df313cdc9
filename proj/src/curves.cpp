#include "srblab/curves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "srblab/errors.hpp"

namespace srblab {

using poly::VPoly;

CurveJet::CurveJet(VPoly p, int order) : r_(order) {
    if (order < 1 || order > Series::kMaxOrder - 1) throw DomainError("CurveJet: unsupported order");
    if (p.c.empty()) p.c.assign(1, Vec2{});
    pieces_.push_back({-1, 1, std::move(p), 0});
}

CurveJet::CurveJet(std::vector<CurvePiece> pieces, int order) : pieces_(std::move(pieces)), r_(order) {
    if (pieces_.empty()) throw DomainError("CurveJet: no pieces");
}

CurveJet CurveJet::segment(Vec2 x, Vec2 v, int order) {
    VPoly p;
    p.c.assign(static_cast<std::size_t>(order) + 1, Vec2{});
    p.c[0] = x;
    p.c[1] = v;
    return CurveJet(std::move(p), order);
}

std::size_t CurveJet::piece_index(double t) const {
    auto it = std::lower_bound(pieces_.begin(), pieces_.end(), t,
                               [](const CurvePiece& pc, double v) { return pc.hi < v; });
    if (it == pieces_.end()) --it;
    return static_cast<std::size_t>(it - pieces_.begin());
}

Vec2 CurveJet::eval(double t) const {
    const auto& pc = pieces_[piece_index(t)];
    return pc.p.eval(pc.local(t));
}

Vec2 CurveJet::derivative(double t, int s) const {
    const auto& pc = pieces_[piece_index(t)];
    return pc.p.derivative(s).eval(pc.local(t)) / std::pow(pc.half(), s);
}

double CurveJet::sup_derivative(int s) const {
    double m = 0;
    for (const auto& pc : pieces_) m = std::max(m, poly::sup_norm(pc.p, s) / std::pow(pc.half(), s));
    return m;
}

double CurveJet::inf_speed() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& pc : pieces_) m = std::min(m, poly::inf_norm(pc.p, 1) / pc.half());
    return m;
}

std::vector<double> CurveJet::derivative_bounds() const {
    std::vector<double> b;
    for (int s = 1; s <= r_; ++s) b.push_back(sup_derivative(s));
    return b;
}

double CurveJet::remainder() const {
    double m = 0;
    for (const auto& pc : pieces_) m = std::max(m, pc.remainder);
    return m;
}

double CurveJet::arc_length(double a, double b) const {
    double total = 0;
    for (const auto& pc : pieces_) {
        double lo = std::max(a, pc.lo), hi = std::min(b, pc.hi);
        if (hi > lo) total += poly::arc_length(pc.p, pc.local(lo), pc.local(hi));
    }
    return total;
}

void CurveJet::validate(double tol) const {
    if (std::abs(pieces_.front().lo + 1) > 1e-12 || std::abs(pieces_.back().hi - 1) > 1e-12)
        throw InvariantError("CurveJet: pieces do not cover [-1, 1]");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (!(pieces_[i].hi > pieces_[i].lo)) throw InvariantError("CurveJet: empty piece");
        if (i == 0) continue;
        if (std::abs(pieces_[i].lo - pieces_[i - 1].hi) > 1e-15)
            throw InvariantError("CurveJet: pieces overlap or leave a gap");
        Vec2 a = pieces_[i - 1].p.eval(1), b = pieces_[i].p.eval(-1);
        if (norm(a - b) > tol) throw InvariantError("CurveJet: adjacent pieces disagree at a shared endpoint");
    }
}

BoundedVerdict is_bounded(const CurveJet& g) {
    BoundedVerdict v;
    v.speed = g.sup_derivative(1);
    for (int s = 2; s <= g.order(); ++s) v.higher = std::max(v.higher, g.sup_derivative(s));
    v.margin = v.speed / 6 - v.higher;
    v.ok = v.margin >= 0;
    return v;
}

bool is_strongly_bounded(const CurveJet& g, double eps) {
    auto v = is_bounded(g);
    return v.ok && v.speed <= eps;
}

double distortion(const CurveJet& g) {
    if (!is_bounded(g).ok) throw PreconditionError("distortion: curve is not bounded");
    double hi = g.sup_derivative(1), lo = g.inf_speed();
    if (hi == 0) return 1;
    double d = hi / lo;
    if (d > 1.5 + 1e-9) throw InvariantError("distortion: bounded curve exceeds 3/2");
    return d;
}

double oscillation(const CurveJet& g) {
    if (!is_bounded(g).ok) throw PreconditionError("oscillation: curve is not bounded");
    double best = -1, t_star = 0;
    for (const auto& pc : g.pieces()) {
        double u = poly::argmax_speed(pc.p);
        double s = norm(pc.p.derivative(1).eval(u)) / pc.half();
        if (s > best) {
            best = s;
            t_star = pc.mid() + pc.half() * u;
        }
    }
    if (best == 0) return 0;
    Vec2 ref = g.derivative(t_star);
    double worst = 0;
    for (const auto& pc : g.pieces()) {
        VPoly d = pc.p.derivative(1);
        poly::Poly cr(d.c.size());
        for (std::size_t j = 0; j < d.c.size(); ++j) cr[j] = ref.x * d.c[j].y - ref.y * d.c[j].x;
        poly::Poly C = poly::mul(cr, cr), N = d.norm2();
        // Critical points of C/N solve C'N - CN' = 0.
        poly::Poly num = poly::add(poly::mul(poly::derivative(C), N), poly::scale(poly::mul(C, poly::derivative(N)), -1));
        std::vector<double> pts{-1, 1};
        for (double r : poly::roots_in(num, -1, 1)) pts.push_back(r);
        for (double u : pts) worst = std::max(worst, vector_angle(ref, d.eval(u)));
    }
    if (worst > std::numbers::pi / 6 + 1e-9) throw InvariantError("oscillation: bounded curve exceeds pi/6");
    return worst;
}

CurveJet compose(const CurveJet& g, const AffineMap& theta) {
    if (!(theta.rho > 0)) throw DomainError("compose: affine rate must be positive");
    double A = theta.lo(), B = theta.hi();
    if (A < -1 - 1e-12 || B > 1 + 1e-12) throw DomainError("compose: theta([-1,1]) leaves [-1,1]");
    std::vector<CurvePiece> out;
    for (const auto& pc : g.pieces()) {
        double lo = std::max(A, pc.lo), hi = std::min(B, pc.hi);
        if (!(hi > lo)) continue;
        double s0 = std::max(-1.0, theta.inverse(lo)), s1 = std::min(1.0, theta.inverse(hi));
        if (!(s1 > s0)) continue;
        double m = 0.5 * (s0 + s1), h = 0.5 * (s1 - s0);
        double alpha = (theta(m) - pc.mid()) / pc.half(), beta = theta.rho * h / pc.half();
        out.push_back({s0, s1, pc.p.affine(alpha, beta), pc.remainder});
    }
    if (out.empty()) throw DomainError("compose: empty image");
    out.front().lo = -1;
    out.back().hi = 1;
    return CurveJet(std::move(out), g.order());
}

CurveJet rescale(const CurveJet& g, double a) {
    if (!(a > 0 && a <= 1)) throw DomainError("rescale: a must lie in (0, 1]");
    if (a == 1) return g;
    return compose(g, {0, a});
}

CurveJet rescale_checked(const CurveJet& g, double a, double eps) {
    CurveJet out = rescale(g, a);
    auto in = is_bounded(g);
    if (in.ok && a <= 2.0 / 3.0) {
        auto o = is_bounded(out);
        if (!o.ok && o.margin < -1e-12 * std::max(1.0, o.speed))
            throw InvariantError("rescale: bounded curve lost boundedness at a <= 2/3");
        if (eps > 0 && in.speed <= eps && o.speed > a * eps * (1 + 1e-12))
            throw InvariantError("rescale: strong bound did not scale by a");
    }
    return out;
}

TechResult subdivide_tech(const CurveJet& g, double eps) {
    auto bv = is_bounded(g);
    if (!bv.ok) throw PreconditionError("subdivide_tech: curve is not bounded");
    if (bv.speed < eps) throw PreconditionError("subdivide_tech: sup speed below eps");
    TechResult out;
    double rho = std::min(2.0 / 3.0, 2 * eps / (3 * bv.speed));
    out.rate = rho;
    out.pieces.push_back({{-1 + rho, rho}, false});
    for (double c = -1 + rho; c < 1 - rho; c += 2 * rho / 3) out.pieces.push_back({{c, rho}, true});
    out.pieces.push_back({{1 - rho, rho}, true});
    out.pieces.push_back({{1 - rho, rho}, false});
    for (const auto& tp : out.pieces) (tp.red ? out.red : out.blue)++;

    if (out.blue > 2 || out.red > 6 * (bv.speed / eps + 1))
        throw InvariantError("subdivide_tech: cardinality bound violated");
    for (const auto& tp : out.pieces) {
        CurveJet sub = compose(g, tp.iota);
        auto sv = is_bounded(sub);
        if (!sv.ok && sv.margin < -1e-12 * sv.speed) throw InvariantError("subdivide_tech: piece is not bounded");
        if (sv.speed > eps * (1 + 1e-12)) throw InvariantError("subdivide_tech: piece speed exceeds eps");
        if (norm(sub.derivative(0)) < eps / 6) throw InvariantError("subdivide_tech: piece derivative at 0 below eps/6");
    }
    return out;
}

int tech_overlap(const CurveJet& g, const TechResult& t, double eps, int samples) {
    std::vector<CurveJet> subs;
    std::vector<double> reach;
    for (const auto& tp : t.pieces) {
        subs.push_back(compose(g, tp.iota));
        reach.push_back(subs.back().sup_derivative(1));
    }
    std::vector<double> ts;
    for (int i = 0; i < samples; ++i) ts.push_back(-1 + 2.0 * i / (samples - 1));
    for (const auto& tp : t.pieces) ts.push_back(tp.iota.c);
    int worst = 0;
    for (double tx : ts) {
        Vec2 x = g.eval(tx);
        int count = 0;
        for (std::size_t j = 0; j < subs.size(); ++j) {
            if (norm(subs[j].eval(0) - x) - reach[j] >= eps) continue;
            double d2 = std::numeric_limits<double>::infinity();
            for (const auto& pc : subs[j].pieces()) {
                VPoly shifted = pc.p;
                shifted.c[0] -= x;
                d2 = std::min(d2, poly::min_on(shifted.norm2(), -1, 1));
            }
            if (std::sqrt(std::max(0.0, d2)) < eps) ++count;
        }
        worst = std::max(worst, count);
    }
    return worst;
}

namespace {

void to_series(const VPoly& p, int order, Series& X, Series& Y) {
    X = Series(order);
    Y = Series(order);
    for (int j = 0; j <= order && j < static_cast<int>(p.c.size()); ++j) {
        X[j] = p.c[static_cast<std::size_t>(j)].x;
        Y[j] = p.c[static_cast<std::size_t>(j)].y;
    }
}

VPoly from_series(const Series& X, const Series& Y) {
    VPoly q;
    for (int j = 0; j <= X.order(); ++j) q.c.push_back({X[j], Y[j]});
    return q;
}

void step_series(const SurfaceMap& f, Series& X, Series& Y) {
    Series X2, Y2;
    f.jet(X, Y, X2, Y2);
    if (f.domain() == DomainKind::Torus) {
        X2[0] -= std::floor(X2[0]);
        Y2[0] -= std::floor(Y2[0]);
    } else if (!f.in_domain({X2[0], Y2[0]})) {
        throw EscapeError(f.name() + ": curve jet left the declared domain", 1, 0);
    }
    X = X2;
    Y = Y2;
}

}  // namespace

VPoly jet_iterate(const SurfaceMap& f, const VPoly& p, int steps, int order) {
    Series X, Y;
    to_series(p, order, X, Y);
    for (int k = 0; k < steps; ++k) step_series(f, X, Y);
    return from_series(X, Y);
}

std::vector<VPoly> jet_orbit(const SurfaceMap& f, const VPoly& p, int steps, int order) {
    Series X, Y;
    to_series(p, order, X, Y);
    std::vector<VPoly> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        step_series(f, X, Y);
        out.push_back(from_series(X, Y));
    }
    return out;
}

double jet_remainder(const SurfaceMap& f, const VPoly& p, const VPoly& q, int steps) {
    double worst = 0;
    for (int i = 0; i < 8; ++i) {
        double u = std::cos((2 * i + 1) * std::numbers::pi / 16);
        Vec2 y = p.eval(u);
        for (int k = 0; k < steps; ++k) {
            y = f.lift(y);
            if (!f.in_domain(f.normalize(y))) throw EscapeError(f.name() + ": curve left the declared domain", k + 1, 0);
        }
        // Scaled as the leading truncated term c u^(r+1) so that the bound covers the endpoints.
        worst = std::max(worst, norm(f.displacement(q.eval(u), y)) / std::pow(std::abs(u), q.degree() + 1));
    }
    return worst;
}

namespace {

void push_piece(const SurfaceMap& f, const CurvePiece& pc, int order, int depth, const PushOptions& opt,
                std::vector<CurvePiece>& out) {
    VPoly q = jet_iterate(f, pc.p, 1, order);
    double rem = jet_remainder(f, pc.p, q, 1);
    double speed = poly::sup_norm(q, 1);
    if (rem > opt.relative_tol * speed && depth < opt.max_depth) {
        double m = pc.mid();
        push_piece(f, {pc.lo, m, pc.p.affine(-0.5, 0.5), pc.remainder}, order, depth + 1, opt, out);
        push_piece(f, {m, pc.hi, pc.p.affine(0.5, 0.5), pc.remainder}, order, depth + 1, opt, out);
        return;
    }
    double lip = op_norm(f.differential(pc.p.eval(0)));
    out.push_back({pc.lo, pc.hi, std::move(q), rem + lip * pc.remainder});
}

// Per-piece torus wrapping can differ by integers; shift pieces to keep the chart continuous.
void align_pieces(const SurfaceMap& f, std::vector<CurvePiece>& ps) {
    if (f.domain() != DomainKind::Torus) return;
    for (std::size_t i = 1; i < ps.size(); ++i) {
        Vec2 d = ps[i].p.eval(-1) - ps[i - 1].p.eval(1);
        ps[i].p.c[0] -= Vec2{std::round(d.x), std::round(d.y)};
    }
}

}  // namespace

CurveJet push(const SurfaceMap& f, const CurveJet& g, const PushOptions& opt) {
    if (f.domain() == DomainKind::Torus && g.arc_length(-1, 1) > 0.5)
        throw DomainError("push: torus curve longer than 1/2 in the covering chart");
    std::vector<CurvePiece> out;
    for (const auto& pc : g.pieces()) push_piece(f, pc, g.order(), 0, opt, out);
    align_pieces(f, out);
    return CurveJet(std::move(out), g.order());
}

namespace {

struct CertEval {
    bool bounded = false;
    int failed_step = -1;
    std::vector<CurveJet> levels;
};

CertEval certify_levels(const SurfaceMap& f, const CurveJet& sigma, const AffineMap& theta, int n, double eps) {
    CertEval ev;
    CurveJet g = compose(sigma, theta);
    std::vector<std::vector<VPoly>> orbits;
    for (const auto& pc : g.pieces()) orbits.push_back(jet_orbit(f, pc.p, n, g.order()));
    ev.levels.reserve(static_cast<std::size_t>(n) + 1);
    ev.levels.push_back(g);
    for (int k = 1; k <= n; ++k) {
        std::vector<CurvePiece> ps;
        for (std::size_t i = 0; i < g.pieces().size(); ++i)
            ps.push_back({g.pieces()[i].lo, g.pieces()[i].hi, orbits[i][static_cast<std::size_t>(k - 1)], 0});
        align_pieces(f, ps);
        ev.levels.emplace_back(std::move(ps), g.order());
    }
    for (int k = 0; k <= n; ++k) {
        const CurveJet& c = ev.levels[static_cast<std::size_t>(k)];
        if (!is_strongly_bounded(c, eps)) {
            ev.failed_step = k;
            return ev;
        }
    }
    // The Taylor model at the final level must track the true orbit up to propagated rounding.
    for (std::size_t i = 0; i < g.pieces().size(); ++i) {
        const auto& p = g.pieces()[i].p;
        const auto& q = ev.levels.back().pieces()[i].p;
        double err = 0, growth = 1;
        for (int j = 0; j <= 8; ++j) {
            double u = std::cos(j * std::numbers::pi / 8);
            Vec2 y = p.eval(u);
            double gj = 1;
            for (int k = 0; k < n; ++k) {
                gj *= op_norm(f.differential(y));
                y = f.lift(y);
            }
            growth = std::max(growth, gj);
            err = std::max(err, norm(f.displacement(q.eval(u), y)));
        }
        double tol = 1e-6 * poly::sup_norm(q, 1) + 64 * std::numeric_limits<double>::epsilon() * growth;
        if (err > tol) {
            ev.failed_step = n;
            return ev;
        }
    }
    ev.bounded = true;
    return ev;
}

}  // namespace

GeometricCertificate geometric_time_certificate(const SurfaceMap& f, const CurveJet& sigma, double t_x, int n,
                                                double alpha, double eps) {
    GeometricCertificate cert;
    cert.required = 1.5 * alpha * eps;
    if (n < 0) throw DomainError("geometric_time_certificate: negative n");
    double rho_max = std::min(1 + t_x, 1 - t_x);
    if (!(rho_max > 0)) return cert;

    auto eval = [&](double rho) { return certify_levels(f, sigma, {t_x, rho}, n, eps); };
    double good = 0, bad = rho_max;
    CertEval best = eval(rho_max);
    if (best.bounded) {
        good = rho_max;
    } else {
        cert.failed_step = best.failed_step;
        double r = rho_max;
        for (int j = 0; j < 80 && good == 0; ++j) {
            r *= 0.5;
            if (r < 1e-14 * std::max(1.0, std::abs(t_x))) break;
            CertEval e = eval(r);
            if (e.bounded) {
                good = r;
                best = std::move(e);
            } else {
                bad = r;
            }
        }
        if (good == 0) return cert;
        for (int it = 0; it < 40 && bad / good > 1 + 1e-6; ++it) {
            double mid = std::sqrt(good * bad);
            CertEval e = eval(mid);
            if (e.bounded) {
                good = mid;
                best = std::move(e);
            } else {
                bad = mid;
            }
        }
    }
    cert.theta = {t_x, good};
    const CurveJet& top = best.levels.back();
    cert.derivative = norm(top.derivative(0));
    cert.ok = cert.derivative >= cert.required;
    cert.failed_step = cert.ok ? -1 : n;
    cert.semi_length = std::min(top.arc_length(0, 1), top.arc_length(-1, 0));
    if (cert.ok && cert.semi_length < alpha * eps * (1 - 1e-9))
        throw InvariantError("geometric_time_certificate: semi-length below alpha eps");

    // Bounded distortion of the stretch along H_n on a parameter grid.
    double worst = 1;
    for (int l = 0; l < n; ++l) {
        const CurveJet& cl = best.levels[static_cast<std::size_t>(l)];
        double qmax = 0, qmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 32; ++i) {
            double s = -1 + i / 16.0;
            double q = norm(top.derivative(s)) / norm(cl.derivative(s));
            qmax = std::max(qmax, q);
            qmin = std::min(qmin, q);
        }
        worst = std::max(worst, qmax / qmin);
    }
    cert.distortion_ratio = worst;
    if (worst > 9.0 / 4.0 + 1e-9) throw InvariantError("geometric_time_certificate: distortion above 9/4");
    return cert;
}

}  // namespace srblab
