#include "srblab/maps.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "srblab/errors.hpp"

namespace srblab {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

std::string fmt_param(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Routes double and Series evaluation through one templated formula.
template <class D>
class FormulaMap : public SurfaceMap {
public:
    Vec2 lift(Vec2 p) const override {
        double X, Y;
        static_cast<const D*>(this)->eval(p.x, p.y, X, Y);
        return {X, Y};
    }
    void jet(const Series& x, const Series& y, Series& X, Series& Y) const override {
        static_cast<const D*>(this)->eval(x, y, X, Y);
    }
};

class Identity final : public FormulaMap<Identity> {
public:
    std::string name() const override { return "identity"; }
    std::string spec() const override { return "identity"; }
    DomainKind domain() const override { return DomainKind::Torus; }
    bool area_preserving() const override { return true; }
    template <class T>
    void eval(const T& x, const T& y, T& X, T& Y) const {
        X = x;
        Y = y;
    }
    Vec2 lift_inverse(Vec2 p) const override { return p; }
    Mat2 differential(Vec2) const override { return Mat2::identity(); }
};

class Rotation final : public FormulaMap<Rotation> {
public:
    explicit Rotation(double theta) : t_(theta), c_(std::cos(theta)), s_(std::sin(theta)) {}
    std::string name() const override { return "rotation"; }
    std::string spec() const override { return "rotation:theta=" + fmt_param(t_); }
    DomainKind domain() const override { return DomainKind::Plane; }
    bool area_preserving() const override { return true; }
    Vec2 box_lo() const override { return {-1e3, -1e3}; }
    Vec2 box_hi() const override { return {1e3, 1e3}; }
    template <class T>
    void eval(const T& x, const T& y, T& X, T& Y) const {
        X = x * c_ - y * s_;
        Y = x * s_ + y * c_;
    }
    Vec2 lift_inverse(Vec2 p) const override { return {p.x * c_ + p.y * s_, -p.x * s_ + p.y * c_}; }
    Mat2 differential(Vec2) const override { return {c_, -s_, s_, c_}; }

private:
    double t_, c_, s_;
};

class Contraction final : public FormulaMap<Contraction> {
public:
    std::string name() const override { return "contraction"; }
    std::string spec() const override { return "contraction"; }
    DomainKind domain() const override { return DomainKind::Plane; }
    Vec2 box_lo() const override { return {-10, -10}; }
    Vec2 box_hi() const override { return {10, 10}; }
    template <class T>
    void eval(const T& x, const T& y, T& X, T& Y) const {
        X = x * 0.5;
        Y = y * 0.5;
    }
    Vec2 lift_inverse(Vec2 p) const override { return p * 2.0; }
    Mat2 differential(Vec2) const override { return {0.5, 0, 0, 0.5}; }
};

// A o h with A = [[2,1],[1,1]] and h(x, y) = (x, y + eps/(2 pi) sin(2 pi x)); eps = 0 is the cat map.
class Cat final : public FormulaMap<Cat> {
public:
    explicit Cat(double eps) : eps_(eps) {}
    std::string name() const override { return eps_ == 0 ? "cat" : "cat-perturbed"; }
    std::string spec() const override { return eps_ == 0 ? "cat" : "cat-perturbed:eps=" + fmt_param(eps_); }
    DomainKind domain() const override { return DomainKind::Torus; }
    bool area_preserving() const override { return true; }
    template <class T>
    void eval(const T& x, const T& y, T& X, T& Y) const {
        T yy = y;
        if (eps_ != 0) {
            T s, c;
            sincos(x * kTwoPi, s, c);
            yy = y + s * (eps_ / kTwoPi);
        }
        X = x * 2.0 + yy;
        Y = x + yy;
    }
    Vec2 lift_inverse(Vec2 p) const override {
        double x = p.x - p.y, y = -p.x + 2 * p.y;
        return {x, y - eps_ / kTwoPi * std::sin(kTwoPi * x)};
    }
    Mat2 differential(Vec2 p) const override {
        double k = eps_ * std::cos(kTwoPi * p.x);
        return {2 + k, 1, 1 + k, 1};
    }

private:
    double eps_;
};

// y' = y + K/(2 pi) sin(2 pi x), x' = x + y'.
class Standard final : public FormulaMap<Standard> {
public:
    explicit Standard(double K) : K_(K) {}
    std::string name() const override { return "standard"; }
    std::string spec() const override { return "standard:K=" + fmt_param(K_); }
    DomainKind domain() const override { return DomainKind::Torus; }
    bool area_preserving() const override { return true; }
    template <class T>
    void eval(const T& x, const T& y, T& X, T& Y) const {
        T s, c;
        sincos(x * kTwoPi, s, c);
        Y = y + s * (K_ / kTwoPi);
        X = x + Y;
    }
    Vec2 lift_inverse(Vec2 p) const override {
        double x = p.x - p.y;
        return {x, p.y - K_ / kTwoPi * std::sin(kTwoPi * x)};
    }
    Mat2 differential(Vec2 p) const override {
        double k = K_ * std::cos(kTwoPi * p.x);
        return {1 + k, 1, k, 1};
    }

private:
    double K_;
};

class Henon final : public FormulaMap<Henon> {
public:
    Henon(double a, double b) : a_(a), b_(b) {
        if (b == 0) throw DomainError("henon: b must be nonzero for invertibility");
    }
    std::string name() const override { return "henon"; }
    std::string spec() const override { return "henon:a=" + fmt_param(a_) + ",b=" + fmt_param(b_); }
    DomainKind domain() const override { return DomainKind::Plane; }
    Vec2 box_lo() const override { return {-3, -3}; }
    Vec2 box_hi() const override { return {3, 3}; }
    template <class T>
    void eval(const T& x, const T& y, T& X, T& Y) const {
        X = (x * x) * (-a_) + y + 1.0;
        Y = x * b_;
    }
    Vec2 lift_inverse(Vec2 p) const override {
        double x = p.y / b_;
        return {x, p.x - 1 + a_ * x * x};
    }
    Mat2 differential(Vec2 p) const override { return {-2 * a_ * p.x, 1, b_, 0}; }

private:
    double a_, b_;
};

std::map<std::string, double> parse_params(const std::string& s, const std::string& spec) {
    std::map<std::string, double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw DomainError("map spec: malformed parameter in '" + spec + "'");
        try {
            out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw DomainError("map spec: bad number in '" + spec + "'");
        }
    }
    return out;
}

double take(std::map<std::string, double>& p, const std::string& key, double dflt) {
    auto it = p.find(key);
    if (it == p.end()) return dflt;
    double v = it->second;
    p.erase(it);
    return v;
}

}  // namespace

bool SurfaceMap::in_domain(Vec2 p) const {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
    if (domain() == DomainKind::Torus) return true;
    Vec2 lo = box_lo(), hi = box_hi();
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
}

Vec2 SurfaceMap::normalize(Vec2 p) const {
    if (domain() == DomainKind::Torus) return {wrap01(p.x), wrap01(p.y)};
    return p;
}

Vec2 SurfaceMap::forward(Vec2 p) const {
    Vec2 q = normalize(lift(p));
    if (!in_domain(q)) throw EscapeError(name() + ": orbit left the declared domain", 1, 0);
    return q;
}

Vec2 SurfaceMap::inverse(Vec2 p) const {
    Vec2 q = normalize(lift_inverse(p));
    if (!in_domain(q)) throw EscapeError(name() + ": backward orbit left the declared domain", 1, 0);
    return q;
}

Vec2 SurfaceMap::iterate(Vec2 p, long n) const {
    for (long k = 0; k < n; ++k) {
        Vec2 q = normalize(lift(p));
        if (!in_domain(q)) throw EscapeError(name() + ": orbit left the declared domain", k + 1, 0);
        p = q;
    }
    return p;
}

Vec2 SurfaceMap::displacement(Vec2 from, Vec2 to) const {
    Vec2 d = to - from;
    if (domain() == DomainKind::Torus) d = {wrap_signed(d.x), wrap_signed(d.y)};
    return d;
}

double SurfaceMap::distance(Vec2 a, Vec2 b) const { return norm(displacement(a, b)); }

MapPtr make_map(const std::string& spec) {
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    auto params = colon == std::string::npos ? std::map<std::string, double>{} : parse_params(spec.substr(colon + 1), spec);
    MapPtr m;
    if (name == "identity") {
        m = std::make_shared<Identity>();
    } else if (name == "rotation") {
        m = std::make_shared<Rotation>(take(params, "theta", 0.5));
    } else if (name == "contraction") {
        m = std::make_shared<Contraction>();
    } else if (name == "cat") {
        m = std::make_shared<Cat>(0.0);
    } else if (name == "cat-perturbed") {
        m = std::make_shared<Cat>(take(params, "eps", 0.1));
    } else if (name == "standard") {
        m = std::make_shared<Standard>(take(params, "K", 1.5));
    } else if (name == "henon") {
        double a = take(params, "a", 1.4), b = take(params, "b", 0.3);
        m = std::make_shared<Henon>(a, b);
    } else {
        throw DomainError("map spec: unknown map '" + name + "'");
    }
    if (!params.empty()) throw DomainError("map spec: unknown parameter '" + params.begin()->first + "' for " + name);
    return m;
}

}  // namespace srblab
