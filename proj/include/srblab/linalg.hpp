#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace srblab {

struct Vec2 {
    double x = 0, y = 0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline Vec2 unit_from_angle(double a) { return {std::cos(a), std::sin(a)}; }

// Angle of the line spanned by v, normalized to [0, pi).
inline double line_angle(const Vec2& v) {
    double a = std::atan2(v.y, v.x);
    if (a < 0) a += std::numbers::pi;
    if (a >= std::numbers::pi) a -= std::numbers::pi;
    return a;
}

// Unsigned angle between two vectors, in [0, pi].
inline double vector_angle(const Vec2& a, const Vec2& b) {
    return std::atan2(std::abs(cross(a, b)), dot(a, b));
}

// Distance between two lines given by angles, in [0, pi/2].
inline double line_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), std::numbers::pi);
    return std::min(d, std::numbers::pi - d);
}

struct Mat2 {
    double a = 1, b = 0, c = 0, d = 1;  // [[a, b], [c, d]]

    static Mat2 identity() { return {}; }
    Vec2 operator*(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 operator*(const Mat2& m) const {
        return {a * m.a + b * m.c, a * m.b + b * m.d, c * m.a + d * m.c, c * m.b + d * m.d};
    }
    Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
    double det() const { return a * d - b * c; }
    Mat2 transpose() const { return {a, c, b, d}; }
    Mat2 inverse() const {
        double D = det();
        return {d / D, -b / D, -c / D, a / D};
    }
};

// Singular values (s1 >= s2 >= 0) of a 2x2 matrix in closed form.
inline void singular_values(const Mat2& m, double& s1, double& s2) {
    double e = (m.a + m.d) / 2, f = (m.a - m.d) / 2;
    double g = (m.c + m.b) / 2, h = (m.c - m.b) / 2;
    double q = std::hypot(e, h), r = std::hypot(f, g);
    s1 = q + r;
    s2 = std::abs(q - r);
}

inline double op_norm(const Mat2& m) {
    double s1, s2;
    singular_values(m, s1, s2);
    return s1;
}

// Unit right singular vector for the largest singular value.
inline Vec2 top_right_singular(const Mat2& m) {
    Mat2 g = m.transpose() * m;
    double tr = g.a + g.d, dt = g.det();
    double disc = std::sqrt(std::max(0.0, tr * tr / 4 - dt));
    double l1 = tr / 2 + disc;
    Vec2 v = std::abs(g.b) > 1e-300 ? Vec2{g.b, l1 - g.a} : (g.a >= g.d ? Vec2{1, 0} : Vec2{0, 1});
    return v / norm(v);
}

inline double wrap01(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

inline double wrap_signed(double d) { return d - std::round(d); }

}  // namespace srblab
