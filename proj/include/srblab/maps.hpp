#pragma once

#include <memory>
#include <string>
#include <vector>

#include "srblab/linalg.hpp"
#include "srblab/series.hpp"

namespace srblab {

enum class DomainKind { Torus, Plane };

// A point of the projective tangent bundle: base point and tangent line angle in [0, pi).
struct ProjectivePoint {
    Vec2 base;
    double angle = 0;

    Vec2 direction() const { return unit_from_angle(angle); }
    static ProjectivePoint make(Vec2 base, Vec2 tangent) { return {base, line_angle(tangent)}; }
};

// A planar diffeomorphism given on the covering plane. Torus maps commute with
// integer translations up to an integer matrix, so lifts can be wrapped freely.
class SurfaceMap {
public:
    virtual ~SurfaceMap() = default;

    virtual std::string name() const = 0;
    // Canonical textual form, parseable by make_map.
    virtual std::string spec() const = 0;
    virtual DomainKind domain() const = 0;
    virtual bool area_preserving() const { return false; }

    virtual Vec2 lift(Vec2 p) const = 0;
    virtual Vec2 lift_inverse(Vec2 p) const = 0;
    virtual Mat2 differential(Vec2 p) const = 0;
    // Taylor-coefficient composition: (X, Y) = f(x, y) truncated at the order of the inputs.
    virtual void jet(const Series& x, const Series& y, Series& X, Series& Y) const = 0;

    // Bounding box of the declared domain for planar maps.
    virtual Vec2 box_lo() const { return {0, 0}; }
    virtual Vec2 box_hi() const { return {1, 1}; }

    bool in_domain(Vec2 p) const;
    // Wraps torus points into [0, 1)^2; identity for planar maps.
    Vec2 normalize(Vec2 p) const;
    // One iterate with wrapping; planar orbits leaving the box raise EscapeError.
    Vec2 forward(Vec2 p) const;
    Vec2 inverse(Vec2 p) const;
    Vec2 iterate(Vec2 p, long n) const;
    // Flat distance (shortest translate on the torus).
    double distance(Vec2 a, Vec2 b) const;
    Vec2 displacement(Vec2 from, Vec2 to) const;
};

using MapPtr = std::shared_ptr<const SurfaceMap>;

// Grammar: identity | rotation:theta=T | contraction | cat | cat-perturbed:eps=E
//        | standard:K=K | henon:a=A,b=B
MapPtr make_map(const std::string& spec);

}  // namespace srblab
