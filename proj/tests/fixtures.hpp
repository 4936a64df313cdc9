#pragma once

#include <random>

#include "srblab/curves.hpp"

namespace srblab::fixtures {

// Rejection-sampled bounded cubic curve with speed of order `scale`; about a third of
// the draws end near the boundedness margin.
inline CurveJet random_bounded_cubic(std::mt19937_64& rng, double scale = 1.0, Vec2 base = {0.5, 0.5}) {
    std::normal_distribution<double> n01(0, 1);
    std::uniform_real_distribution<double> u01(0, 1);
    for (;;) {
        double spread = u01(rng) < 0.3 ? 0.25 : 0.08;
        poly::VPoly p;
        p.c = {base, Vec2{n01(rng), n01(rng)} * scale, Vec2{n01(rng), n01(rng)} * (spread * scale),
               Vec2{n01(rng), n01(rng)} * (spread * scale / 3)};
        CurveJet g(p, 3);
        if (is_bounded(g).ok) return g;
    }
}

inline double sampled_distortion(const CurveJet& g, int samples) {
    double hi = 0, lo = 1e300;
    for (int i = 0; i < samples; ++i) {
        double s = norm(g.derivative(-1 + 2.0 * i / (samples - 1)));
        hi = std::max(hi, s);
        lo = std::min(lo, s);
    }
    return hi / lo;
}

}  // namespace srblab::fixtures
