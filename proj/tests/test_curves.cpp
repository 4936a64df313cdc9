#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "srblab/curves.hpp"
#include "srblab/errors.hpp"

using namespace srblab;

namespace {

CurveJet quad(double a) {
    poly::VPoly p;
    p.c = {{0, 0}, {1, 0}, {0, a}, {0, 0}};
    return CurveJet(p, 3);
}

double max_sampled_angle(const CurveJet& g, double t_star, int samples) {
    Vec2 ref = g.derivative(t_star);
    double m = 0;
    for (int i = 0; i < samples; ++i) m = std::max(m, vector_angle(ref, g.derivative(-1 + 2.0 * i / (samples - 1))));
    return m;
}

}  // namespace

TEST_CASE("is_bounded examples") {
    auto seg = CurveJet::segment({0.2, 0.3}, {0.3, 0.4});
    auto v = is_bounded(seg);
    CHECK(v.ok);
    CHECK(v.margin == doctest::Approx(0.5 / 6).epsilon(1e-14));

    // (t, t^2/24): second derivative 1/12.
    auto q = is_bounded(quad(1.0 / 24));
    CHECK(q.ok);
    CHECK(q.higher == doctest::Approx(1.0 / 12));
    CHECK(q.speed >= 1.0);

    auto bad = is_bounded(quad(1.0));
    CHECK_FALSE(bad.ok);
    CHECK(bad.higher == doctest::Approx(2.0));
    CHECK(bad.margin < 0);
}

TEST_CASE("segment distortion and oscillation") {
    auto seg = CurveJet::segment({0, 0}, {1, 2});
    CHECK(distortion(seg) == doctest::Approx(1.0));
    CHECK(oscillation(seg) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(distortion(quad(1.0)), PreconditionError);
    CHECK_THROWS_AS(oscillation(quad(1.0)), PreconditionError);
}

TEST_CASE("margin curve") {
    // (t, k t^2 / 2) with k = sqrt(1 + k^2) / 6 sits on the boundedness margin.
    double k = 1 / std::sqrt(35.0) * (1 - 1e-12);
    auto g = quad(k / 2);
    auto v = is_bounded(g);
    CHECK(v.ok);
    CHECK(v.margin < 1e-10);
    CHECK(distortion(g) == doctest::Approx(std::sqrt(1 + k * k)));
    // Closed form: tangents at t = -1 and t = 1 make angle 2 atan(k).
    CHECK(oscillation(g) == doctest::Approx(2 * std::atan(k)).epsilon(1e-9));
    CHECK(oscillation(g) <= std::numbers::pi / 6);
}

TEST_CASE("random bounded cubics: distortion and oscillation oracles") {
    std::mt19937_64 rng(11);
    int violations = 0;
    for (int i = 0; i < 2000; ++i) {
        auto g = fixtures::random_bounded_cubic(rng);
        double d = distortion(g), o = oscillation(g);
        if (d > 1.5 + 1e-9 || o > std::numbers::pi / 6 + 1e-9) ++violations;
        // Exact values dominate dense samples.
        double ds = fixtures::sampled_distortion(g, 401);
        CHECK(ds <= d * (1 + 1e-12));
        CHECK(ds >= d * (1 - 1e-3));
        double ts = poly::argmax_speed(g.pieces()[0].p);
        double os = max_sampled_angle(g, ts, 401);
        CHECK(os <= o + 1e-12);
        CHECK(os >= o - 1e-2);
        // Reported sup norms dominate sampled values.
        for (int s = 1; s <= 3; ++s) {
            double bound = g.sup_derivative(s);
            for (int j = 0; j <= 20; ++j) CHECK(norm(g.derivative(-1 + j / 10.0, s)) <= bound * (1 + 1e-12) + 1e-15);
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("rescale") {
    std::mt19937_64 rng(5);
    auto g = fixtures::random_bounded_cubic(rng);
    auto same = rescale(g, 1.0);
    CHECK(same.pieces()[0].p.c.size() == g.pieces()[0].p.c.size());
    for (std::size_t j = 0; j < g.pieces()[0].p.c.size(); ++j) {
        CHECK(same.pieces()[0].p.c[j].x == g.pieces()[0].p.c[j].x);
        CHECK(same.pieces()[0].p.c[j].y == g.pieces()[0].p.c[j].y);
    }
    CHECK_THROWS_AS(rescale(g, 0), DomainError);
    CHECK_THROWS_AS(rescale(g, 1.5), DomainError);
    for (int i = 0; i < 500; ++i) {
        auto h = fixtures::random_bounded_cubic(rng);
        CHECK(is_bounded(rescale_checked(h, 2.0 / 3.0, 0)).ok);
        double eps = h.sup_derivative(1);
        auto half = rescale_checked(h, 0.5, eps);
        CHECK(is_strongly_bounded(half, 0.5 * eps * (1 + 1e-12)));
        CHECK(half.eval(0.3).x == doctest::Approx(h.eval(0.15).x));
    }
}

TEST_CASE("compose across pieces and validate") {
    auto g = CurveJet::segment({0, 0}, {1, 1});
    auto h = compose(g, {0.25, 0.5});
    CHECK(h.eval(-1).x == doctest::Approx(-0.25));
    CHECK(h.eval(1).x == doctest::Approx(0.75));
    CHECK_THROWS_AS(compose(g, {0.8, 0.5}), DomainError);
    std::vector<CurvePiece> ps{{-1, 0, g.pieces()[0].p.affine(-0.5, 0.5), 0}, {0, 1, g.pieces()[0].p.affine(0.5, 0.5), 0}};
    CurveJet two(ps, 3);
    CHECK_NOTHROW(two.validate());
    CHECK(two.eval(0.6).y == doctest::Approx(0.6));
    CHECK(two.derivative(0.6).y == doctest::Approx(1.0));
    CHECK(two.arc_length(-1, 1) == doctest::Approx(2 * std::sqrt(2.0)));
    auto c = compose(two, {0.1, 0.3});
    CHECK(c.pieces().size() == 2);
    CHECK_NOTHROW(c.validate());
    CHECK(c.eval(0.5).x == doctest::Approx(0.25));
    ps[1].p.c[0].x += 1e-3;
    CHECK_THROWS_AS(CurveJet(ps, 3).validate(), InvariantError);
}

TEST_CASE("subdivide_tech") {
    double eps = 0.05;
    SUBCASE("speed equal to eps") {
        auto g = CurveJet::segment({0, 0}, {eps, 0});
        auto t = subdivide_tech(g, eps);
        CHECK(t.rate == doctest::Approx(2.0 / 3.0));
        CHECK(t.red <= 12);
        CHECK(t.blue == 2);
    }
    SUBCASE("segment of speed 10 eps") {
        auto g = CurveJet::segment({0, 0}, {10 * eps, 0});
        auto t = subdivide_tech(g, eps);
        CHECK(t.red <= 66);
        CHECK(tech_overlap(g, t, eps) <= 100);
        // Coverage by blue full images and red middle thirds.
        for (int i = 0; i <= 1000; ++i) {
            double s = -1 + i / 500.0;
            bool covered = false;
            for (const auto& p : t.pieces) {
                double r = p.red ? p.iota.rho / 3 : p.iota.rho;
                if (std::abs(s - p.iota.c) <= r + 1e-12) covered = true;
            }
            CHECK(covered);
        }
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(subdivide_tech(CurveJet::segment({0, 0}, {eps / 2, 0}), eps), PreconditionError);
        CHECK_THROWS_AS(subdivide_tech(quad(1.0), 1e-3), PreconditionError);
    }
    SUBCASE("random bounded curves") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 100; ++i) {
            auto g = fixtures::random_bounded_cubic(rng, 0.3);
            double e = g.sup_derivative(1) / std::uniform_real_distribution<double>(1, 20)(rng);
            auto t = subdivide_tech(g, e);
            CHECK(t.red <= 6 * (g.sup_derivative(1) / e + 1));
            CHECK(tech_overlap(g, t, e) <= 100);
        }
    }
}

TEST_CASE("push") {
    poly::VPoly p;
    p.c = {{0.3, 0.2}, {0.01, 0.02}, {0.001, -0.002}, {0.0001, 0}};
    CurveJet g(p, 3);
    SUBCASE("identity") {
        auto h = push(*make_map("identity"), g);
        REQUIRE(h.pieces().size() == 1);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(h.pieces()[0].p.c[j].x == doctest::Approx(p.c[j].x));
            CHECK(h.pieces()[0].p.c[j].y == doctest::Approx(p.c[j].y));
        }
    }
    SUBCASE("cat map is linear") {
        auto h = push(*make_map("cat"), g);
        REQUIRE(h.pieces().size() == 1);
        CHECK(h.remainder() < 1e-14);
        for (std::size_t j = 1; j < 4; ++j) {
            CHECK(h.pieces()[0].p.c[j].x == doctest::Approx(2 * p.c[j].x + p.c[j].y));
            CHECK(h.pieces()[0].p.c[j].y == doctest::Approx(p.c[j].x + p.c[j].y));
        }
    }
    SUBCASE("standard map pointwise error within truncation bound") {
        auto f = make_map("standard:K=1.5");
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 20; ++trial) {
            auto c = fixtures::random_bounded_cubic(rng, 0.05, {0.4, 0.6});
            auto h = push(*f, c);
            CHECK_NOTHROW(h.validate(std::max(1e-9, 4 * h.remainder())));
            for (int i = 0; i < 100; ++i) {
                double t = -1 + 2.0 * i / 99;
                Vec2 truth = f->lift(c.eval(t));
                Vec2 model = h.eval(t);
                CHECK(norm(f->displacement(model, truth)) <= h.remainder() * (1 + 1e-6) + 1e-15);
            }
        }
    }
    SUBCASE("long torus curve rejected") {
        CHECK_THROWS_AS(push(*make_map("cat"), CurveJet::segment({0, 0}, {0.4, 0})), DomainError);
    }
    SUBCASE("escape") {
        CHECK_THROWS_AS(push(*make_map("henon:a=1.4,b=0.3"), CurveJet::segment({2.9, 0}, {0.05, 0})), EscapeError);
    }
}

TEST_CASE("geometric_time_certificate") {
    SUBCASE("identity static condition") {
        auto f = make_map("identity");
        auto s = CurveJet::segment({0.5, 0.5}, {1, 0});
        auto ok = geometric_time_certificate(*f, s, 0, 7, 0.6, 0.1);
        CHECK(ok.ok);
        CHECK(ok.theta.rho == doctest::Approx(0.1).epsilon(1e-5));
        CHECK_FALSE(geometric_time_certificate(*f, s, 0, 7, 0.7, 0.1).ok);
    }
    SUBCASE("cat map unstable direction") {
        auto f = make_map("cat");
        double lam = (3 + std::sqrt(5.0)) / 2;
        Vec2 u{1, (std::sqrt(5.0) - 1) / 2};
        u = u / norm(u);
        auto s = CurveJet::segment({0.3, 0.3}, u * 0.3);
        double eps = 0.05;
        for (int n = 1; n <= 8; ++n) {
            auto c = geometric_time_certificate(*f, s, 0.1, n, 0.2, eps);
            CHECK(c.ok);
            double top = c.theta.rho * 0.3 * std::pow(lam, n);
            CHECK(top <= eps * (1 + 1e-9));
            CHECK(top >= eps * (1 - 1e-5));
            CHECK(c.semi_length >= 0.2 * eps);
            CHECK(c.distortion_ratio == doctest::Approx(1.0));
        }
    }
    SUBCASE("strongly bounded curves stay in the dynamical ball") {
        auto f = make_map("standard:K=1.5");
        std::mt19937_64 rng(21);
        double eps = 0.02;
        int n = 6;
        for (int trial = 0; trial < 10; ++trial) {
            auto s = fixtures::random_bounded_cubic(rng, 0.1, {0.37, 0.61});
            auto c = geometric_time_certificate(*f, s, 0.0, n, 0.05, eps);
            CHECK(c.distortion_ratio <= 2.25);
            if (c.theta.rho == 0) continue;
            Vec2 x = s.eval(c.theta(0));
            for (int i = 0; i <= 40; ++i) {
                Vec2 y = s.eval(c.theta(-1 + i / 20.0)), z = x;
                for (int k = 1; k <= n; ++k) {
                    y = f->forward(y);
                    z = f->forward(z);
                    CHECK(f->distance(y, z) <= eps * (1 + 1e-6));
                }
            }
        }
    }
}
