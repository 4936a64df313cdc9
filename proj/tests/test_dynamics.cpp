#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "srblab/dynamics.hpp"
#include "srblab/errors.hpp"

using namespace srblab;

namespace {

const double kLogLam = std::log((3 + std::sqrt(5.0)) / 2);

Vec2 cat_unstable() {
    Vec2 u{1, (std::sqrt(5.0) - 1) / 2};
    return u / norm(u);
}
Vec2 cat_stable() {
    Vec2 s{1, -(1 + std::sqrt(5.0)) / 2};
    return s / norm(s);
}

const char* kAllMaps[] = {"identity", "rotation:theta=0.7", "contraction", "cat", "cat-perturbed:eps=0.1",
                          "standard:K=1.5", "henon:a=1.4,b=0.3"};

// Tangent-vector renormalization estimate, independent of the matrix-product code.
double oracle_exponent(const SurfaceMap& f, Vec2 x, long n) {
    Vec2 v{0.6, 0.8};
    double acc = 0;
    for (long k = 0; k < n; ++k) {
        v = f.differential(x) * v;
        double s = norm(v);
        acc += std::log(s);
        v = v / s;
        x = f.forward(x);
    }
    return acc / n;
}

Vec2 henon_attractor_point() {
    auto f = make_map("henon:a=1.4,b=0.3");
    return f->iterate({0, 0}, 1000);
}

}  // namespace

TEST_CASE("map contracts: inverse and differential") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (const char* spec : kAllMaps) {
        auto f = make_map(spec);
        CHECK(make_map(f->spec())->spec() == f->spec());
        for (int i = 0; i < 200; ++i) {
            Vec2 lo = f->box_lo(), hi = f->box_hi();
            Vec2 p{lo.x + (hi.x - lo.x) * u(rng), lo.y + (hi.y - lo.y) * u(rng)};
            if (f->domain() == DomainKind::Plane) p = p * 0.1;
            CHECK(f->distance(f->lift_inverse(f->lift(p)), p) < 1e-9);
            CHECK(f->distance(f->lift(f->lift_inverse(p)), p) < 1e-9);
            Mat2 D = f->differential(p);
            double h = 1e-6;
            Vec2 dx = (f->lift(p + Vec2{h, 0}) - f->lift(p - Vec2{h, 0})) / (2 * h);
            Vec2 dy = (f->lift(p + Vec2{0, h}) - f->lift(p - Vec2{0, h})) / (2 * h);
            CHECK(std::abs(dx.x - D.a) < 1e-5);
            CHECK(std::abs(dx.y - D.c) < 1e-5);
            CHECK(std::abs(dy.x - D.b) < 1e-5);
            CHECK(std::abs(dy.y - D.d) < 1e-5);
        }
    }
    CHECK_THROWS_AS(make_map("nosuch"), DomainError);
    CHECK_THROWS_AS(make_map("cat-perturbed:delta=1"), DomainError);
    CHECK_THROWS_AS(make_map("henon:a=1.4,b=0"), DomainError);
}

TEST_CASE("project_step examples") {
    auto id = make_map("identity");
    ProjectivePoint p{{0.3, 0.4}, 1.1};
    auto s = project_step(*id, p);
    CHECK(s.next.base.x == doctest::Approx(0.3));
    CHECK(s.next.angle == doctest::Approx(1.1));
    CHECK(s.value.phi == doctest::Approx(0.0));

    auto cat = make_map("cat");
    auto c = project_step(*cat, ProjectivePoint::make({0.2, 0.7}, cat_unstable()));
    CHECK(c.value.phi == doctest::Approx(kLogLam).epsilon(1e-12));
    CHECK(c.value.phi == doctest::Approx(0.96242).epsilon(1e-5));
    CHECK(line_distance(c.next.angle, line_angle(cat_unstable())) < 1e-12);
    CHECK(c.value.w == doctest::Approx(0.0).epsilon(1e-12));

    double th = 0.7;
    auto rot = make_map("rotation:theta=0.7");
    auto r = project_step(*rot, p);
    CHECK(r.value.phi == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(line_distance(r.next.angle, std::fmod(1.1 + th, std::numbers::pi)) < 1e-12);

    CHECK_THROWS_AS(project_step(*make_map("henon:a=1.4,b=0.3"), {{2.9, 2.9}, 0}), EscapeError);
}

TEST_CASE("chain rule and w >= 0") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (const char* spec : {"cat-perturbed:eps=0.1", "standard:K=1.5"}) {
        auto f = make_map(spec);
        for (int i = 0; i < 20; ++i) {
            ProjectivePoint p{{u(rng), u(rng)}, std::numbers::pi * u(rng)};
            Mat2 M = Mat2::identity();
            Vec2 x = p.base;
            ProjectivePoint q = p;
            for (int k = 0; k < 15; ++k) {
                M = f->differential(x) * M;
                x = f->forward(x);
                auto s = project_step(*f, q);
                CHECK(s.value.w >= -1e-12);
                q = s.next;
            }
            CHECK(phi_sum(*f, p, 15) == doctest::Approx(std::log(norm(M * p.direction()))).epsilon(1e-9));
        }
    }
}

TEST_CASE("lyapunov_max") {
    CHECK(lyapunov_max(*make_map("identity"), {0.1, 0.2}, 1000) == doctest::Approx(0.0));
    CHECK(std::abs(lyapunov_max(*make_map("cat"), {0.1, 0.2}, 10000) - kLogLam) < 1e-3);
    // No overflow at long horizons.
    CHECK(std::abs(lyapunov_max(*make_map("cat"), {0.1, 0.2}, 2000000) - kLogLam) < 1e-3);
    auto f = make_map("henon:a=1.4,b=0.3");
    Vec2 x = henon_attractor_point();
    double chi = lyapunov_max(*f, x, 200000);
    double oracle = oracle_exponent(*f, x, 200000);
    CHECK(std::abs(chi - oracle) <= 0.05 * oracle);
    CHECK(std::abs(chi - 0.419) <= 0.05 * 0.419);
    try {
        lyapunov_max(*f, {2.5, 2.5}, 100);
        FAIL("expected escape");
    } catch (const EscapeError& e) {
        CHECK(e.iterate >= 1);
        CHECK(std::isfinite(e.partial));
    }
    for (const char* spec : {"cat", "standard:K=1.5"}) {
        auto g = make_map(spec);
        auto pr = lyapunov_pair(*g, {0.31, 0.47}, 5000);
        CHECK(std::abs(pr.chi1 + pr.chi2) < 1e-6);
    }
    auto hp = lyapunov_pair(*f, x, 20000);
    CHECK(hp.chi1 + hp.chi2 == doctest::Approx(std::log(0.3)).epsilon(1e-9));
}

TEST_CASE("R_estimate") {
    CHECK(R_estimate(*make_map("identity"), 10, 8).value == 0);
    auto c = R_estimate(*make_map("cat"), 20, 16);
    CHECK(std::abs(c.value - kLogLam) < 1e-3);
    auto f = make_map("standard:K=1.5");
    auto r = R_estimate(*f, 32, 64);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    // Dominance up to the grid resolution: compare at cell centres and nearby points.
    for (int i = 0; i < 64; ++i) {
        Vec2 x{(i % 8 + 0.5) / 8, (i / 8 + 0.5) / 8};
        CHECK(lyapunov_max(*f, x, 32) <= r.value + 1e-12);
    }
    CHECK(r.value >= r.coarse - 1e-12);
}

TEST_CASE("omega_q") {
    auto id = make_map("identity");
    CHECK(omega_q(*id, {{0.3, 0.3}, 0.4}, 5) == doctest::Approx(0.0));
    auto cat = make_map("cat");
    CHECK(std::abs(omega_q(*cat, ProjectivePoint::make({0.2, 0.1}, cat_unstable()), 8)) <= 1e-6);
    CHECK(omega_q(*cat, ProjectivePoint::make({0.2, 0.1}, cat_stable()), 8) == doctest::Approx(2 * kLogLam).epsilon(1e-9));
    auto f = make_map("standard:K=1.5");
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 50; ++i) {
        ProjectivePoint p{{u(rng), u(rng)}, std::numbers::pi * u(rng)};
        CHECK(omega_q(*f, p, 1) == doctest::Approx(project_step(*f, p).value.w).epsilon(1e-12));
    }
}

TEST_CASE("matrix_cocycle_sup_check") {
    std::vector<Mat2> ids(50, Mat2::identity());
    auto a = matrix_cocycle_sup_check(ids, 360);
    CHECK(a.gap == doctest::Approx(0.0).epsilon(1e-15));
    std::vector<Mat2> hyp(200, Mat2{2, 1, 1, 1});
    auto b = matrix_cocycle_sup_check(hyp, 360);
    CHECK(b.gap >= 0);
    CHECK(b.gap <= 1e-2);
    CHECK(b.norm_value == doctest::Approx(kLogLam).epsilon(1e-9));
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(static_cast<unsigned>(seed));
        std::uniform_real_distribution<double> u(-2, 2);
        std::vector<Mat2> seq;
        for (int k = 0; k < 200; ++k) seq.push_back({u(rng), u(rng), u(rng), u(rng)});
        auto r = matrix_cocycle_sup_check(seq, 360);
        CHECK(r.gap >= 0);
        CHECK(r.gap <= r.tolerance + 1e-12);
        CHECK(r.gap <= 1e-2);
    }
}

TEST_CASE("local_volume_growth") {
    auto id = make_map("identity");
    auto seg = CurveJet::segment({0.5, 0.5}, {0.2, 0});
    auto a = local_volume_growth(*id, seg, 0, 0.05, 50);
    CHECK(a.length == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(a.rate == doctest::Approx(std::log(0.1) / 50).epsilon(1e-6));

    auto cat = make_map("cat");
    auto st = CurveJet::segment({0.3, 0.3}, cat_stable() * 0.1);
    CHECK(local_volume_growth(*cat, st, 0, 0.05, 20).rate <= 1e-2);

    auto gen = CurveJet::segment({0.3, 0.3}, Vec2{0.6, 0.8} * 0.1);
    auto g1 = local_volume_growth(*cat, gen, 0.2, 0.05, 20);
    auto g2 = local_volume_growth(*cat, gen, 0.2, 0.02, 20);
    CHECK(g1.rate <= kLogLam + 0.05);
    CHECK(g2.rate <= g1.rate);
    // The ball has length <= 2 eps at step n - 1 and one more step stretches by at most |df|.
    CHECK(g1.length <= 2 * 0.05 * std::exp(kLogLam) * (1 + 1e-6));
}

TEST_CASE("contracting_profile") {
    SUBCASE("global contraction") {
        auto f = make_map("contraction");
        std::vector<Vec2> U{{1, 1}, {-2, 3}, {4, -1}};
        auto p = contracting_profile(*f, U, 0.01, 1000);
        CHECK(p.E.count_upto(1000) < 20);
        CHECK(p.report.samples.back().second < 0.05);
        for (double e : p.exponents) CHECK(e <= std::log(0.5) + 1e-9);
    }
    SUBCASE("sink") {
        auto f = make_map("henon:a=0.2,b=0.3");
        Vec2 fix{1.0895, 0.3268};
        std::vector<Vec2> U;
        for (int i = 0; i < 8; ++i) U.push_back(fix + unit_from_angle(i * std::numbers::pi / 4) * 0.05);
        auto p = contracting_profile(*f, U, 0.1, 10000);
        CHECK(static_cast<double>(p.E.count_upto(10000)) / 10000 <= 0.01);
        for (double e : p.exponents) CHECK(e <= 1e-2);
        for (double e : p.exponents) CHECK(e == doctest::Approx(std::log(0.8074)).epsilon(1e-2));
    }
    SUBCASE("cat ball") {
        auto f = make_map("cat");
        std::vector<Vec2> U;
        for (int i = 0; i < 8; ++i) U.push_back(Vec2{0.4, 0.4} + unit_from_angle(i * std::numbers::pi / 4) * 1e-3);
        auto p = contracting_profile(*f, U, 0.1, 2000);
        CHECK(static_cast<double>(p.E.count_upto(2000)) / 2000 >= 0.99);
    }
    CHECK_THROWS_AS(contracting_profile(*make_map("cat"), {{0, 0}}, 0.1, 10), PreconditionError);
}
