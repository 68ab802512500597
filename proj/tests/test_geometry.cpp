#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mammopos/geometry.hpp"

using namespace mammopos;
using Catch::Approx;

TEST_CASE("segment construction rejects degenerate input", "[geometry]") {
    CHECK_THROWS_AS(Segment(Point{1, 2}, Point{1, 2}), ContractError);
    CHECK_THROWS_AS(Segment(Point{0, 0}, Point{std::nan(""), 1}), ContractError);
    CHECK_THROWS_AS(Segment(Point{0, 0}, Point{std::numeric_limits<double>::infinity(), 1}),
                    ContractError);
    const Segment s(Point{1, 2}, Point{4, 6});
    CHECK(s.length() == Approx(5.0));
}

TEST_CASE("line intersection of crossing and parallel pairs", "[geometry]") {
    const Segment a(Point{0, 0}, Point{10, 10});
    const Segment b(Point{0, 10}, Point{10, 0});
    const auto x = line_intersection(a, b);
    REQUIRE(x.has_value());
    CHECK(x->x == Approx(5.0));
    CHECK(x->y == Approx(5.0));

    const Segment v0(Point{0, 0}, Point{0, 1});
    const Segment v1(Point{1, 0}, Point{1, 1});
    CHECK_FALSE(line_intersection(v0, v1).has_value());
}

TEST_CASE("line intersection matches the axis-aligned oracle", "[geometry]") {
    // Vertical pec-like line at x=200 against a horizontal pnl-like line at
    // y=100; the exact crossing is (200,100).
    const Segment pec(Point{200, 0}, Point{200, 249});
    const Segment pnl(Point{50, 100}, Point{240, 100});
    const auto x = line_intersection(pec, pnl);
    REQUIRE(x.has_value());
    CHECK(x->x == Approx(200.0).margin(1e-12));
    CHECK(x->y == Approx(100.0).margin(1e-12));
}

TEST_CASE("intersection works on the extended lines, not just the segments", "[geometry]") {
    // Segments that do not touch but whose lines cross at (0,0).
    const Segment a(Point{1, 1}, Point{2, 2});
    const Segment b(Point{1, -1}, Point{2, -2});
    const auto x = line_intersection(a, b);
    REQUIRE(x.has_value());
    CHECK(x->x == Approx(0.0).margin(1e-12));
    CHECK(x->y == Approx(0.0).margin(1e-12));
}

TEST_CASE("point_in_bounds uses the inclusive pixel-index convention", "[geometry]") {
    const Bounds b{250, 250};
    CHECK(point_in_bounds(Point{0, 0}, b));
    CHECK(point_in_bounds(Point{249.0, 249.0}, b));
    CHECK_FALSE(point_in_bounds(Point{250.0, 100}, b));
    CHECK_FALSE(point_in_bounds(Point{-0.001, 100}, b));
    CHECK(point_in_bounds(Point{200, 100}, b));
}

TEST_CASE("euclidean distance", "[geometry]") {
    CHECK(distance(Point{0, 0}, Point{3, 4}) == Approx(5.0));
    CHECK(distance(Point{7, -2}, Point{7, -2}) == 0.0);
    CHECK(distance(Point{50, 100}, Point{200, 100}) == Approx(150.0));
}

TEST_CASE("perpendicular distance to a line", "[geometry]") {
    CHECK(perpendicular_distance(Point{0, 5}, Segment(Point{-1, 0}, Point{1, 0})) == Approx(5.0));
    CHECK(perpendicular_distance(Point{0.5, 0.5}, Segment(Point{0, 0}, Point{1, 1})) ==
          Approx(0.0).margin(1e-12));
    CHECK(perpendicular_distance(Point{3, 4}, Segment(Point{0, 0}, Point{1, 1})) ==
          Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("intersection is symmetric and lies on both lines", "[geometry]") {
    std::mt19937_64 rng(20260817);
    std::uniform_real_distribution<double> coord(-500.0, 500.0);
    auto random_segment = [&] {
        while (true) {
            const Point p{coord(rng), coord(rng)};
            const Point q{coord(rng), coord(rng)};
            if (distance(p, q) > 1e-6) return Segment(p, q);
        }
    };
    auto on_line = [](const Point& p, const Segment& s) {
        return perpendicular_distance(p, s) < 1e-6;
    };
    int checked = 0;
    for (int i = 0; i < 2000; ++i) {
        const Segment a = random_segment();
        const Segment b = random_segment();
        const auto ab = line_intersection(a, b);
        const auto ba = line_intersection(b, a);
        REQUIRE(ab.has_value() == ba.has_value());
        if (!ab) continue;
        ++checked;
        CHECK(distance(*ab, *ba) < 1e-6);
        CHECK(on_line(*ab, a));
        CHECK(on_line(*ab, b));
    }
    // random pairs are almost never parallel; make sure the loop wasn't vacuous
    CHECK(checked > 1900);
}

TEST_CASE("distance obeys symmetry and the triangle inequality", "[geometry]") {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> coord(-1000.0, 1000.0);
    for (int i = 0; i < 2000; ++i) {
        const Point a{coord(rng), coord(rng)};
        const Point b{coord(rng), coord(rng)};
        const Point c{coord(rng), coord(rng)};
        CHECK(distance(a, b) == Approx(distance(b, a)));
        CHECK(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
    }
}

TEST_CASE("perpendicular distance is translation and orientation invariant", "[geometry]") {
    std::mt19937_64 rng(909090);
    std::uniform_real_distribution<double> coord(-200.0, 200.0);
    for (int i = 0; i < 1000; ++i) {
        const Point p{coord(rng), coord(rng)};
        const Point s0{coord(rng), coord(rng)};
        Point s1{coord(rng), coord(rng)};
        if (distance(s0, s1) < 1e-6) s1.x += 1.0;
        const Segment s(s0, s1);
        const Segment swapped(s1, s0);
        const double d = perpendicular_distance(p, s);
        CHECK(perpendicular_distance(p, swapped) == Approx(d).margin(1e-9));

        const Point t{coord(rng), coord(rng)};
        const Segment shifted(s0 + t, s1 + t);
        CHECK(perpendicular_distance(p + t, shifted) == Approx(d).margin(1e-6));
    }
}
