#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mammopos/image.hpp"

using namespace mammopos;
using Catch::Approx;

TEST_CASE("image construction validates its arguments", "[image]") {
    CHECK_THROWS_AS(GrayImage::make(0, 10, 8), ContractError);
    CHECK_THROWS_AS(GrayImage::make(10, -1, 8), ContractError);
    CHECK_THROWS_AS(GrayImage::make(10, 10, 12), ContractError);
    const GrayImage img = GrayImage::make(4, 3, 16, 7.0f);
    CHECK(img.size() == 12);
    CHECK(img.at(3, 2) == 7.0f);
}

TEST_CASE("min-max normalization", "[image]") {
    GrayImage img = GrayImage::make(2, 2, 8);
    img.pixels = {0.0f, 255.0f, 128.0f, 64.0f};
    const GrayImage n = normalize(img);
    CHECK(n.pixels[0] == Approx(0.0));
    CHECK(n.pixels[1] == Approx(1.0));
    CHECK(n.pixels[2] == Approx(128.0 / 255.0));
    CHECK(n.pixels[3] == Approx(64.0 / 255.0));
}

TEST_CASE("normalization degenerate and identity cases", "[image]") {
    GrayImage flat = GrayImage::make(3, 3, 8, 42.0f);
    const GrayImage n = normalize(flat);
    for (float v : n.pixels) CHECK(v == 0.0f);

    GrayImage unit = GrayImage::make(2, 1, 8);
    unit.pixels = {0.0f, 1.0f};
    CHECK(normalize(unit) == unit);

    GrayImage empty;
    CHECK_THROWS_AS(normalize(empty), ContractError);
}

TEST_CASE("normalization is idempotent", "[image]") {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<float> px(0.0f, 65535.0f);
    GrayImage img = GrayImage::make(17, 13, 16);
    for (auto& v : img.pixels) v = px(rng);
    const GrayImage once = normalize(img);
    const GrayImage twice = normalize(once);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(std::abs(once.pixels[i] - twice.pixels[i]) < 1e-12);
}

TEST_CASE("resample identity and constancy", "[image]") {
    std::mt19937_64 rng(555);
    std::uniform_real_distribution<float> px(0.0f, 255.0f);
    GrayImage img = GrayImage::make(9, 7, 8);
    for (auto& v : img.pixels) v = px(rng);
    CHECK(resample(img, 9, 7) == img);

    const GrayImage flat = GrayImage::make(500, 500, 8, 3.0f);
    const GrayImage small = resample(flat, 250, 250);
    CHECK(small.width == 250);
    CHECK(small.height == 250);
    for (float v : small.pixels) CHECK(v == Approx(3.0f));
}

TEST_CASE("bilinear upsample interpolates monotonically", "[image]") {
    GrayImage img = GrayImage::make(2, 2, 8);
    img.pixels = {0.0f, 1.0f, 0.0f, 1.0f};
    const GrayImage up = resample(img, 4, 4);
    REQUIRE(up.width == 4);
    REQUIRE(up.height == 4);
    // Half-pixel mapping lands output columns at source x −0.25, 0.25, 0.75,
    // 1.25; with clamped borders each row reads 0, 0.25, 0.75, 1.
    for (int y = 0; y < 4; ++y) {
        CHECK(up.at(0, y) == Approx(0.0).margin(1e-6));
        CHECK(up.at(1, y) == Approx(0.25).margin(1e-6));
        CHECK(up.at(2, y) == Approx(0.75).margin(1e-6));
        CHECK(up.at(3, y) == Approx(1.0).margin(1e-6));
        for (int x = 1; x < 4; ++x) CHECK(up.at(x, y) >= up.at(x - 1, y));
    }
}

TEST_CASE("resample output stays within the input range", "[image]") {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<float> px(0.0f, 255.0f);
    GrayImage img = GrayImage::make(31, 23, 8);
    for (auto& v : img.pixels) v = px(rng);
    const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
    for (auto [w, h] : {std::pair{11, 9}, std::pair{64, 64}, std::pair{250, 250}}) {
        const GrayImage r = resample(img, w, h);
        for (float v : r.pixels) {
            CHECK(v >= *lo - 1e-4f);
            CHECK(v <= *hi + 1e-4f);
        }
    }
}

TEST_CASE("rescale_point follows the resolution ratio", "[image]") {
    const Bounds net{250, 250};
    const Bounds full{3500, 4000};
    const Point same = rescale_point(Point{125, 125}, net, net);
    CHECK(same.x == Approx(125.0));
    CHECK(same.y == Approx(125.0));

    const Point up = rescale_point(Point{125, 125}, net, full);
    CHECK(up.x == Approx(1750.0));
    CHECK(up.y == Approx(2000.0));

    const Point origin = rescale_point(Point{0, 0}, net, full);
    CHECK(origin.x == 0.0);
    CHECK(origin.y == 0.0);
}

TEST_CASE("rescale_point round-trips", "[image]") {
    std::mt19937_64 rng(112233);
    std::uniform_real_distribution<double> coord(0.0, 249.0);
    std::uniform_int_distribution<int> dim(1, 5000);
    for (int i = 0; i < 1000; ++i) {
        const Point p{coord(rng), coord(rng)};
        const Bounds a{dim(rng), dim(rng)};
        const Bounds b{dim(rng), dim(rng)};
        const Point back = rescale_point(rescale_point(p, a, b), b, a);
        CHECK(std::abs(back.x - p.x) < 1e-9);
        CHECK(std::abs(back.y - p.y) < 1e-9);
    }
}
