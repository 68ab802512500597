#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "mammopos/image_io.hpp"

using namespace mammopos;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

GrayImage random_image(int w, int h, int depth, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> px(0, depth == 8 ? 255 : 65535);
    GrayImage img = GrayImage::make(w, h, depth);
    for (auto& v : img.pixels) v = static_cast<float>(px(rng));
    return img;
}

void write_rgb_png(const fs::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, fp);
    png_set_IHDR(png, info, 2, 2, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    unsigned char row[6] = {255, 0, 0, 0, 255, 0};
    png_write_row(png, row);
    png_write_row(png, row);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

TEST_CASE("png round-trip preserves 8-bit pixels", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "img8.png";
    const GrayImage img = random_image(37, 29, 8, 1);
    save_image(path, img);
    const GrayImage back = load_image(path);
    CHECK(back.bit_depth == 8);
    CHECK(back == img);
}

TEST_CASE("png round-trip preserves 16-bit pixels", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "img16.png";
    const GrayImage img = random_image(21, 45, 16, 2);
    save_image(path, img);
    const GrayImage back = load_image(path);
    CHECK(back.bit_depth == 16);
    CHECK(back == img);
}

TEST_CASE("pgm round-trip preserves pixels at both depths", "[image_io]") {
    testutil::TempDir dir;
    for (int depth : {8, 16}) {
        const auto path = dir / ("img" + std::to_string(depth) + ".pgm");
        const GrayImage img = random_image(13, 17, depth, 3 + depth);
        save_image(path, img);
        const GrayImage back = load_image(path);
        CHECK(back.bit_depth == depth);
        CHECK(back == img);
    }
}

TEST_CASE("ascii pgm parses with comments and arbitrary whitespace", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "ascii.pgm";
    std::ofstream(path) << "P2 # comment\n# another\n 3 2\n255\n0 10 20\n30 40 50\n";
    const GrayImage img = load_image(path);
    REQUIRE(img.width == 3);
    REQUIRE(img.height == 2);
    CHECK(img.at(0, 0) == 0.0f);
    CHECK(img.at(2, 1) == 50.0f);
}

TEST_CASE("color png is rejected with the right failure kind", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "rgb.png";
    write_rgb_png(path);
    try {
        load_image(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::ColorUnsupported);
    }
}

TEST_CASE("truncated png is rejected as malformed", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "trunc.png";
    save_image(path, random_image(64, 64, 8, 4));
    const auto full = fs::file_size(path);
    fs::resize_file(path, full / 2);
    try {
        load_image(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::Malformed);
    }
}

TEST_CASE("unrecognized bytes are rejected as unknown format", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "noise.bin";
    std::ofstream(path, std::ios::binary) << "not an image at all";
    try {
        load_image(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::UnknownFormat);
    }
    CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
}

TEST_CASE("sidecar metadata feeds spacing into the loaded image", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "spaced.png";
    save_image(path, random_image(8, 8, 8, 5));

    CHECK_FALSE(load_image(path).spacing_mm_per_px.has_value());

    SidecarMeta meta;
    meta.spacing_mm_per_px = 0.07;
    meta.laterality = Laterality::Right;
    meta.view = ViewKind::Mlo;
    write_sidecar(path, meta);

    const GrayImage img = load_image(path);
    REQUIRE(img.spacing_mm_per_px.has_value());
    CHECK(*img.spacing_mm_per_px == Approx(0.07));

    const SidecarMeta back = read_sidecar(path);
    CHECK(back.laterality == Laterality::Right);
    CHECK(back.view == ViewKind::Mlo);
}

TEST_CASE("sidecar validation rejects bad values", "[image_io]") {
    testutil::TempDir dir;
    const auto path = dir / "img.png";
    save_image(path, random_image(4, 4, 8, 6));

    std::ofstream(sidecar_path(path)) << "spacing_mm_per_px = -1\n";
    CHECK_THROWS_AS(read_sidecar(path), ValidationError);

    std::ofstream(sidecar_path(path), std::ios::trunc) << "laterality = X\n";
    CHECK_THROWS_AS(read_sidecar(path), ValidationError);

    // unknown keys and comments are fine
    std::ofstream(sidecar_path(path), std::ios::trunc)
        << "# note\nfoo = bar\nview = CC\n";
    CHECK(read_sidecar(path).view == ViewKind::Cc);
}

TEST_CASE("save_image rejects unsupported targets", "[image_io]") {
    testutil::TempDir dir;
    CHECK_THROWS_AS(save_image(dir / "img.tiff", random_image(4, 4, 8, 7)), ContractError);
    CHECK_THROWS_AS(save_image(dir / "img.png", GrayImage{}), ContractError);
}
