#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "mammopos/annotation.hpp"

using namespace mammopos;
using nlohmann::json;

namespace {

json mlo_fixture() {
    return json{
        {"version", "5.2.1"},
        {"flags", {{"MLO", true}, {"L", true}}},
        {"shapes",
         {{{"label", "pec"},
           {"points", {{200.0, 10.0}, {180.0, 240.0}}},
           {"shape_type", "line"}},
          {{"label", "pnl"},
           {"points", {{50.0, 100.0}, {210.0, 95.0}}},
           {"shape_type", "line"}}}},
        {"imagePath", "case01_LMLO.png"},
        {"imageWidth", 250},
        {"imageHeight", 250}};
}

}  // namespace

TEST_CASE("parses an MLO document with pec and pnl lines", "[annotation]") {
    const ViewAnnotation ann = parse_annotation(mlo_fixture());
    CHECK(ann.view == ViewKind::Mlo);
    CHECK(ann.laterality == Laterality::Left);
    REQUIRE(ann.pec.has_value());
    REQUIRE(ann.pnl.has_value());
    CHECK(ann.pec->p0() == Point{200, 10});
    CHECK(ann.pec->p1() == Point{180, 240});
    CHECK(ann.pnl->p0() == Point{50, 100});
    CHECK(ann.image_dims.width == 250);
    CHECK(ann.ignored_shapes == 0);
}

TEST_CASE("cc documents carry pnl and tag but no pec", "[annotation]") {
    json doc = mlo_fixture();
    doc["flags"] = {{"CC", true}, {"R", true}};
    doc["shapes"] = json::array(
        {{{"label", "pnl"}, {"points", {{30.0, 120.0}, {190.0, 118.0}}}, {"shape_type", "line"}},
         {{"label", "tag"},
          {"points", {{5.0, 5.0}, {40.0, 30.0}}},
          {"shape_type", "rectangle"}}});
    const ViewAnnotation ann = parse_annotation(doc);
    CHECK(ann.view == ViewKind::Cc);
    CHECK(ann.laterality == Laterality::Right);
    CHECK_FALSE(ann.pec.has_value());
    REQUIRE(ann.tag_box.has_value());
    CHECK(ann.tag_box->corner1 == Point{40, 30});
}

TEST_CASE("validation failures name the offending shape", "[annotation]") {
    SECTION("MLO without pec") {
        json doc = mlo_fixture();
        doc["shapes"].erase(0);
        CHECK_THROWS_WITH(parse_annotation(doc), Catch::Matchers::ContainsSubstring("pec"));
    }
    SECTION("missing pnl") {
        json doc = mlo_fixture();
        doc["shapes"].erase(1);
        CHECK_THROWS_WITH(parse_annotation(doc), Catch::Matchers::ContainsSubstring("pnl"));
    }
    SECTION("point outside the image") {
        json doc = mlo_fixture();
        doc["shapes"][1]["points"][1][0] = 250.0;  // == width, one past the last pixel
        CHECK_THROWS_WITH(parse_annotation(doc), Catch::Matchers::ContainsSubstring("pnl"));
    }
    SECTION("degenerate line") {
        json doc = mlo_fixture();
        doc["shapes"][1]["points"][1] = doc["shapes"][1]["points"][0];
        CHECK_THROWS_AS(parse_annotation(doc), ValidationError);
    }
    SECTION("pec on a CC view") {
        json doc = mlo_fixture();
        doc["flags"] = {{"CC", true}, {"L", true}};
        CHECK_THROWS_WITH(parse_annotation(doc), Catch::Matchers::ContainsSubstring("pec"));
    }
    SECTION("no view identity anywhere") {
        json doc = mlo_fixture();
        doc["flags"] = json::object();
        doc["imagePath"] = "scan_0001.png";
        CHECK_THROWS_AS(parse_annotation(doc), ValidationError);
    }
}

TEST_CASE("unknown labels are counted, not fatal", "[annotation]") {
    json doc = mlo_fixture();
    doc["shapes"].push_back(
        {{"label", "calcification"}, {"points", {{10.0, 10.0}}}, {"shape_type", "point"}});
    const ViewAnnotation ann = parse_annotation(doc);
    CHECK(ann.ignored_shapes == 1);
    REQUIRE(ann.pec.has_value());
}

TEST_CASE("view identity falls back to filename tokens", "[annotation]") {
    json doc = mlo_fixture();
    doc["flags"] = json::object();
    doc["imagePath"] = "Mammo_133_RMLO_P_1.png";
    const ViewAnnotation ann = parse_annotation(doc);
    CHECK(ann.view == ViewKind::Mlo);
    CHECK(ann.laterality == Laterality::Right);

    doc["imagePath"] = "study/Mammo_007_lcc_2.png";
    doc["shapes"].erase(0);  // drop pec, this one is a CC view now
    const ViewAnnotation cc = parse_annotation(doc);
    CHECK(cc.view == ViewKind::Cc);
    CHECK(cc.laterality == Laterality::Left);
}

TEST_CASE("serialization round-trips and is deterministic", "[annotation]") {
    const ViewAnnotation ann = parse_annotation(mlo_fixture());
    const auto doc = serialize_annotation(ann);
    const ViewAnnotation back = parse_annotation(doc);
    CHECK(back == ann);
    CHECK(serialize_annotation(ann).dump(2) == doc.dump(2));
}

TEST_CASE("serialization omits absent optionals", "[annotation]") {
    ViewAnnotation ann;
    ann.view = ViewKind::Cc;
    ann.laterality = Laterality::Left;
    ann.pnl = Segment(Point{10, 20}, Point{200, 30});
    ann.image_dims = Bounds{250, 250};
    const std::string text = serialize_annotation(ann).dump(2);
    CHECK(text.find("pec") == std::string::npos);
    CHECK(text.find("tag") == std::string::npos);
    CHECK(parse_annotation(nlohmann::json::parse(text)) == ann);
}

TEST_CASE("round-trip identity holds for randomized annotations", "[annotation]") {
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> coord(0.0, 249.0);
    auto rand_point = [&] { return Point{coord(rng), coord(rng)}; };
    auto rand_segment = [&] {
        while (true) {
            const Point a = rand_point();
            const Point b = rand_point();
            if (distance(a, b) > 1.0) return Segment(a, b);
        }
    };
    for (int i = 0; i < 200; ++i) {
        ViewAnnotation ann;
        ann.image_dims = Bounds{250, 250};
        ann.view = (i % 2 == 0) ? ViewKind::Mlo : ViewKind::Cc;
        ann.laterality = (i % 3 == 0) ? Laterality::Left : Laterality::Right;
        ann.pnl = rand_segment();
        if (ann.view == ViewKind::Mlo) ann.pec = rand_segment();
        if (i % 4 == 0) ann.tag_box = TagBox{rand_point(), rand_point()};
        const ViewAnnotation back = parse_annotation(serialize_annotation(ann));
        CHECK(back == ann);
    }
}

TEST_CASE("annotation files load and save through disk", "[annotation]") {
    testutil::TempDir dir;
    const auto path = dir / "view.json";
    const ViewAnnotation ann = parse_annotation(mlo_fixture());
    save_annotation(path, ann);
    CHECK(load_annotation(path) == ann);

    std::ofstream(path, std::ios::trunc) << "{ not json";
    CHECK_THROWS_AS(load_annotation(path), FormatError);
    CHECK_THROWS_AS(load_annotation(dir / "absent.json"), IoError);
}
