#include "oracles.hpp"

#include "segpipe/error.hpp"
#include "segpipe/geometry.hpp"

#include <doctest.h>

#include <cmath>

using namespace segpipe;

namespace {

BinaryMask from_rows(const std::vector<std::string>& rows) {
    BinaryMask m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
    for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c) m.set(c, r, rows[r][c] == '#');
    return m;
}

BinaryMask union_of(const std::vector<Polygon>& polys, int w, int h) {
    BinaryMask out(w, h);
    for (const auto& p : polys) {
        const BinaryMask m = rasterize(p, w, h);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                if (m.at(c, r)) out.set(c, r);
    }
    return out;
}

}  // namespace

TEST_CASE("rasterize: normalized unit square covers a 2x2 grid") {
    const Polygon sq{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, CoordinateSpace::Normalized};
    const BinaryMask m = rasterize(sq, 2, 2);
    CHECK(m.count() == 4);
}

TEST_CASE("rasterize: preconditions") {
    CHECK_THROWS_AS(rasterize(Polygon{{{0, 0}, {1, 1}}, CoordinateSpace::Pixel}, 4, 4), Error);
    try {
        rasterize(Polygon{{{0, 0}, {1, 1}}, CoordinateSpace::Pixel}, 4, 4);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DegeneratePolygon);
    }
    const Polygon tri{{{0, 0}, {4, 0}, {0, 4}}, CoordinateSpace::Pixel};
    try {
        rasterize(tri, 0, 4);
        FAIL("expected InvalidDimensions");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidDimensions);
    }
}

TEST_CASE("rasterize: triangle matches the per-pixel oracle") {
    const std::vector<Point> v{{0, 0}, {4, 0}, {0, 4}};
    const BinaryMask got = rasterize(Polygon{v, CoordinateSpace::Pixel}, 4, 4);
    CHECK(got == oracle::rasterize_winding(v, 4, 4));
    // Centers strictly below the hypotenuse x + y < 4.
    CHECK(got.count() == 6);
}

TEST_CASE("rasterize: random convex and star polygons match the winding oracle") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const auto v = t % 2 ? oracle::random_star(rng, 40, 30) : oracle::random_convex(rng, 40, 30);
        CHECK(rasterize(Polygon{v, CoordinateSpace::Pixel}, 40, 30) == oracle::rasterize_winding(v, 40, 30));
    }
}

TEST_CASE("rasterize: even-odd leaves the core of a self-overlapping pentagram empty") {
    std::vector<Point> star;
    for (int k = 0; k < 5; ++k) {
        const double a = -M_PI / 2 + k * 4 * M_PI / 5;
        star.push_back({20 + 18 * std::cos(a), 20 + 18 * std::sin(a)});
    }
    const BinaryMask m = rasterize(Polygon{star, CoordinateSpace::Pixel}, 40, 40);
    CHECK_FALSE(m.at(20, 20));
    CHECK(oracle::winding_number(star, 20.5, 20.5) != 0);
}

TEST_CASE("extract_contours") {
    SUBCASE("empty mask") { CHECK(extract_contours(BinaryMask(5, 5)).empty()); }
    SUBCASE("3x3 block in 5x5") {
        const BinaryMask m = from_rows({".....", ".###.", ".###.", ".###.", "....."});
        const auto polys = extract_contours(m);
        REQUIRE(polys.size() == 1);
        CHECK(polys[0].vertices.size() == 4);
        CHECK(oracle::iou(rasterize(polys[0], 5, 5), m) >= 0.95);
    }
    SUBCASE("two disjoint blocks") {
        const BinaryMask m = from_rows({"##...", "##...", ".....", "...##", "...##"});
        CHECK(extract_contours(m).size() == 2);
        CHECK(label_components(m).count == 2);
    }
    SUBCASE("diagonal neighbours form one 8-connected component") {
        const BinaryMask m = from_rows({"#...", ".#..", "..#.", "...."});
        const auto polys = extract_contours(m);
        CHECK(polys.size() == 1);
        CHECK(label_components(m).count == 1);
        CHECK(union_of(polys, 4, 4) == m);
    }
    SUBCASE("concave shapes and single pixels round-trip exactly") {
        const BinaryMask m = from_rows({"###.###.", "#.....#.", "#.###.#.", "#.#.#.#.", "###.###.", "........",
                                        "......#."});
        CHECK(union_of(extract_contours(m), 8, 7) == m);
    }
    SUBCASE("random blobs") {
        Rng rng(5);
        for (int t = 0; t < 300; ++t) {
            BinaryMask m(10, 9);
            const double p = rng.uniform(0.2, 0.8);
            for (int r = 0; r < 9; ++r)
                for (int c = 0; c < 10; ++c) m.set(c, r, rng.uniform() < p);
            // Holes are filled by outer-boundary tracing, so compare against
            // the mask with enclosed background filled in.
            const auto polys = extract_contours(m);
            CHECK(static_cast<int>(polys.size()) == label_components(m).count);
            const BinaryMask back = union_of(polys, 10, 9);
            for (int r = 0; r < 9; ++r)
                for (int c = 0; c < 10; ++c)
                    if (m.at(c, r)) CHECK(back.at(c, r));
        }
    }
}

TEST_CASE("mask_iou and mask_dsc") {
    const BinaryMask left = from_rows({"##..", "##..", "##..", "##.."});
    const BinaryMask top = from_rows({"####", "####", "....", "...."});
    CHECK(mask_iou(left, left) == 1.0);
    CHECK(mask_dsc(left, left) == 1.0);
    CHECK(mask_iou(left, from_rows({"..##", "..##", "..##", "..##"})) == 0.0);
    CHECK(mask_iou(left, top) == doctest::Approx(4.0 / 12.0).epsilon(1e-15));
    CHECK(mask_dsc(left, top) == 0.5);
    CHECK(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)) == 0.0);
    CHECK(mask_dsc(BinaryMask(3, 3), BinaryMask(3, 3)) == 0.0);
    try {
        mask_iou(BinaryMask(3, 3), BinaryMask(3, 4));
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DimensionMismatch);
    }
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        BinaryMask a(7, 5), b(7, 5);
        for (int i = 0; i < 35; ++i) {
            a.set(i % 7, i / 7, rng.uniform() < 0.4);
            b.set(i % 7, i / 7, rng.uniform() < 0.6);
        }
        CHECK(mask_iou(a, b) == mask_iou(b, a));
        CHECK(mask_dsc(a, b) == mask_dsc(b, a));
        CHECK(mask_iou(a, b) == doctest::Approx(oracle::iou(a, b)).epsilon(1e-15));
        CHECK(mask_dsc(a, b) == doctest::Approx(oracle::dsc(a, b)).epsilon(1e-15));
    }
}

TEST_CASE("centroid") {
    BinaryMask one(5, 5);
    one.set(3, 2);
    CHECK(centroid(one) == Point{3.5, 2.5});
    BinaryMask full(4, 4);
    for (int i = 0; i < 16; ++i) full.set(i % 4, i / 4);
    CHECK(centroid(full) == Point{2.0, 2.0});
    const BinaryMask l = from_rows({"#.", "##"});
    CHECK(centroid(l).x == doctest::Approx(2.5 / 3));
    CHECK(centroid(l).y == doctest::Approx(3.5 / 3));
    CHECK_THROWS_AS(centroid(BinaryMask(2, 2)), Error);
}

TEST_CASE("resize_bilinear") {
    SoftMask m(3, 2);
    m.values = {0.1, 0.5, 0.9, 0.0, 1.0, 0.3};
    CHECK(resize_bilinear(m, 3, 2).values == m.values);

    SoftMask c(5, 4, 0.7);
    for (auto [w, h] : {std::pair{9, 7}, std::pair{2, 2}, std::pair{1, 1}, std::pair{13, 3}}) {
        const SoftMask r = resize_bilinear(c, w, h);
        for (double v : r.values) CHECK(v == 0.7);
    }

    SoftMask ramp(2, 1);
    ramp.values = {0.0, 1.0};
    const SoftMask r = resize_bilinear(ramp, 4, 1);
    // Corner-aligned: sample positions 0, 1/3, 2/3, 1 of the source span.
    CHECK(r.values[0] == 0.0);
    CHECK(r.values[1] == doctest::Approx(1.0 / 3));
    CHECK(r.values[2] == doctest::Approx(2.0 / 3));
    CHECK(r.values[3] == 1.0);

    Rng rng(9);
    SoftMask noise(6, 5);
    for (double& v : noise.values) v = rng.uniform();
    for (double v : resize_bilinear(noise, 17, 11).values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(resize_bilinear(noise, 0, 3), Error);
}

TEST_CASE("polygon coordinate spaces") {
    const Polygon p{{{0.25, 0.5}, {0.75, 0.5}, {0.5, 1.0}}, CoordinateSpace::Normalized};
    const Polygon px = p.to_pixels(8, 4);
    CHECK(px.space == CoordinateSpace::Pixel);
    CHECK(px.vertices[0] == Point{2.0, 2.0});
    CHECK(px.to_normalized(8, 4).vertices == p.vertices);
    CHECK(std::abs(px.area()) == doctest::Approx(4.0));
}
