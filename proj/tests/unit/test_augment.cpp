#include "tempdir.hpp"

#include "segpipe/augment.hpp"
#include "segpipe/error.hpp"
#include "segpipe/synthetic.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

using namespace segpipe;
namespace fs = std::filesystem;

namespace {

Polygon rect(double x0, double y0, double x1, double y1, int w, int h) {
    return Polygon{{{x0 / w, y0 / h}, {x1 / w, y0 / h}, {x1 / w, y1 / h}, {x0 / w, y1 / h}},
                   CoordinateSpace::Normalized};
}

ImageRecord record(const std::string& id, int w, int h, std::vector<InstanceAnnotation> inst) {
    ImageRecord r;
    r.image_id = id;
    r.patient_id = id;
    r.width = w;
    r.height = h;
    r.instances = std::move(inst);
    return r;
}

// 10x1 patch of value 200, centroid (5, 0.5).
DonorPatch bar_patch() {
    DonorPatch p;
    p.class_id = ClassId::Csp;
    p.pixels = GrayImage(10, 1, 200);
    p.mask = BinaryMask(10, 1);
    for (int c = 0; c < 10; ++c) p.mask.set(c, 0);
    p.centroid = centroid(p.mask);
    return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return out;
}

}  // namespace

TEST_CASE("categorize") {
    const int w = 20, h = 20;
    const auto brain = InstanceAnnotation{ClassId::Brain, rect(2, 2, 18, 18, w, h)};
    const auto csp = InstanceAnnotation{ClassId::Csp, rect(8, 6, 11, 9, w, h)};
    const auto lv = InstanceAnnotation{ClassId::Lv, rect(10, 10, 13, 14, w, h)};
    const std::vector<ImageRecord> recs{
        record("a", w, h, {brain}),           record("b", w, h, {brain, csp, lv}), record("c", w, h, {csp}),
        record("d", w, h, {brain, lv}),       record("e", w, h, {brain}),          record("f", w, h, {}),
        record("g", w, h, {brain, csp, csp}), record("h", w, h, {brain, brain}),   record("i", w, h, {brain}),
        record("j", w, h, {brain, lv, lv}),
    };
    const DonorPool pool = categorize(recs);
    CHECK(pool.acceptors == std::vector<std::size_t>{0, 4, 8});
    CHECK(pool.csp_donors == std::vector<DonorEntry>{{1, 1}, {6, 1}, {6, 2}});
    CHECK(pool.lv_donors == std::vector<DonorEntry>{{1, 2}, {3, 1}, {9, 1}, {9, 2}});
}

TEST_CASE("compute_offset") {
    const int w = 40, h = 40;
    const auto brain = InstanceAnnotation{ClassId::Brain, rect(10, 10, 30, 30, w, h)};
    const auto centered = InstanceAnnotation{ClassId::Csp, rect(18, 18, 22, 22, w, h)};
    const auto shifted = InstanceAnnotation{ClassId::Lv, rect(28, 23, 32, 27, w, h)};
    const ImageRecord donor = record("d", w, h, {brain, centered, shifted});
    const Offset zero = compute_offset(donor, 1);
    CHECK(zero.dx == 0.0);
    CHECK(zero.dy == 0.0);
    const Offset o = compute_offset(donor, 2);
    CHECK(o.dx == doctest::Approx(10.0));
    CHECK(o.dy == doctest::Approx(5.0));
    try {
        compute_offset(record("x", w, h, {centered}), 0);
        FAIL("expected MissingBrain");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingBrain);
    }
}

TEST_CASE("paste: blending, overlap threshold and rejection") {
    const int w = 20, h = 10;
    // Brain covers columns 0..9; its centroid is (5, 5).
    const ImageRecord acc = record("acc", w, h, {{ClassId::Brain, rect(0, 0, 10, 10, w, h)}});
    const GrayImage img(w, h, 100);
    const DonorPatch patch = bar_patch();

    SUBCASE("fully inside") {
        const PasteResult r = paste(acc, img, patch, PasteSpec{{0.0, 0.5}});
        REQUIRE(r.accepted());
        CHECK(r.overlap == 1.0);
        CHECK(r.pasted_mask.count() == 10);
        for (int c = 0; c < w; ++c) {
            for (int row = 0; row < h; ++row) {
                const bool in = row == 5 && c >= 0 && c < 10;
                CHECK(r.image.at(c, row) == (in ? 195 : 100));
            }
        }
        REQUIRE(r.labels.size() == 1);
        CHECK(r.labels[0].class_id == ClassId::Csp);
        CHECK(rasterize(r.labels[0].polygon, w, h) == r.pasted_mask);
    }
    SUBCASE("exactly 70% inside is accepted") {
        const PasteResult r = paste(acc, img, patch, PasteSpec{{3.0, 0.5}});
        CHECK(r.overlap == 0.7);
        CHECK(r.accepted());
    }
    SUBCASE("60% and 50% inside are rejected") {
        for (double dx : {4.0, 5.0}) {
            const PasteResult r = paste(acc, img, patch, PasteSpec{{dx, 0.5}});
            CHECK(r.verdict == PasteVerdict::LowOverlap);
            CHECK(r.image == img);
            CHECK(r.labels.empty());
        }
    }
    SUBCASE("clipped pixels count against the overlap") {
        // Columns -6..3: 4 in frame and inside the brain, 6 out of frame.
        const PasteResult r = paste(acc, img, patch, PasteSpec{{-6.0, 0.5}});
        CHECK(r.overlap == doctest::Approx(0.4));
        CHECK_FALSE(r.accepted());
    }
    SUBCASE("collision with an earlier paste") {
        BinaryMask occupied(w, h);
        occupied.set(4, 5);
        const PasteResult r = paste(acc, img, patch, PasteSpec{{0.0, 0.5}}, &occupied);
        CHECK(r.verdict == PasteVerdict::Collision);
        CHECK(r.image == img);
    }
    SUBCASE("acceptor without brain") {
        const ImageRecord none = record("n", w, h, {});
        CHECK_THROWS_AS(paste(none, img, patch, PasteSpec{}), Error);
    }
}

TEST_CASE("blend_weight quantizes alpha") {
    CHECK(blend_weight(0.95) == 9500);
    CHECK(blend_weight(1.0) == 10000);
    CHECK(blend_weight(0.5) == 5000);
    CHECK_THROWS_AS(blend_weight(0.0), Error);
    CHECK_THROWS_AS(blend_weight(1.5), Error);
}

TEST_CASE("run_offline: empty train dir") {
    testing::TempDir dir("aug_empty");
    const AugmentationReport r = run_offline(dir.path(), {}, 42);
    CHECK(r.attempts() == 0);
    CHECK(r.accepted() == 0);
    CHECK(fs::exists(dir.path() / kMarkerFile));
}

TEST_CASE("run_offline: idempotent, deterministic across worker counts, originals untouched") {
    testing::TempDir a("aug_a"), b("aug_b");
    FixtureOptions opt;
    opt.patients = 8;
    opt.min_frames = 2;
    opt.max_frames = 2;
    const auto recs = synthetic_records(opt, 5);
    write_fixture(a.path(), recs, 5);
    write_fixture(b.path(), recs, 5);
    const auto originals = snapshot(a.path());

    AugmentConfig one;
    one.jobs = 1;
    AugmentConfig many;
    many.jobs = 4;
    const AugmentationReport ra = run_offline(a.path(), one, 42);
    const AugmentationReport rb = run_offline(b.path(), many, 42);
    CHECK(ra.accepted() > 0);
    CHECK(ra.to_json() == rb.to_json());
    const auto after = snapshot(a.path());
    CHECK(after == snapshot(b.path()));
    for (const auto& [path, bytes] : originals) CHECK(after.at(path) == bytes);

    std::size_t aug_images = 0, pasted = 0;
    for (const auto& [path, bytes] : after) {
        if (path.ends_with("_aug.png")) ++aug_images;
        if (path.ends_with("_aug.txt")) {
            const std::string base = fs::path(path).filename().string();
            const std::string orig = "labels/" + base.substr(0, base.size() - 8) + ".txt";
            const auto n_lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
            pasted += static_cast<std::size_t>(n_lines(bytes) - n_lines(originals.at(orig)));
        }
    }
    CHECK(aug_images == ra.augmented_images);
    CHECK(pasted == ra.accepted());

    const AugmentationReport again = run_offline(a.path(), one, 42);
    CHECK(again.already_augmented);
    CHECK(again.accepted() == ra.accepted());
    CHECK(snapshot(a.path()) == after);

    fs::remove(a.path() / kMarkerFile);
    const AugmentationReport redo = run_offline(a.path(), one, 42);
    CHECK(redo.accepted() == ra.accepted());
    CHECK(snapshot(a.path()) == after);
}

TEST_CASE("augmentation report JSON round trip") {
    AugmentationReport r;
    r.seed = 9;
    r.csp = {10, 7, 3};
    r.lv = {10, 6, 4};
    r.acceptors = 10;
    r.augmented_images = 9;
    const AugmentationReport back = AugmentationReport::from_json(r.to_json());
    CHECK(back.seed == 9);
    CHECK(back.csp == r.csp);
    CHECK(back.lv == r.lv);
    CHECK(back.acceptors == 10);
    CHECK(back.augmented_images == 9);
}
