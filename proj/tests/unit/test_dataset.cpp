#include "oracles.hpp"
#include "tempdir.hpp"

#include "segpipe/dataset.hpp"
#include "segpipe/error.hpp"
#include "segpipe/synthetic.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace segpipe;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no exception");
    return Errc::InvariantViolation;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<ImageRecord> single_image_patients(int n) {
    std::vector<ImageRecord> out;
    for (int i = 0; i < n; ++i) {
        ImageRecord r;
        r.image_id = std::to_string(1000 + i) + "_HC";
        r.patient_id = std::to_string(1000 + i);
        r.width = r.height = 32;
        r.instances.push_back({ClassId::Brain, ellipse({0.5, 0.5}, 0.3, 0.3, 0.0)});
        if (i % 3 == 0) r.instances.push_back({ClassId::Csp, ellipse({0.5, 0.4}, 0.05, 0.05, 0.0)});
        if (i % 4 == 0) r.instances.push_back({ClassId::Lv, ellipse({0.55, 0.55}, 0.05, 0.06, 0.0)});
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

TEST_CASE("parse_label_file") {
    const auto sq = parse_label_file("0 0.0 0.0 1.0 0.0 1.0 1.0 0.0 1.0", 4, 4);
    REQUIRE(sq.size() == 1);
    CHECK(sq[0].class_id == ClassId::Brain);
    CHECK(sq[0].polygon.space == CoordinateSpace::Normalized);
    CHECK(rasterize(sq[0].polygon, 4, 4).count() == 16);

    CHECK(code_of([] { parse_label_file("3 0.1 0.1 0.2 0.1 0.2 0.2", 4, 4); }) == Errc::MalformedLine);
    CHECK(code_of([] { parse_label_file("1 0.1 0.1 0.2 0.1 0.2", 4, 4); }) == Errc::MalformedLine);
    CHECK(code_of([] { parse_label_file("1 0.1 0.1 0.2 0.1", 4, 4); }) == Errc::MalformedLine);
    CHECK(code_of([] { parse_label_file("1 0.1 0.1 1.2 0.1 0.2 0.2", 4, 4); }) == Errc::MalformedLine);
    CHECK(code_of([] { parse_label_file("x 0.1 0.1 0.2 0.1 0.2 0.2", 4, 4); }) == Errc::MalformedLine);
    CHECK(code_of([] { parse_label_file("1.5 0.1 0.1 0.2 0.1 0.2 0.2", 4, 4); }) == Errc::MalformedLine);
    try {
        parse_label_file("0 0 0 1 0 1 1\n\n2 0.1 0.1 0.2 nope 0.2 0.2\n", 4, 4);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    const std::string two = "1 0.1 0.2 0.6 0.25 0.3 0.7\n2 0.5 0.5 0.9 0.5 0.9 0.9 0.5 0.9\n";
    const auto inst = parse_label_file(two, 20, 16);
    REQUIRE(inst.size() == 2);
    CHECK(inst[0].class_id == ClassId::Csp);
    CHECK(inst[1].class_id == ClassId::Lv);
    for (const auto& a : inst) {
        std::vector<Point> px;
        for (const Point& p : a.polygon.vertices) px.push_back({p.x * 20, p.y * 16});
        CHECK(rasterize(a.polygon, 20, 16) == oracle::rasterize_winding(px, 20, 16));
    }
}

TEST_CASE("label serialization round trip") {
    const auto records = synthetic_records({}, 3);
    for (const auto& r : records) {
        const std::string text = serialize_label_file(r.instances);
        const auto back = parse_label_file(text, r.width, r.height);
        REQUIRE(back.size() == r.instances.size());
        for (std::size_t i = 0; i < back.size(); ++i) {
            CHECK(back[i].class_id == r.instances[i].class_id);
            for (std::size_t k = 0; k < back[i].polygon.vertices.size(); ++k) {
                CHECK(std::abs(back[i].polygon.vertices[k].x - r.instances[i].polygon.vertices[k].x) <= 5e-7);
                CHECK(std::abs(back[i].polygon.vertices[k].y - r.instances[i].polygon.vertices[k].y) <= 5e-7);
            }
        }
        CHECK(serialize_label_file(back) == text);
    }
}

TEST_CASE("extract_patient_id") {
    CHECK(extract_patient_id("123_HC.png") == "123");
    CHECK(extract_patient_id("123_2HC.png") == "123");
    CHECK(extract_patient_id("dir/045_3HC.png") == "045");
    CHECK(code_of([] { extract_patient_id("scan.png"); }) == Errc::NoMatch);
    CHECK(code_of([] { extract_patient_id("123_HC.png", R"(\d+)"); }) == Errc::InvalidPattern);
    CHECK(code_of([] { extract_patient_id("123_HC.png", R"((\d+)_(\d*)HC)"); }) == Errc::InvalidPattern);
    CHECK(code_of([] { extract_patient_id("123_HC.png", R"(([)"); }) == Errc::InvalidPattern);
    CHECK(extract_patient_id("p17-frame2.png", R"(p(\d+)-)") == "17");
    for (const auto& r : synthetic_records({}, 1)) CHECK(extract_patient_id(r.image_id + ".png") == r.patient_id);
}

TEST_CASE("stratified_patient_split: 100 single-image patients") {
    const auto records = single_image_patients(100);
    const SplitAssignment a = stratified_patient_split(records, {}, 42);
    const auto imgs = a.images(records);
    CHECK(std::abs(static_cast<int>(imgs[0].size()) - 70) <= 5);
    CHECK(std::abs(static_cast<int>(imgs[1].size()) - 15) <= 5);
    CHECK(std::abs(static_cast<int>(imgs[2].size()) - 15) <= 5);
    CHECK(imgs[0].size() + imgs[1].size() + imgs[2].size() == 100);
    CHECK(stratified_patient_split(records, {}, 42).patient_split == a.patient_split);
}

TEST_CASE("stratified_patient_split: leakage, coverage, order invariance") {
    Rng rng(77);
    for (int t = 0; t < 30; ++t) {
        FixtureOptions opt;
        opt.patients = 3 + static_cast<int>(rng.uniform_index(60));
        opt.max_frames = 4;
        auto records = synthetic_records(opt, rng.next_u64());
        const std::uint64_t seed = rng.next_u64();
        const SplitAssignment a = stratified_patient_split(records, {}, seed);
        std::set<std::string> patients;
        for (const auto& r : records) patients.insert(r.patient_id);
        CHECK(a.patient_split.size() == patients.size());
        const auto imgs = a.images(records);
        std::set<std::string> all;
        for (const auto& s : imgs) {
            CHECK_FALSE(s.empty());
            for (const auto& id : s) CHECK(all.insert(id).second);
        }
        CHECK(all.size() == records.size());
        rng.shuffle(records);
        CHECK(stratified_patient_split(records, {}, seed).patient_split == a.patient_split);
    }
}

TEST_CASE("stratified_patient_split: preconditions") {
    CHECK(code_of([] { stratified_patient_split(single_image_patients(2), {}, 1); }) == Errc::TooFewPatients);
    CHECK(code_of([] { stratified_patient_split(single_image_patients(10), {0.5, 0.2, 0.2}, 1); }) ==
          Errc::InvalidRatios);
    CHECK(code_of([] { stratified_patient_split(single_image_patients(10), {1.2, -0.1, -0.1}, 1); }) ==
          Errc::InvalidRatios);
}

TEST_CASE("write_split_manifest") {
    testing::TempDir dir("manifest");
    const auto records = single_image_patients(3);
    const SplitAssignment a = stratified_patient_split(records, {}, 42);
    write_split_manifest(a, records, dir.path());
    std::size_t listed = 0;
    for (const char* f : {"train.txt", "val.txt", "test.txt"}) {
        REQUIRE(std::filesystem::exists(dir.path() / f));
        std::istringstream in(slurp(dir.path() / f));
        std::string line;
        while (std::getline(in, line)) listed += !line.empty();
    }
    CHECK(listed == 3);
    const auto j = nlohmann::json::parse(slurp(dir.path() / "split_manifest.json"));
    std::size_t images = 0, brain = 0;
    for (const char* s : {"train", "val", "test"}) {
        images += j["splits"][s]["image_count"].get<std::size_t>();
        brain += j["splits"][s]["class_counts"]["brain"].get<std::size_t>();
    }
    CHECK(images == j["totals"]["image_count"].get<std::size_t>());
    CHECK(brain == j["totals"]["class_counts"]["brain"].get<std::size_t>());
    CHECK(j["seed"].get<std::uint64_t>() == 42);

    const std::string before = slurp(dir.path() / "split_manifest.json");
    write_split_manifest(stratified_patient_split(records, {}, 42), records, dir.path());
    CHECK(slurp(dir.path() / "split_manifest.json") == before);
}

TEST_CASE("load_dataset") {
    testing::TempDir dir("load");
    FixtureOptions opt;
    opt.patients = 4;
    const auto records = synthetic_records(opt, 8);
    write_fixture(dir.path(), records, 8);
    const auto loaded = load_dataset(dir.path());
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].image_id == records[i].image_id);
        CHECK(loaded[i].patient_id == records[i].patient_id);
        CHECK(loaded[i].width == records[i].width);
        CHECK(loaded[i].class_counts() == records[i].class_counts());
    }
    {
        std::ofstream bad(dir.path() / "labels" / (records[0].image_id + ".txt"), std::ios::app);
        bad << "7 0.1 0.1 0.2 0.2 0.3 0.1\n";
    }
    try {
        load_dataset(dir.path());
        FAIL("expected MalformedLine");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MalformedLine);
        const std::string msg = e.what();
        CHECK(msg.find(records[0].image_id + ".txt") != std::string::npos);
        CHECK(msg.find("line") != std::string::npos);
    }
}
