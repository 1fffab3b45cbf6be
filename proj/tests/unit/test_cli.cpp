#include "cli.hpp"
#include "tempdir.hpp"

#include "segpipe/metrics.hpp"
#include "segpipe/synthetic.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace segpipe;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path make_fixture(const fs::path& dir, int patients = 12) {
    FixtureOptions opt;
    opt.patients = patients;
    opt.width = 48;
    opt.height = 36;
    const auto records = synthetic_records(opt, 5);
    write_fixture(dir, records, 5);
    return dir;
}

// Label files re-emitted as predictions with confidence 0.9.
void labels_to_predictions(const fs::path& labels, const fs::path& out_path) {
    std::ofstream out(out_path);
    for (const auto& entry : fs::directory_iterator(labels)) {
        std::istringstream lines(slurp(entry.path()));
        std::string line;
        while (std::getline(lines, line)) {
            std::istringstream fields(line);
            int cls = 0;
            if (!(fields >> cls)) continue;
            nlohmann::json j{{"image_id", entry.path().stem().string()}, {"class_id", cls}, {"confidence", 0.9}};
            std::vector<double> poly;
            for (double v; fields >> v;) poly.push_back(v);
            j["polygon"] = poly;
            out << j.dump() << "\n";
        }
    }
}

}  // namespace

TEST_CASE("argument errors exit 1") {
    CHECK(invoke({}).code == cli::kValidation);
    CHECK(invoke({"bogus"}).code == cli::kValidation);
    CHECK(invoke({"split"}).code == cli::kValidation);
    CHECK(invoke({"losscheck", "--size", "1"}).code == cli::kValidation);
    CHECK(invoke({"--help"}).code == cli::kOk);
}

TEST_CASE("split") {
    testing::TempDir tmp("cli_split");
    const fs::path data = make_fixture(tmp.path() / "data");
    const fs::path out = tmp.path() / "out";

    const Run first = invoke({"split", "--dataset-dir", data.string(), "--out-dir", out.string(), "--seed", "3"});
    REQUIRE(first.code == cli::kOk);
    CHECK(first.out.rfind("Split", 0) == 0);
    CHECK(first.out.find("All") != std::string::npos);
    for (const char* s : {"train", "val", "test"}) {
        CHECK(fs::is_directory(out / s / "images"));
        CHECK(fs::exists(out / (std::string(s) + ".txt")));
    }
    const std::string manifest = slurp(out / "split_manifest.json");

    SUBCASE("rerun writes identical bytes") {
        CHECK(invoke({"split", "--dataset-dir", data.string(), "--out-dir", out.string(), "--seed", "3"}).code == 0);
        CHECK(slurp(out / "split_manifest.json") == manifest);
    }
    SUBCASE("config file supplies the dataset and flags override it") {
        const fs::path cfg = tmp.path() / "cfg.json";
        std::ofstream(cfg) << nlohmann::json{{"dataset_dir", data.string()}, {"seed", 9}}.dump();
        const fs::path out2 = tmp.path() / "out2";
        CHECK(invoke({"split", "--config", cfg.string(), "--out-dir", out2.string(), "--seed", "3"}).code == 0);
        CHECK(slurp(out2 / "split_manifest.json") == manifest);
    }
    SUBCASE("malformed label names file and line") {
        const auto label = *fs::directory_iterator(data / "labels");
        std::ofstream(label.path(), std::ios::app) << "1 0.1 0.2 0.3\n";
        const Run bad = invoke({"split", "--dataset-dir", data.string(), "--out-dir", (tmp.path() / "o3").string()});
        CHECK(bad.code == cli::kValidation);
        CHECK(bad.err.find(label.path().filename().string()) != std::string::npos);
        CHECK(bad.err.find(":") != std::string::npos);
    }
    SUBCASE("bad ratios") {
        const Run bad = invoke({"split", "--dataset-dir", data.string(), "--out-dir", out.string(), "--train", "0.9"});
        CHECK(bad.code == cli::kValidation);
    }
    SUBCASE("missing dataset") {
        const Run bad = invoke({"split", "--dataset-dir", (tmp.path() / "none").string(), "--out-dir", out.string()});
        CHECK(bad.code == cli::kIo);
    }
}

TEST_CASE("augment") {
    testing::TempDir tmp("cli_augment");
    const fs::path data = make_fixture(tmp.path() / "data", 8);
    const fs::path out = tmp.path() / "out";
    REQUIRE(invoke({"split", "--dataset-dir", data.string(), "--out-dir", out.string()}).code == 0);
    const fs::path train = out / "train";

    const Run first = invoke({"augment", train.string(), "--jobs", "2"});
    REQUIRE(first.code == cli::kOk);
    CHECK(first.out.find("Accepted") != std::string::npos);
    CHECK(fs::exists(train / ".domain_augmented.json"));

    const Run again = invoke({"augment", train.string()});
    CHECK(again.code == cli::kOk);
    CHECK(again.out.find("already augmented") != std::string::npos);

    CHECK(invoke({"augment", (tmp.path() / "missing").string()}).code == cli::kIo);
    CHECK(invoke({"augment", train.string(), "--alpha", "1.5"}).code == cli::kValidation);

    const fs::path blocked = tmp.path() / "blocked";
    fs::create_directories(blocked);
    std::ofstream(blocked / "images") << "not a directory";
    CHECK(invoke({"augment", blocked.string()}).code == cli::kIo);

#ifndef _WIN32
    if (::geteuid() != 0) {
        const fs::path locked = out / "val";
        fs::permissions(locked / "images", fs::perms::owner_read | fs::perms::owner_exec);
        CHECK(invoke({"augment", locked.string()}).code == cli::kIo);
        fs::permissions(locked / "images", fs::perms::owner_all);
    }
#endif
}

TEST_CASE("losscheck") {
    const Run ok = invoke({"losscheck", "--trials", "5", "--size", "6"});
    CHECK(ok.code == cli::kOk);
    CHECK(ok.out.find("composite") != std::string::npos);
    CHECK(ok.out.find("FAIL") == std::string::npos);

    const Run broken = invoke({"losscheck", "--trials", "2", "--inject-fault"});
    CHECK(broken.code == cli::kInternal);
    CHECK(broken.out.find("FAIL") != std::string::npos);

    CHECK(invoke({"losscheck", "--trials", "0"}).code == cli::kValidation);

    for (const auto& row : cli::run_losscheck({3, 1, 5, false})) CHECK(row.passed);

    testing::TempDir tmp("cli_losscheck");
    std::ofstream(tmp.path() / "l.csv") << "2,2\n1,-1\n0.5,2\n";
    std::ofstream(tmp.path() / "t.csv") << "2,2\n1,0\n0,1\n";
    const Run one = invoke({"losscheck", "--logits", (tmp.path() / "l.csv").string(), "--target",
                         (tmp.path() / "t.csv").string(), "--class", "1"});
    REQUIRE(one.code == cli::kOk);
    const auto j = nlohmann::json::parse(one.out);
    CHECK(j.contains("total"));
    CHECK(invoke({"losscheck", "--logits", (tmp.path() / "l.csv").string()}).code == cli::kValidation);
}

TEST_CASE("optdemo") {
    const Run big = invoke({"optdemo", "--steps", "20"});
    CHECK(big.code == cli::kOk);
    CHECK(big.out.rfind("MuSGD lr=0.01 (I=49800 > 10000)", 0) == 0);
    const Run small = invoke({"optdemo", "--epochs", "300", "--n-train", "336", "--steps", "20"});
    CHECK(small.out.rfind("AdamW lr=0.001429 (I=6300 <= 10000)", 0) == 0);

    testing::TempDir tmp("cli_optdemo");
    CHECK(invoke({"optdemo", "--optimizer", "adamw", "--epochs", "10", "--steps", "5", "--out-dir", tmp.path().string()})
              .code == cli::kOk);
    const std::string lr = slurp(tmp.path() / "lr.csv");
    CHECK(lr.rfind("epoch,lr\n0,0.01\n", 0) == 0);
    CHECK(std::count(lr.begin(), lr.end(), '\n') == 12);
    CHECK(slurp(tmp.path() / "loss.csv").rfind("step,loss\n", 0) == 0);

    CHECK(invoke({"optdemo", "--problem", "nope"}).code == cli::kValidation);
    CHECK(invoke({"optdemo", "--optimizer", "sgd"}).code == cli::kValidation);
    CHECK(invoke({"optdemo", "--batch", "0"}).code == cli::kValidation);
}

TEST_CASE("evaluate") {
    testing::TempDir tmp("cli_evaluate");
    const fs::path data = make_fixture(tmp.path() / "data", 6);
    const fs::path preds = tmp.path() / "p.jsonl";
    labels_to_predictions(data / "labels", preds);
    const fs::path out = tmp.path() / "out";

    const Run self = invoke({"evaluate", "--gt-dir", data.string(), "--predictions", preds.string(), "--out-dir",
                          out.string()});
    REQUIRE(self.code == cli::kOk);
    const auto j = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(j["macro"]["map50"].get<double>() == 1.0);
    CHECK(j["macro"]["map5095"].get<double>() == 1.0);
    CHECK(fs::exists(out / "report.txt"));
    CHECK(fs::exists(out / "ap_per_threshold.csv"));

    // Sizes from PNG headers give the same result.
    fs::remove(data / "image_sizes.json");
    CHECK(invoke({"evaluate", "--gt-dir", data.string(), "--predictions", preds.string(), "--out-dir",
               (tmp.path() / "out2").string()})
              .code == cli::kOk);
    CHECK(slurp(tmp.path() / "out2" / "report.json") == slurp(out / "report.json"));

    std::ofstream(tmp.path() / "empty.jsonl");
    CHECK(invoke({"evaluate", "--gt-dir", data.string(), "--predictions", (tmp.path() / "empty.jsonl").string(),
               "--out-dir", out.string()})
              .code == cli::kOk);
    const auto z = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(z["macro"]["map5095"].get<double>() == 0.0);

    std::ofstream(tmp.path() / "bad.jsonl") << R"({"image_id":"nope","class_id":0,"confidence":0.5,"polygon":[0,0,1,0,1,1]})"
                                            << "\n";
    const Run bad = invoke({"evaluate", "--gt-dir", data.string(), "--predictions", (tmp.path() / "bad.jsonl").string(),
                         "--out-dir", out.string()});
    CHECK(bad.code == cli::kValidation);
    CHECK(bad.err.find("bad.jsonl:1") != std::string::npos);
    CHECK(invoke({"evaluate", "--gt-dir", data.string(), "--predictions", (tmp.path() / "none.jsonl").string(),
               "--out-dir", out.string()})
              .code == cli::kIo);
}
