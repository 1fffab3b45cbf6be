#include "segpipe/dataset.hpp"

#include "segpipe/error.hpp"
#include "segpipe/image.hpp"
#include "segpipe/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

namespace segpipe {

std::string_view class_name(ClassId id) { return kClassNames[class_index(id)]; }

std::optional<ClassId> class_from_int(long value) {
    if (value < 0 || value >= kNumClasses) {
        return std::nullopt;
    }
    return static_cast<ClassId>(value);
}

std::array<std::size_t, kNumClasses> ImageRecord::class_counts() const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& inst : instances) {
        ++counts[class_index(inst.class_id)];
    }
    return counts;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            tokens.push_back(line.substr(start, i - start));
        }
    }
    return tokens;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
    throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::vector<InstanceAnnotation> parse_label_file(std::string_view text, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw Error(Errc::InvalidDimensions, "image dimensions must be positive");
    }
    std::vector<InstanceAnnotation> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        const auto tokens = split_ws(line);
        if (tokens.empty()) {
            continue;
        }

        long cls = 0;
        const auto [cls_end, cls_ec] = std::from_chars(tokens[0].data(), tokens[0].data() + tokens[0].size(), cls);
        if (cls_ec != std::errc{} || cls_end != tokens[0].data() + tokens[0].size()) {
            malformed(line_no, "class id '" + std::string(tokens[0]) + "' is not an integer");
        }
        const auto class_id = class_from_int(cls);
        if (!class_id) {
            malformed(line_no, "unknown class " + std::to_string(cls));
        }
        const std::size_t n_coords = tokens.size() - 1;
        if (n_coords % 2 != 0) {
            malformed(line_no, "odd coordinate count " + std::to_string(n_coords));
        }
        if (n_coords < 6) {
            malformed(line_no, "polygon needs at least 3 vertices");
        }

        InstanceAnnotation inst{*class_id, Polygon{{}, CoordinateSpace::Normalized}};
        inst.polygon.vertices.reserve(n_coords / 2);
        for (std::size_t k = 1; k < tokens.size(); k += 2) {
            double xy[2];
            for (int c = 0; c < 2; ++c) {
                const std::string_view tok = tokens[k + c];
                const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), xy[c]);
                if (ec != std::errc{} || p != tok.data() + tok.size()) {
                    malformed(line_no, "bad coordinate '" + std::string(tok) + "'");
                }
                if (!(xy[c] >= 0.0 && xy[c] <= 1.0)) {
                    malformed(line_no, "coordinate " + std::string(tok) + " outside [0,1]");
                }
            }
            inst.polygon.vertices.push_back({xy[0], xy[1]});
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::string serialize_label_file(const std::vector<InstanceAnnotation>& instances) {
    std::string out;
    char buf[64];
    for (const auto& inst : instances) {
        out += std::to_string(class_index(inst.class_id));
        for (const Point& p : inst.polygon.vertices) {
            std::snprintf(buf, sizeof buf, " %.6f %.6f", p.x, p.y);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::string extract_patient_id(std::string_view filename, std::string_view pattern) {
    std::regex re;
    try {
        re = std::regex(std::string(pattern));
    } catch (const std::regex_error& e) {
        throw Error(Errc::InvalidPattern, std::string(pattern) + ": " + e.what());
    }
    if (re.mark_count() != 1) {
        throw Error(Errc::InvalidPattern, "pattern must have exactly one capture group: " + std::string(pattern));
    }
    const std::string name = std::filesystem::path(std::string(filename)).filename().string();
    std::smatch m;
    if (!std::regex_search(name, m, re)) {
        throw Error(Errc::NoMatch, "'" + name + "' does not match " + std::string(pattern));
    }
    return m[1].str();
}

double SplitRatios::operator[](Split s) const {
    switch (s) {
        case Split::Train: return train;
        case Split::Val: return val;
        case Split::Test: return test;
    }
    return 0.0;
}

std::array<std::vector<std::string>, 3> SplitAssignment::images(const std::vector<ImageRecord>& records) const {
    std::array<std::vector<std::string>, 3> out;
    for (const auto& r : records) {
        const auto it = patient_split.find(r.patient_id);
        if (it == patient_split.end()) {
            throw Error(Errc::InvariantViolation, "patient " + r.patient_id + " has no split");
        }
        out[static_cast<int>(it->second)].push_back(r.image_id);
    }
    for (auto& ids : out) {
        std::sort(ids.begin(), ids.end());
    }
    return out;
}

namespace {

// Tally dimensions: images, then one per class.
constexpr int kDims = 1 + kNumClasses;

struct PatientTally {
    std::string id;
    std::array<double, kDims> amounts{};
    std::size_t instances = 0;
};

}  // namespace

SplitAssignment stratified_patient_split(const std::vector<ImageRecord>& records, const SplitRatios& ratios,
                                         std::uint64_t seed) {
    const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
    if (std::any_of(r.begin(), r.end(), [](double x) { return !(x > 0.0); }) ||
        std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
        throw Error(Errc::InvalidRatios, "ratios must be positive and sum to 1");
    }

    std::map<std::string, PatientTally> by_patient;
    for (const auto& rec : records) {
        PatientTally& t = by_patient[rec.patient_id];
        t.id = rec.patient_id;
        t.amounts[0] += 1.0;
        const auto counts = rec.class_counts();
        for (int c = 0; c < kNumClasses; ++c) {
            t.amounts[1 + c] += static_cast<double>(counts[c]);
        }
        t.instances += rec.instances.size();
    }
    if (by_patient.size() < 3) {
        throw Error(Errc::TooFewPatients, "need at least 3 patients, got " + std::to_string(by_patient.size()));
    }

    std::vector<PatientTally> order;
    order.reserve(by_patient.size());
    for (auto& [id, tally] : by_patient) {
        order.push_back(std::move(tally));
    }
    Rng rng(derive_seed(seed, "stratified_patient_split"));
    rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(),
                     [](const PatientTally& a, const PatientTally& b) { return a.instances > b.instances; });

    std::array<double, kDims> totals{};
    for (const auto& p : order) {
        for (int k = 0; k < kDims; ++k) {
            totals[k] += p.amounts[k];
        }
    }

    SplitAssignment out;
    out.ratios = ratios;
    out.seed = seed;
    std::array<std::array<double, kDims>, 3> filled{};
    std::array<std::size_t, 3> patients_in{};

    for (std::size_t i = 0; i < order.size(); ++i) {
        const PatientTally& p = order[i];
        const std::size_t remaining = order.size() - i;
        int empty = 0;
        int best_empty = -1;
        for (int s = 0; s < 3; ++s) {
            if (patients_in[s] == 0) {
                ++empty;
                if (best_empty < 0 || r[s] > r[best_empty]) {
                    best_empty = s;
                }
            }
        }

        int choice = 0;
        if (remaining <= static_cast<std::size_t>(empty)) {
            choice = best_empty;
        } else {
            double best = -std::numeric_limits<double>::infinity();
            for (int s = 0; s < 3; ++s) {
                double score = 0.0;
                for (int k = 0; k < kDims; ++k) {
                    if (totals[k] > 0.0 && p.amounts[k] > 0.0) {
                        score += (p.amounts[k] / totals[k]) * (r[s] - filled[s][k] / totals[k]);
                    }
                }
                if (score > best) {
                    best = score;
                    choice = s;
                }
            }
        }
        for (int k = 0; k < kDims; ++k) {
            filled[choice][k] += p.amounts[k];
        }
        ++patients_in[choice];
        out.patient_split[p.id] = static_cast<Split>(choice);
    }
    return out;
}

void write_split_manifest(const SplitAssignment& assignment, const std::vector<ImageRecord>& records,
                          const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
    }

    std::map<std::string, const ImageRecord*> by_id;
    for (const auto& r : records) {
        by_id[r.image_id] = &r;
    }
    const auto images = assignment.images(records);

    nlohmann::json manifest;
    manifest["seed"] = assignment.seed;
    manifest["ratios"] = {{"train", assignment.ratios.train},
                          {"val", assignment.ratios.val},
                          {"test", assignment.ratios.test}};
    std::array<std::size_t, kNumClasses> total_counts{};
    std::size_t total_images = 0;
    for (int s = 0; s < 3; ++s) {
        std::array<std::size_t, kNumClasses> counts{};
        std::set<std::string> patients;
        for (const auto& id : images[s]) {
            const ImageRecord& rec = *by_id.at(id);
            patients.insert(rec.patient_id);
            const auto c = rec.class_counts();
            for (int k = 0; k < kNumClasses; ++k) {
                counts[k] += c[k];
            }
        }
        nlohmann::json split;
        split["image_ids"] = images[s];
        split["image_count"] = images[s].size();
        split["patients"] = patients.size();
        split["class_counts"] = {{"brain", counts[0]}, {"csp", counts[1]}, {"lv", counts[2]}};
        split["instances"] = counts[0] + counts[1] + counts[2];
        manifest["splits"][std::string(kSplitNames[s])] = std::move(split);
        for (int k = 0; k < kNumClasses; ++k) {
            total_counts[k] += counts[k];
        }
        total_images += images[s].size();

        const auto listing = out_dir / (std::string(kSplitNames[s]) + ".txt");
        std::ofstream out(listing, std::ios::binary | std::ios::trunc);
        for (const auto& id : images[s]) {
            out << id << '\n';
        }
        if (!out) {
            throw Error(Errc::IoFailure, "cannot write " + listing.string());
        }
    }
    manifest["totals"] = {
        {"image_count", total_images},
        {"patients", assignment.patient_split.size()},
        {"class_counts", {{"brain", total_counts[0]}, {"csp", total_counts[1]}, {"lv", total_counts[2]}}},
        {"instances", total_counts[0] + total_counts[1] + total_counts[2]}};

    const auto path = out_dir / "split_manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) {
        throw Error(Errc::IoFailure, "cannot write " + path.string());
    }
}

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoFailure, "cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<ImageRecord> load_dataset(const std::filesystem::path& dir, std::string_view pattern) {
    const auto image_dir = dir / "images";
    const auto label_dir = dir / "labels";
    std::error_code ec;
    if (!std::filesystem::is_directory(image_dir, ec)) {
        throw Error(Errc::IoFailure, image_dir.string() + " is not a directory");
    }
    std::vector<ImageRecord> records;
    for (const auto& entry : std::filesystem::directory_iterator(image_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") {
            continue;
        }
        ImageRecord rec;
        rec.image_id = entry.path().stem().string();
        rec.patient_id = pattern.empty() ? rec.image_id : extract_patient_id(entry.path().filename().string(), pattern);
        std::tie(rec.width, rec.height) = read_png_size(entry.path());
        const auto label_path = label_dir / (rec.image_id + ".txt");
        if (std::filesystem::exists(label_path, ec)) {
            try {
                rec.instances = parse_label_file(read_text(label_path), rec.width, rec.height);
            } catch (const Error& e) {
                if (e.code() == Errc::MalformedLine) {
                    throw Error(Errc::MalformedLine, label_path.string() + " " + e.detail());
                }
                throw;
            }
        }
        records.push_back(std::move(rec));
    }
    std::sort(records.begin(), records.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
    return records;
}

}  // namespace segpipe
