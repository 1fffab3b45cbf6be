#include "segpipe/augment.hpp"

#include "segpipe/error.hpp"
#include "segpipe/kernels.hpp"
#include "segpipe/rng.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace segpipe {

namespace {

std::optional<std::size_t> first_brain(const ImageRecord& rec) {
    for (std::size_t i = 0; i < rec.instances.size(); ++i) {
        if (rec.instances[i].class_id == ClassId::Brain) {
            return i;
        }
    }
    return std::nullopt;
}

BinaryMask instance_mask(const ImageRecord& rec, std::size_t index) {
    return rasterize(rec.instances[index].polygon, rec.width, rec.height);
}

}  // namespace

DonorPool categorize(const std::vector<ImageRecord>& records) {
    DonorPool pool;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto counts = records[r].class_counts();
        if (counts[class_index(ClassId::Brain)] == 0) {
            continue;
        }
        if (counts[class_index(ClassId::Brain)] == 1 && counts[class_index(ClassId::Csp)] == 0 &&
            counts[class_index(ClassId::Lv)] == 0) {
            pool.acceptors.push_back(r);
            continue;
        }
        const auto& instances = records[r].instances;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            if (instances[i].class_id == ClassId::Csp) {
                pool.csp_donors.push_back({r, i});
            } else if (instances[i].class_id == ClassId::Lv) {
                pool.lv_donors.push_back({r, i});
            }
        }
    }
    return pool;
}

Offset compute_offset(const ImageRecord& donor, std::size_t instance_index) {
    const auto brain = first_brain(donor);
    if (!brain) {
        throw Error(Errc::MissingBrain, "donor " + donor.image_id + " has no Brain instance");
    }
    if (instance_index >= donor.instances.size()) {
        throw Error(Errc::InvalidInput, "instance index out of range for " + donor.image_id);
    }
    const Point s = centroid(instance_mask(donor, instance_index));
    const Point b = centroid(instance_mask(donor, *brain));
    return {s.x - b.x, s.y - b.y};
}

DonorPatch make_donor_patch(const ImageRecord& donor, const GrayImage& donor_image, std::size_t instance_index) {
    if (donor_image.width != donor.width || donor_image.height != donor.height) {
        throw Error(Errc::SizeMismatch, "donor image does not match record " + donor.image_id);
    }
    const Offset delta = compute_offset(donor, instance_index);
    const BinaryMask full = instance_mask(donor, instance_index);

    int x0 = full.width(), y0 = full.height(), x1 = -1, y1 = -1;
    for (int r = 0; r < full.height(); ++r) {
        for (int c = 0; c < full.width(); ++c) {
            if (full.at(c, r)) {
                x0 = std::min(x0, c);
                y0 = std::min(y0, r);
                x1 = std::max(x1, c);
                y1 = std::max(y1, r);
            }
        }
    }
    if (x1 < 0) {
        throw Error(Errc::EmptyMask, "structure " + std::to_string(instance_index) + " of " + donor.image_id +
                                         " covers no pixel centers");
    }

    DonorPatch patch;
    patch.class_id = donor.instances[instance_index].class_id;
    patch.delta = delta;
    const int w = x1 - x0 + 1;
    const int h = y1 - y0 + 1;
    patch.pixels = GrayImage(w, h);
    patch.mask = BinaryMask(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            patch.pixels.at(c, r) = donor_image.at(x0 + c, y0 + r);
            patch.mask.set(c, r, full.at(x0 + c, y0 + r));
        }
    }
    patch.centroid = centroid(patch.mask);
    return patch;
}

std::uint32_t blend_weight(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(Errc::InvalidInput, "alpha must lie in (0, 1]");
    }
    return static_cast<std::uint32_t>(std::lround(alpha * kernels::kBlendDenominator));
}

PasteResult paste(const ImageRecord& acceptor, const GrayImage& acceptor_image, const DonorPatch& patch,
                  const PasteSpec& spec, const BinaryMask* occupied) {
    if (patch.pixels.width != patch.mask.width() || patch.pixels.height != patch.mask.height()) {
        throw Error(Errc::SizeMismatch, "donor patch pixels and mask differ in size");
    }
    if (acceptor_image.width != acceptor.width || acceptor_image.height != acceptor.height) {
        throw Error(Errc::SizeMismatch, "acceptor image does not match record " + acceptor.image_id);
    }
    if (!(spec.min_overlap > 0.0 && spec.min_overlap <= 1.0)) {
        throw Error(Errc::InvalidInput, "min_overlap must lie in (0, 1]");
    }
    const std::uint32_t weight = blend_weight(spec.alpha);
    const auto brain = first_brain(acceptor);
    if (!brain) {
        throw Error(Errc::MissingBrain, "acceptor " + acceptor.image_id + " has no Brain instance");
    }
    const BinaryMask brain_mask = instance_mask(acceptor, *brain);
    const Point brain_c = centroid(brain_mask);

    const int shift_x = static_cast<int>(std::nearbyint(brain_c.x + spec.delta.dx - patch.centroid.x));
    const int shift_y = static_cast<int>(std::nearbyint(brain_c.y + spec.delta.dy - patch.centroid.y));

    PasteResult result;
    result.image = acceptor_image;
    result.pasted_mask = BinaryMask(acceptor.width, acceptor.height);
    GrayImage donor_layer(acceptor.width, acceptor.height);
    std::size_t structure = 0;
    std::size_t inside_brain = 0;
    bool collides = false;
    for (int r = 0; r < patch.mask.height(); ++r) {
        for (int c = 0; c < patch.mask.width(); ++c) {
            if (!patch.mask.at(c, r)) {
                continue;
            }
            ++structure;
            const int x = c + shift_x;
            const int y = r + shift_y;
            if (x < 0 || y < 0 || x >= acceptor.width || y >= acceptor.height) {
                continue;
            }
            result.pasted_mask.set(x, y);
            donor_layer.at(x, y) = patch.pixels.at(c, r);
            if (brain_mask.at(x, y)) {
                ++inside_brain;
            }
            if (occupied != nullptr && occupied->at(x, y)) {
                collides = true;
            }
        }
    }
    result.overlap = structure == 0 ? 0.0 : static_cast<double>(inside_brain) / static_cast<double>(structure);
    if (result.overlap < spec.min_overlap) {
        result.verdict = PasteVerdict::LowOverlap;
        return result;
    }
    if (collides) {
        result.verdict = PasteVerdict::Collision;
        return result;
    }

    result.verdict = PasteVerdict::Accepted;
    kernels::active().blend_masked(result.image.pixels, donor_layer.pixels, result.pasted_mask.bits(), weight);
    for (const Polygon& poly : extract_contours(result.pasted_mask)) {
        result.labels.push_back({patch.class_id, poly.to_normalized(acceptor.width, acceptor.height)});
    }
    return result;
}

std::string AugmentationReport::to_json() const {
    auto tally = [](const PasteTally& t) {
        return nlohmann::json{{"attempts", t.attempts}, {"accepted", t.accepted}, {"rejected", t.rejected}};
    };
    nlohmann::json j;
    j["seed"] = seed;
    j["attempts"] = attempts();
    j["accepted"] = accepted();
    j["rejected"] = rejected();
    j["acceptors"] = acceptors;
    j["augmented_images"] = augmented_images;
    j["per_class"] = {{"csp", tally(csp)}, {"lv", tally(lv)}};
    return j.dump(2) + "\n";
}

AugmentationReport AugmentationReport::from_json(const std::string& text) {
    AugmentationReport out;
    try {
        const auto j = nlohmann::json::parse(text);
        auto tally = [](const nlohmann::json& t) {
            return PasteTally{t.at("attempts").get<std::size_t>(), t.at("accepted").get<std::size_t>(),
                              t.at("rejected").get<std::size_t>()};
        };
        out.seed = j.at("seed").get<std::uint64_t>();
        out.acceptors = j.at("acceptors").get<std::size_t>();
        out.augmented_images = j.at("augmented_images").get<std::size_t>();
        out.csp = tally(j.at("per_class").at("csp"));
        out.lv = tally(j.at("per_class").at("lv"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedJson, std::string("augmentation marker: ") + e.what());
    }
    return out;
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

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) {
        throw Error(Errc::IoFailure, "cannot write " + path.string());
    }
}

bool is_augmented_id(const std::string& id) {
    return id.size() >= kAugmentedSuffix.size() &&
           id.compare(id.size() - kAugmentedSuffix.size(), kAugmentedSuffix.size(), kAugmentedSuffix) == 0;
}

struct AcceptorOutcome {
    PasteTally csp;
    PasteTally lv;
    bool written = false;
};

}  // namespace

AugmentationReport run_offline(const std::filesystem::path& train_dir, const AugmentConfig& config,
                               std::uint64_t seed) {
    blend_weight(config.alpha);
    if (!(config.min_overlap > 0.0 && config.min_overlap <= 1.0)) {
        throw Error(Errc::InvalidInput, "min_overlap must lie in (0, 1]");
    }
    if (config.retries < 1) {
        throw Error(Errc::InvalidInput, "retries must be at least 1");
    }
    const auto marker = train_dir / kMarkerFile;
    std::error_code ec;
    if (std::filesystem::exists(marker, ec)) {
        spdlog::warn("{} already augmented (marker {} present); nothing to do", train_dir.string(), marker.string());
        AugmentationReport recorded = AugmentationReport::from_json(read_text(marker));
        recorded.already_augmented = true;
        return recorded;
    }

    if (!std::filesystem::is_directory(train_dir, ec)) {
        throw Error(Errc::IoFailure, train_dir.string() + " is not a directory");
    }
    std::vector<ImageRecord> records;
    const bool has_images = std::filesystem::is_directory(train_dir / "images", ec);
    if (!has_images && std::filesystem::exists(train_dir / "images", ec)) {
        throw Error(Errc::IoFailure, (train_dir / "images").string() + " is not a directory");
    }
    for (auto& rec : has_images ? load_dataset(train_dir, "") : std::vector<ImageRecord>{}) {
        if (!is_augmented_id(rec.image_id)) {
            records.push_back(std::move(rec));
        }
    }
    const DonorPool pool = categorize(records);
    const auto image_path = [&](const std::string& id) { return train_dir / "images" / (id + ".png"); };

    std::map<std::size_t, GrayImage> donor_images;
    auto patches_for = [&](const std::vector<DonorEntry>& entries) {
        std::vector<DonorPatch> patches;
        patches.reserve(entries.size());
        for (const DonorEntry& e : entries) {
            auto it = donor_images.find(e.record);
            if (it == donor_images.end()) {
                it = donor_images.emplace(e.record, read_png(image_path(records[e.record].image_id))).first;
            }
            patches.push_back(make_donor_patch(records[e.record], it->second, e.instance));
        }
        return patches;
    };
    const std::vector<DonorPatch> csp_patches = patches_for(pool.csp_donors);
    const std::vector<DonorPatch> lv_patches = patches_for(pool.lv_donors);
    donor_images.clear();

    std::vector<AcceptorOutcome> outcomes(pool.acceptors.size());
    std::vector<std::exception_ptr> failures(pool.acceptors.size());

    auto process = [&](std::size_t slot) {
        const ImageRecord& acc = records[pool.acceptors[slot]];
        AcceptorOutcome& outcome = outcomes[slot];
        Rng rng(derive_seed(seed, acc.image_id));
        GrayImage image = read_png(image_path(acc.image_id));
        BinaryMask occupied(acc.width, acc.height);
        std::vector<InstanceAnnotation> labels = acc.instances;

        auto attempt_class = [&](const std::vector<DonorPatch>& patches, PasteTally& tally) {
            if (patches.empty()) {
                return;
            }
            for (int attempt = 0; attempt < config.retries; ++attempt) {
                const DonorPatch& patch = patches[rng.uniform_index(patches.size())];
                ++tally.attempts;
                PasteResult res =
                    paste(acc, image, patch, PasteSpec{patch.delta, config.alpha, config.min_overlap}, &occupied);
                if (!res.accepted()) {
                    ++tally.rejected;
                    continue;
                }
                ++tally.accepted;
                image = std::move(res.image);
                for (int r = 0; r < acc.height; ++r) {
                    for (int c = 0; c < acc.width; ++c) {
                        if (res.pasted_mask.at(c, r)) {
                            occupied.set(c, r);
                        }
                    }
                }
                labels.insert(labels.end(), res.labels.begin(), res.labels.end());
                return;
            }
        };
        for (int k = 0; k < config.csp_per_acceptor; ++k) {
            attempt_class(csp_patches, outcome.csp);
        }
        for (int k = 0; k < config.lv_per_acceptor; ++k) {
            attempt_class(lv_patches, outcome.lv);
        }

        if (outcome.csp.accepted + outcome.lv.accepted > 0) {
            const std::string out_id = acc.image_id + std::string(kAugmentedSuffix);
            write_png(image_path(out_id), image);
            write_text(train_dir / "labels" / (out_id + ".txt"), serialize_label_file(labels));
            outcome.written = true;
        }
    };

    if (!pool.acceptors.empty()) {
        std::filesystem::create_directories(train_dir / "labels", ec);
    }
    unsigned jobs = config.jobs != 0 ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, pool.acceptors.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t slot = next++; slot < pool.acceptors.size(); slot = next++) {
            try {
                process(slot);
            } catch (...) {
                failures[slot] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> threads;
        for (unsigned t = 1; t < jobs; ++t) {
            threads.emplace_back(worker);
        }
        worker();
    }
    for (const auto& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    AugmentationReport report;
    report.seed = seed;
    report.acceptors = pool.acceptors.size();
    for (const auto& o : outcomes) {
        report.csp.attempts += o.csp.attempts;
        report.csp.accepted += o.csp.accepted;
        report.csp.rejected += o.csp.rejected;
        report.lv.attempts += o.lv.attempts;
        report.lv.accepted += o.lv.accepted;
        report.lv.rejected += o.lv.rejected;
        report.augmented_images += o.written ? 1 : 0;
    }
    write_text(marker, report.to_json());
    spdlog::info("augmented {} of {} acceptors: {} pastes accepted, {} rejected", report.augmented_images,
                 report.acceptors, report.accepted(), report.rejected());
    return report;
}

}  // namespace segpipe
