#pragma once

// Domain-guided copy-paste: CSP and LV structures are lifted from donor images
// and pasted into brain-only acceptors at the donor's structure-to-brain
// centroid offset, provided enough of the pasted structure lands inside the
// acceptor's brain.

#include "segpipe/dataset.hpp"
#include "segpipe/geometry.hpp"
#include "segpipe/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace segpipe {

struct DonorEntry {
    std::size_t record = 0;    // index into the categorized record list
    std::size_t instance = 0;  // index into that record's instances

    friend bool operator==(const DonorEntry&, const DonorEntry&) = default;
};

struct DonorPool {
    std::vector<std::size_t> acceptors;  // exactly one Brain, no CSP/LV
    std::vector<DonorEntry> csp_donors;
    std::vector<DonorEntry> lv_donors;
};

DonorPool categorize(const std::vector<ImageRecord>& records);

struct Offset {
    double dx = 0.0;
    double dy = 0.0;
};

// centroid(structure) - centroid(first Brain instance), in pixels.
Offset compute_offset(const ImageRecord& donor, std::size_t instance_index);

struct PasteSpec {
    Offset delta;
    double alpha = 0.95;
    double min_overlap = 0.70;
};

// Bounding-box crop of one donor structure.
struct DonorPatch {
    ClassId class_id = ClassId::Csp;
    GrayImage pixels;
    BinaryMask mask;
    Point centroid;  // structure centroid in patch coordinates
    Offset delta;    // structure centroid minus donor brain centroid
};

DonorPatch make_donor_patch(const ImageRecord& donor, const GrayImage& donor_image, std::size_t instance_index);

enum class PasteVerdict { Accepted, LowOverlap, Collision };

struct PasteResult {
    PasteVerdict verdict = PasteVerdict::LowOverlap;
    double overlap = 0.0;             // |pasted ∩ brain| / |structure|
    GrayImage image;                  // blended output; equals the input unless accepted
    BinaryMask pasted_mask;           // structure pixels that landed in frame
    std::vector<InstanceAnnotation> labels;  // re-extracted, normalized

    bool accepted() const { return verdict == PasteVerdict::Accepted; }
};

// Translates the patch so its centroid sits at brain centroid + spec.delta
// (rounded to whole pixels), then blends inside the structure mask with
// alpha. `occupied`, when given, marks pixels already used by earlier pastes;
// touching them counts as a Collision.
PasteResult paste(const ImageRecord& acceptor, const GrayImage& acceptor_image, const DonorPatch& patch,
                  const PasteSpec& spec, const BinaryMask* occupied = nullptr);

// alpha as the integer blend weight used by the kernels.
std::uint32_t blend_weight(double alpha);

struct AugmentConfig {
    double alpha = 0.95;
    double min_overlap = 0.70;
    int retries = 10;
    int csp_per_acceptor = 1;
    int lv_per_acceptor = 1;
    unsigned jobs = 0;  // 0 = hardware concurrency
};

struct PasteTally {
    std::size_t attempts = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;

    friend bool operator==(const PasteTally&, const PasteTally&) = default;
};

struct AugmentationReport {
    std::uint64_t seed = 0;
    PasteTally csp;
    PasteTally lv;
    std::size_t acceptors = 0;
    std::size_t augmented_images = 0;
    bool already_augmented = false;

    std::size_t attempts() const { return csp.attempts + lv.attempts; }
    std::size_t accepted() const { return csp.accepted + lv.accepted; }
    std::size_t rejected() const { return csp.rejected + lv.rejected; }

    std::string to_json() const;
    static AugmentationReport from_json(const std::string& text);
};

inline constexpr std::string_view kMarkerFile = ".domain_augmented.json";
inline constexpr std::string_view kAugmentedSuffix = "_aug";

// Offline pass over <train_dir>/images + labels. Writes <id>_aug.png and
// <id>_aug.txt next to the originals plus the marker file. If the marker
// already exists nothing is touched and the recorded report is returned with
// already_augmented set.
AugmentationReport run_offline(const std::filesystem::path& train_dir, const AugmentConfig& config,
                               std::uint64_t seed);

}  // namespace segpipe
