#pragma once

#include "segpipe/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace segpipe {

enum class ClassId : int { Brain = 0, Csp = 1, Lv = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{"brain", "csp", "lv"};

std::string_view class_name(ClassId id);
std::optional<ClassId> class_from_int(long value);
inline int class_index(ClassId id) { return static_cast<int>(id); }

struct InstanceAnnotation {
    ClassId class_id = ClassId::Brain;
    Polygon polygon;  // normalized
};

struct ImageRecord {
    std::string image_id;
    std::string patient_id;
    int width = 0;
    int height = 0;
    std::vector<InstanceAnnotation> instances;

    // Number of instances per class, indexed by ClassId.
    std::array<std::size_t, kNumClasses> class_counts() const;
};

// Parses YOLO polygon labels: one "class x1 y1 x2 y2 ..." line per instance,
// normalized coordinates. Blank lines are skipped. Throws Error(MalformedLine)
// naming the 1-based line number.
std::vector<InstanceAnnotation> parse_label_file(std::string_view text, int width, int height);

// Inverse of parse_label_file; coordinates with 6 decimal places.
std::string serialize_label_file(const std::vector<InstanceAnnotation>& instances);

// Matches HC18-style names such as "123_HC.png" and "123_2HC.png".
inline constexpr std::string_view kDefaultPatientPattern = R"(^(\d+)_\d*HC)";

// Returns the single capture group of `pattern` searched in the file name.
std::string extract_patient_id(std::string_view filename, std::string_view pattern = kDefaultPatientPattern);

enum class Split { Train = 0, Val = 1, Test = 2 };
inline constexpr std::array<std::string_view, 3> kSplitNames{"train", "val", "test"};
inline std::string_view split_name(Split s) { return kSplitNames[static_cast<int>(s)]; }

struct SplitRatios {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;

    double operator[](Split s) const;
};

struct SplitAssignment {
    std::map<std::string, Split> patient_split;
    SplitRatios ratios;
    std::uint64_t seed = 42;

    // Image ids per split, in ascending image id order.
    std::array<std::vector<std::string>, 3> images(const std::vector<ImageRecord>& records) const;
};

// Assigns whole patients to train/val/test. Patients are sorted by id,
// shuffled with the seed, then stable-sorted by descending instance count and
// placed greedily into the split with the largest ratio-weighted deficit
// over the image count and the three class counts.
SplitAssignment stratified_patient_split(const std::vector<ImageRecord>& records, const SplitRatios& ratios,
                                         std::uint64_t seed);

// Writes train.txt, val.txt, test.txt and split_manifest.json into out_dir.
void write_split_manifest(const SplitAssignment& assignment, const std::vector<ImageRecord>& records,
                          const std::filesystem::path& out_dir);

// Loads <dir>/images/*.png with labels from <dir>/labels/<stem>.txt (a
// missing label file means no instances). Records are sorted by image id.
// Patient ids come from `pattern`; images that do not match throw NoMatch.
std::vector<ImageRecord> load_dataset(const std::filesystem::path& dir,
                                      std::string_view pattern = kDefaultPatientPattern);

}  // namespace segpipe
