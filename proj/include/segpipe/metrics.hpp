#pragma once

// COCO-style instance segmentation evaluation: greedy per-image matching by
// descending confidence, 101-point interpolated AP, confusion counts at a
// single IoU threshold, and mask overlap over matched pairs.

#include "segpipe/geometry.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace segpipe {

struct Detection {
    std::string image_id;
    int class_id = 0;
    double confidence = 0.0;
    BinaryMask mask;
};

struct GroundTruth {
    std::string image_id;
    int class_id = 0;
    BinaryMask mask;
};

struct ScoredDetection {
    double confidence = 0.0;
    bool is_tp = false;
    std::string image_id;
    std::size_t index = 0;  // position in the detection list
};

struct MatchedPair {
    std::size_t detection = 0;
    std::size_t ground_truth = 0;
    double iou = 0.0;
    double dsc = 0.0;
};

struct ClassMatches {
    std::vector<ScoredDetection> scored;  // descending confidence, ties by (image_id, index)
    std::vector<MatchedPair> pairs;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t n_gt = 0;
    std::set<std::string> images_with_gt;
    std::set<std::string> images_with_detections;
};

struct MatchResult {
    double iou_threshold = 0.5;
    std::vector<ClassMatches> classes;
};

inline constexpr int kEvalClasses = 3;

// IoU >= threshold counts as a match.
MatchResult match_detections(std::span<const Detection> detections, std::span<const GroundTruth> ground_truths,
                             double iou_threshold, int n_classes = kEvalClasses);

// Mean of the precision envelope at recall 0.00, 0.01, ..., 1.00.
double average_precision(const ClassMatches& matches);

// 0.50, 0.55, ..., 0.95
std::vector<double> coco_iou_thresholds();

struct MapScores {
    std::vector<double> thresholds;
    std::vector<std::vector<double>> ap;  // [class][threshold]
    std::vector<bool> evaluated;          // class has at least one ground truth
    double map50 = 0.0;
    double map5095 = 0.0;
};

// Averages run over classes with at least one ground truth instance.
MapScores map_scores(std::span<const Detection> detections, std::span<const GroundTruth> ground_truths,
                     const std::vector<double>& thresholds = coco_iou_thresholds(), int n_classes = kEvalClasses);

struct ConfusionMetrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
};

// Rates with zero denominators are 0.
ConfusionMetrics confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

// TN per class = images in the universe with neither a ground truth nor a
// detection of that class.
std::vector<ConfusionMetrics> confusion_metrics(const MatchResult& matches,
                                                const std::vector<std::string>& image_universe);

struct OverlapMetrics {
    double mean_iou = 0.0;
    double mean_dsc = 0.0;
    std::size_t pairs = 0;
};

// Means over matched pairs; with penalize_misses, unmatched ground truths
// enter the mean as zero.
std::vector<OverlapMetrics> segmentation_overlap(const MatchResult& matches, bool penalize_misses = false);

struct ClassReport {
    std::string name;
    bool evaluated = false;
    ConfusionMetrics confusion;
    double iou = 0.0;
    double dsc = 0.0;
    double ap50 = 0.0;
    double ap5095 = 0.0;
};

struct MacroMetrics {
    double map50 = 0.0;
    double map5095 = 0.0;
    double mdsc = 0.0;
    double miou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
};

struct MetricsReport {
    std::vector<ClassReport> classes;
    MacroMetrics macro;
    std::vector<double> thresholds;
    std::vector<std::vector<double>> ap_table;  // [class][threshold]

    std::string to_json() const;
    std::string to_text() const;
    std::string to_ap_csv() const;
};

// Fills macro values as unweighted means over the evaluated classes.
MetricsReport build_report(std::vector<ClassReport> classes, std::vector<double> thresholds = {},
                           std::vector<std::vector<double>> ap_table = {});

struct EvalOptions {
    std::vector<double> thresholds = coco_iou_thresholds();
    double confusion_threshold = 0.5;
    bool penalize_misses = false;
    int n_classes = kEvalClasses;
};

MetricsReport evaluate(std::span<const Detection> detections, std::span<const GroundTruth> ground_truths,
                       const std::vector<std::string>& image_universe, const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// File formats

using ImageSizes = std::map<std::string, std::pair<int, int>>;

// JSON object {image_id: [width, height]}.
ImageSizes read_image_sizes(const std::filesystem::path& path);
void write_image_sizes(const std::filesystem::path& path, const ImageSizes& sizes);

// JSON Lines: {image_id, class_id, confidence, polygon: [x1, y1, ...]}
// with normalized coordinates, rasterized at the image's size.
std::vector<Detection> read_predictions(const std::filesystem::path& path, const ImageSizes& sizes);

// Label files <labels_dir>/<image_id>.txt for every id in `sizes`; a missing
// file means the image has no ground truth.
std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& labels_dir, const ImageSizes& sizes);

}  // namespace segpipe
