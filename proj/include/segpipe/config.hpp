#pragma once

#include "segpipe/augment.hpp"
#include "segpipe/dataset.hpp"
#include "segpipe/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace segpipe {

struct EvaluationConfig {
    std::vector<double> iou_thresholds;  // 0.50:0.05:0.95 by default
    double confusion_threshold = 0.5;
    bool penalize_misses = false;
};

struct PipelineConfig {
    std::filesystem::path dataset_dir;
    SplitRatios ratios;
    std::uint64_t seed = 42;
    std::string patient_id_pattern{kDefaultPatientPattern};
    AugmentConfig augmentation;
    LossWeights loss;
    EvaluationConfig evaluation;
    unsigned jobs = 0;

    PipelineConfig();
};

// JSON; missing keys keep their defaults, unknown keys are rejected.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& config);

}  // namespace segpipe
