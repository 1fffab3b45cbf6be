#include "segpipe/config.hpp"
#include "segpipe/error.hpp"
#include "segpipe/metrics.hpp"

#include <doctest.h>

using namespace segpipe;

TEST_CASE("defaults") {
    const PipelineConfig c;
    CHECK(c.seed == 42);
    CHECK(c.ratios.train == 0.70);
    CHECK(c.ratios.val == 0.15);
    CHECK(c.ratios.test == 0.15);
    CHECK(c.augmentation.alpha == 0.95);
    CHECK(c.augmentation.min_overlap == 0.70);
    CHECK(c.augmentation.retries == 10);
    CHECK(c.loss.bce == 0.25);
    CHECK(c.loss.dice == 0.50);
    CHECK(c.loss.lovasz == 0.25);
    CHECK(c.loss.class_weights == std::array<double, 3>{0.1, 0.9, 0.7});
    CHECK(c.loss.epsilon == 1.0);
    CHECK(c.evaluation.iou_thresholds == coco_iou_thresholds());
    CHECK(c.evaluation.confusion_threshold == 0.5);
    CHECK_FALSE(c.evaluation.penalize_misses);
    CHECK(c.patient_id_pattern == kDefaultPatientPattern);
}

TEST_CASE("parse_config") {
    const PipelineConfig c = parse_config(R"({"seed": 7, "augmentation": {"alpha": 0.8}, "loss": {"dice": 0.4}})");
    CHECK(c.seed == 7);
    CHECK(c.augmentation.alpha == 0.8);
    CHECK(c.augmentation.min_overlap == 0.70);
    CHECK(c.loss.dice == 0.4);
    CHECK(c.loss.bce == 0.25);

    CHECK(parse_config("{}").seed == 42);
    CHECK_THROWS_AS(parse_config(R"({"sed": 7})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"augmentation": {"alpha": 1.5}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"augmentation": {"retries": -1}})"), Error);
    CHECK_THROWS_AS(parse_config("not json"), Error);

    const PipelineConfig round = parse_config(config_to_json(c));
    CHECK(config_to_json(round) == config_to_json(c));
}
