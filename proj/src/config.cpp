#include "segpipe/config.hpp"

#include "segpipe/error.hpp"
#include "segpipe/metrics.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace segpipe {

using nlohmann::json;

PipelineConfig::PipelineConfig() { evaluation.iou_thresholds = coco_iou_thresholds(); }

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw Error(Errc::InvalidInput, "config: unknown key '" + where + key + "'");
        }
    }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
    PipelineConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) {
            throw Error(Errc::MalformedJson, "config: top level must be an object");
        }
        reject_unknown(j, {"dataset_dir", "ratios", "seed", "patient_id_pattern", "augmentation", "loss",
                           "evaluation", "jobs"},
                       "");
        if (j.contains("dataset_dir")) {
            c.dataset_dir = j.at("dataset_dir").get<std::string>();
        }
        if (j.contains("ratios")) {
            const json& r = j.at("ratios");
            reject_unknown(r, {"train", "val", "test"}, "ratios.");
            take(r, "train", c.ratios.train);
            take(r, "val", c.ratios.val);
            take(r, "test", c.ratios.test);
        }
        take(j, "seed", c.seed);
        take(j, "patient_id_pattern", c.patient_id_pattern);
        take(j, "jobs", c.jobs);
        if (j.contains("augmentation")) {
            const json& a = j.at("augmentation");
            reject_unknown(a, {"alpha", "min_overlap", "retries", "csp_per_acceptor", "lv_per_acceptor"},
                           "augmentation.");
            take(a, "alpha", c.augmentation.alpha);
            take(a, "min_overlap", c.augmentation.min_overlap);
            take(a, "retries", c.augmentation.retries);
            take(a, "csp_per_acceptor", c.augmentation.csp_per_acceptor);
            take(a, "lv_per_acceptor", c.augmentation.lv_per_acceptor);
        }
        if (j.contains("loss")) {
            const json& l = j.at("loss");
            reject_unknown(l, {"bce", "dice", "lovasz", "class_weights", "epsilon"}, "loss.");
            take(l, "bce", c.loss.bce);
            take(l, "dice", c.loss.dice);
            take(l, "lovasz", c.loss.lovasz);
            take(l, "class_weights", c.loss.class_weights);
            take(l, "epsilon", c.loss.epsilon);
        }
        if (j.contains("evaluation")) {
            const json& e = j.at("evaluation");
            reject_unknown(e, {"iou_thresholds", "confusion_threshold", "penalize_misses"}, "evaluation.");
            take(e, "iou_thresholds", c.evaluation.iou_thresholds);
            take(e, "confusion_threshold", c.evaluation.confusion_threshold);
            take(e, "penalize_misses", c.evaluation.penalize_misses);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedJson, std::string("config: ") + e.what());
    }
    if (!(c.augmentation.alpha >= 0.0 && c.augmentation.alpha <= 1.0)) {
        throw Error(Errc::InvalidInput, "config: augmentation.alpha must lie in [0, 1]");
    }
    if (!(c.augmentation.min_overlap >= 0.0 && c.augmentation.min_overlap <= 1.0)) {
        throw Error(Errc::InvalidInput, "config: augmentation.min_overlap must lie in [0, 1]");
    }
    if (c.augmentation.retries < 1) {
        throw Error(Errc::InvalidInput, "config: augmentation.retries must be >= 1");
    }
    for (double t : c.evaluation.iou_thresholds) {
        if (!(t > 0.0 && t < 1.0)) {
            throw Error(Errc::InvalidInput, "config: IoU thresholds must lie in (0, 1)");
        }
    }
    if (c.evaluation.iou_thresholds.empty()) {
        throw Error(Errc::InvalidInput, "config: evaluation.iou_thresholds is empty");
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoFailure, "cannot read config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const PipelineConfig& c) {
    json j;
    j["dataset_dir"] = c.dataset_dir.string();
    j["ratios"] = {{"train", c.ratios.train}, {"val", c.ratios.val}, {"test", c.ratios.test}};
    j["seed"] = c.seed;
    j["patient_id_pattern"] = c.patient_id_pattern;
    j["jobs"] = c.jobs;
    j["augmentation"] = {{"alpha", c.augmentation.alpha},
                         {"min_overlap", c.augmentation.min_overlap},
                         {"retries", c.augmentation.retries},
                         {"csp_per_acceptor", c.augmentation.csp_per_acceptor},
                         {"lv_per_acceptor", c.augmentation.lv_per_acceptor}};
    j["loss"] = {{"bce", c.loss.bce},
                 {"dice", c.loss.dice},
                 {"lovasz", c.loss.lovasz},
                 {"class_weights", c.loss.class_weights},
                 {"epsilon", c.loss.epsilon}};
    j["evaluation"] = {{"iou_thresholds", c.evaluation.iou_thresholds},
                       {"confusion_threshold", c.evaluation.confusion_threshold},
                       {"penalize_misses", c.evaluation.penalize_misses}};
    return j.dump(2) + "\n";
}

}  // namespace segpipe
