#include "segpipe/metrics.hpp"

#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <string>

namespace segpipe {

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad_left(std::string s, std::size_t width) {
    if (s.size() < width) {
        s.insert(0, width - s.size(), ' ');
    }
    return s;
}

std::string pad_right(std::string s, std::size_t width) {
    if (s.size() < width) {
        s.append(width - s.size(), ' ');
    }
    return s;
}

}  // namespace

std::string MetricsReport::to_json() const {
    using nlohmann::json;
    json j;
    json cls = json::array();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const ClassReport& r = classes[c];
        json e{{"name", r.name},
               {"evaluated", r.evaluated},
               {"precision", r.confusion.precision},
               {"recall", r.confusion.recall},
               {"f1", r.confusion.f1},
               {"specificity", r.confusion.specificity},
               {"accuracy", r.confusion.accuracy},
               {"iou", r.iou},
               {"dsc", r.dsc},
               {"tp", r.confusion.tp},
               {"fp", r.confusion.fp},
               {"fn", r.confusion.fn},
               {"tn", r.confusion.tn},
               {"ap50", r.ap50},
               {"ap5095", r.ap5095}};
        if (c < ap_table.size()) {
            e["ap_per_threshold"] = ap_table[c];
        }
        cls.push_back(std::move(e));
    }
    j["classes"] = std::move(cls);
    j["macro"] = {{"map50", macro.map50},         {"map5095", macro.map5095},   {"mdsc", macro.mdsc},
                  {"miou", macro.miou},           {"precision", macro.precision}, {"recall", macro.recall},
                  {"f1", macro.f1},               {"specificity", macro.specificity},
                  {"accuracy", macro.accuracy}};
    j["iou_thresholds"] = thresholds;
    return j.dump(2) + "\n";
}

std::string MetricsReport::to_text() const {
    std::string out;
    const std::pair<const char*, double> overall[] = {
        {"mAP@50", macro.map50},       {"mAP@50-95", macro.map5095}, {"mDSC", macro.mdsc},
        {"mIoU", macro.miou},          {"Precision", macro.precision}, {"Recall", macro.recall},
        {"F1", macro.f1},              {"Specificity", macro.specificity}, {"Accuracy", macro.accuracy},
    };
    out += pad_right("Metric", 12) + pad_left("Value", 8) + "\n";
    for (const auto& [name, v] : overall) {
        out += pad_right(name, 12) + pad_left(fixed(v, 4), 8) + "\n";
    }
    out += "\n";

    const char* heads[] = {"Prec.", "Rec.", "F1", "IoU", "DSC", "TP", "FP", "FN", "Spec.", "Acc.", "AP50", "AP50-95"};
    out += pad_right("Class", 8);
    for (const char* h : heads) {
        out += pad_left(h, 8);
    }
    out += "\n";
    for (const ClassReport& r : classes) {
        std::string name = r.name;
        if (!name.empty()) {
            name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
        }
        if (name == "Csp" || name == "Lv") {
            for (char& ch : name) {
                ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            }
        }
        out += pad_right(name + (r.evaluated ? "" : "*"), 8);
        for (double v : {r.confusion.precision, r.confusion.recall, r.confusion.f1, r.iou, r.dsc}) {
            out += pad_left(fixed(v, 3), 8);
        }
        for (std::size_t v : {r.confusion.tp, r.confusion.fp, r.confusion.fn}) {
            out += pad_left(std::to_string(v), 8);
        }
        for (double v : {r.confusion.specificity, r.confusion.accuracy, r.ap50, r.ap5095}) {
            out += pad_left(fixed(v, 3), 8);
        }
        out += "\n";
    }
    bool any_skipped = false;
    for (const ClassReport& r : classes) {
        any_skipped = any_skipped || !r.evaluated;
    }
    if (any_skipped) {
        out += "* no ground truth; excluded from macro averages\n";
    }
    return out;
}

std::string MetricsReport::to_ap_csv() const {
    std::string out = "class,threshold,ap\n";
    for (std::size_t c = 0; c < ap_table.size() && c < classes.size(); ++c) {
        for (std::size_t t = 0; t < ap_table[c].size() && t < thresholds.size(); ++t) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%s,%.2f,%.17g\n", classes[c].name.c_str(), thresholds[t], ap_table[c][t]);
            out += buf;
        }
    }
    return out;
}

}  // namespace segpipe
