#include "segpipe/metrics.hpp"

#include "segpipe/dataset.hpp"
#include "segpipe/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace segpipe {

namespace {

// Detection order used everywhere: confidence descending, then image id,
// then input position.
std::vector<std::size_t> detection_order(std::span<const Detection> dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].confidence != dets[b].confidence) {
            return dets[a].confidence > dets[b].confidence;
        }
        if (dets[a].image_id != dets[b].image_id) {
            return dets[a].image_id < dets[b].image_id;
        }
        return a < b;
    });
    return order;
}

// Mask IoU for every detection / ground truth pair sharing image and class;
// thresholds reuse the same table.
struct IouTable {
    std::vector<std::size_t> order;
    // candidates[d] = (gt index, iou) for ground truths of d's image and class.
    std::vector<std::vector<std::pair<std::size_t, double>>> candidates;
};

IouTable build_iou_table(std::span<const Detection> dets, std::span<const GroundTruth> gts, int n_classes) {
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> gt_index;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].class_id < 0 || gts[g].class_id >= n_classes) {
            throw Error(Errc::UnknownClass, "ground truth class " + std::to_string(gts[g].class_id));
        }
        gt_index[{gts[g].image_id, gts[g].class_id}].push_back(g);
    }
    IouTable table;
    table.order = detection_order(dets);
    table.candidates.resize(dets.size());
    for (std::size_t d = 0; d < dets.size(); ++d) {
        if (dets[d].class_id < 0 || dets[d].class_id >= n_classes) {
            throw Error(Errc::UnknownClass, "detection class " + std::to_string(dets[d].class_id));
        }
        const auto it = gt_index.find({dets[d].image_id, dets[d].class_id});
        if (it == gt_index.end()) {
            continue;
        }
        for (const std::size_t g : it->second) {
            table.candidates[d].emplace_back(g, mask_iou(dets[d].mask, gts[g].mask));
        }
    }
    return table;
}

MatchResult match_with_table(const IouTable& table, std::span<const Detection> dets,
                             std::span<const GroundTruth> gts, double thr, int n_classes) {
    MatchResult result;
    result.iou_threshold = thr;
    result.classes.resize(static_cast<std::size_t>(n_classes));
    for (const GroundTruth& g : gts) {
        ClassMatches& cm = result.classes[static_cast<std::size_t>(g.class_id)];
        ++cm.n_gt;
        cm.images_with_gt.insert(g.image_id);
    }
    std::vector<bool> claimed(gts.size(), false);
    for (const std::size_t d : table.order) {
        const Detection& det = dets[d];
        ClassMatches& cm = result.classes[static_cast<std::size_t>(det.class_id)];
        cm.images_with_detections.insert(det.image_id);
        std::size_t best = gts.size();
        double best_iou = -1.0;
        for (const auto& [g, iou] : table.candidates[d]) {
            if (!claimed[g] && iou >= thr && iou > best_iou) {
                best = g;
                best_iou = iou;
            }
        }
        const bool tp = best != gts.size();
        cm.scored.push_back({det.confidence, tp, det.image_id, d});
        if (tp) {
            claimed[best] = true;
            ++cm.tp;
            cm.pairs.push_back({d, best, best_iou, 2.0 * best_iou / (1.0 + best_iou)});
        } else {
            ++cm.fp;
        }
    }
    for (ClassMatches& cm : result.classes) {
        cm.fn = cm.n_gt - cm.tp;
    }
    return result;
}

}  // namespace

MatchResult match_detections(std::span<const Detection> detections, std::span<const GroundTruth> ground_truths,
                             double iou_threshold, int n_classes) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw Error(Errc::InvalidInput, "IoU threshold must lie in (0, 1)");
    }
    const IouTable table = build_iou_table(detections, ground_truths, n_classes);
    return match_with_table(table, detections, ground_truths, iou_threshold, n_classes);
}

double average_precision(const ClassMatches& matches) {
    if (matches.n_gt == 0 || matches.scored.empty()) {
        return 0.0;
    }
    const std::size_t n = matches.scored.size();
    std::vector<std::size_t> tp_cum(n);
    std::vector<double> envelope(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tp += matches.scored[i].is_tp ? 1 : 0;
        tp_cum[i] = tp;
        envelope[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    for (std::size_t i = n - 1; i > 0; --i) {
        envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
    }
    // recall_i >= k/100  <=>  100 * tp_i >= k * n_gt, compared exactly.
    double sum = 0.0;
    std::size_t i = 0;
    for (std::size_t k = 0; k <= 100; ++k) {
        while (i < n && 100 * tp_cum[i] < k * matches.n_gt) {
            ++i;
        }
        if (i == n) {
            break;
        }
        sum += envelope[i];
    }
    return sum / 101.0;
}

std::vector<double> coco_iou_thresholds() {
    std::vector<double> t;
    for (int pct = 50; pct <= 95; pct += 5) {
        t.push_back(pct / 100.0);
    }
    return t;
}

MapScores map_scores(std::span<const Detection> detections, std::span<const GroundTruth> ground_truths,
                     const std::vector<double>& thresholds, int n_classes) {
    if (thresholds.empty()) {
        throw Error(Errc::InvalidInput, "need at least one IoU threshold");
    }
    const IouTable table = build_iou_table(detections, ground_truths, n_classes);
    MapScores out;
    out.thresholds = thresholds;
    out.ap.assign(static_cast<std::size_t>(n_classes), std::vector<double>(thresholds.size(), 0.0));
    out.evaluated.assign(static_cast<std::size_t>(n_classes), false);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        if (!(thresholds[t] > 0.0 && thresholds[t] < 1.0)) {
            throw Error(Errc::InvalidInput, "IoU threshold must lie in (0, 1)");
        }
        const MatchResult m = match_with_table(table, detections, ground_truths, thresholds[t], n_classes);
        for (int c = 0; c < n_classes; ++c) {
            out.ap[c][t] = average_precision(m.classes[c]);
            out.evaluated[c] = m.classes[c].n_gt > 0;
        }
    }
    const auto at50 = std::find(thresholds.begin(), thresholds.end(), 0.5);
    double sum50 = 0.0, sum_all = 0.0;
    int evaluated = 0;
    for (int c = 0; c < n_classes; ++c) {
        if (!out.evaluated[c]) {
            continue;
        }
        ++evaluated;
        if (at50 != thresholds.end()) {
            sum50 += out.ap[c][static_cast<std::size_t>(at50 - thresholds.begin())];
        }
        sum_all += std::accumulate(out.ap[c].begin(), out.ap[c].end(), 0.0) / static_cast<double>(thresholds.size());
    }
    if (evaluated > 0) {
        out.map50 = sum50 / evaluated;
        out.map5095 = sum_all / evaluated;
    }
    return out;
}

ConfusionMetrics confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    ConfusionMetrics m{tp, fp, fn, tn};
    const double dtp = static_cast<double>(tp), dfp = static_cast<double>(fp);
    const double dfn = static_cast<double>(fn), dtn = static_cast<double>(tn);
    m.precision = ratio(dtp, dtp + dfp);
    m.recall = ratio(dtp, dtp + dfn);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.specificity = ratio(dtn, dtn + dfp);
    m.accuracy = ratio(dtp, dtp + dfp + dfn);
    return m;
}

std::vector<ConfusionMetrics> confusion_metrics(const MatchResult& matches,
                                                const std::vector<std::string>& image_universe) {
    std::vector<ConfusionMetrics> out;
    for (const ClassMatches& cm : matches.classes) {
        std::size_t tn = 0;
        for (const std::string& id : image_universe) {
            if (!cm.images_with_gt.contains(id) && !cm.images_with_detections.contains(id)) {
                ++tn;
            }
        }
        out.push_back(confusion_from_counts(cm.tp, cm.fp, cm.fn, tn));
    }
    return out;
}

std::vector<OverlapMetrics> segmentation_overlap(const MatchResult& matches, bool penalize_misses) {
    std::vector<OverlapMetrics> out;
    for (const ClassMatches& cm : matches.classes) {
        OverlapMetrics o;
        o.pairs = cm.pairs.size();
        double iou = 0.0, dsc = 0.0;
        for (const MatchedPair& p : cm.pairs) {
            iou += p.iou;
            dsc += p.dsc;
        }
        const std::size_t denom = penalize_misses ? cm.pairs.size() + cm.fn : cm.pairs.size();
        if (denom > 0) {
            o.mean_iou = iou / static_cast<double>(denom);
            o.mean_dsc = dsc / static_cast<double>(denom);
        }
        out.push_back(o);
    }
    return out;
}

MetricsReport build_report(std::vector<ClassReport> classes, std::vector<double> thresholds,
                           std::vector<std::vector<double>> ap_table) {
    MetricsReport r;
    r.classes = std::move(classes);
    r.thresholds = std::move(thresholds);
    r.ap_table = std::move(ap_table);
    int n = 0;
    MacroMetrics& m = r.macro;
    for (const ClassReport& c : r.classes) {
        if (!c.evaluated) {
            continue;
        }
        ++n;
        m.map50 += c.ap50;
        m.map5095 += c.ap5095;
        m.mdsc += c.dsc;
        m.miou += c.iou;
        m.precision += c.confusion.precision;
        m.recall += c.confusion.recall;
        m.f1 += c.confusion.f1;
        m.specificity += c.confusion.specificity;
        m.accuracy += c.confusion.accuracy;
    }
    if (n > 0) {
        for (double* v : {&m.map50, &m.map5095, &m.mdsc, &m.miou, &m.precision, &m.recall, &m.f1, &m.specificity,
                          &m.accuracy}) {
            *v /= n;
        }
    }
    return r;
}

MetricsReport evaluate(std::span<const Detection> detections, std::span<const GroundTruth> ground_truths,
                       const std::vector<std::string>& image_universe, const EvalOptions& options) {
    const MapScores maps = map_scores(detections, ground_truths, options.thresholds, options.n_classes);
    const MatchResult at = match_detections(detections, ground_truths, options.confusion_threshold, options.n_classes);
    const auto confusion = confusion_metrics(at, image_universe);
    const auto overlap = segmentation_overlap(at, options.penalize_misses);
    const auto at50 = std::find(options.thresholds.begin(), options.thresholds.end(), 0.5);

    std::vector<ClassReport> classes;
    for (int c = 0; c < options.n_classes; ++c) {
        ClassReport cr;
        cr.name = c < kNumClasses ? std::string(kClassNames[c]) : "class" + std::to_string(c);
        cr.evaluated = maps.evaluated[c];
        cr.confusion = confusion[c];
        cr.iou = overlap[c].mean_iou;
        cr.dsc = overlap[c].mean_dsc;
        if (at50 != options.thresholds.end()) {
            cr.ap50 = maps.ap[c][static_cast<std::size_t>(at50 - options.thresholds.begin())];
        }
        cr.ap5095 = std::accumulate(maps.ap[c].begin(), maps.ap[c].end(), 0.0) /
                    static_cast<double>(options.thresholds.size());
        classes.push_back(std::move(cr));
    }
    return build_report(std::move(classes), options.thresholds, maps.ap);
}

ImageSizes read_image_sizes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoFailure, "cannot read " + path.string());
    }
    ImageSizes sizes;
    try {
        const auto j = nlohmann::json::parse(in);
        for (const auto& [id, wh] : j.items()) {
            const int w = wh.at(0).get<int>();
            const int h = wh.at(1).get<int>();
            if (w <= 0 || h <= 0) {
                throw Error(Errc::InvalidDimensions, path.string() + ": non-positive size for " + id);
            }
            sizes[id] = {w, h};
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedJson, path.string() + ": " + e.what());
    }
    return sizes;
}

void write_image_sizes(const std::filesystem::path& path, const ImageSizes& sizes) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, wh] : sizes) {
        j[id] = {wh.first, wh.second};
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) {
        throw Error(Errc::IoFailure, "cannot write " + path.string());
    }
}

std::vector<Detection> read_predictions(const std::filesystem::path& path, const ImageSizes& sizes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoFailure, "cannot read " + path.string());
    }
    std::vector<Detection> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        Detection det;
        Polygon poly{{}, CoordinateSpace::Normalized};
        try {
            const auto j = nlohmann::json::parse(line);
            det.image_id = j.at("image_id").get<std::string>();
            det.class_id = j.at("class_id").get<int>();
            det.confidence = j.at("confidence").get<double>();
            const auto coords = j.at("polygon").get<std::vector<double>>();
            if (coords.size() % 2 != 0 || coords.size() < 6) {
                throw Error(Errc::MalformedJson, where + ": polygon needs an even count of at least 6 values");
            }
            for (std::size_t k = 0; k < coords.size(); k += 2) {
                poly.vertices.push_back({coords[k], coords[k + 1]});
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::MalformedJson, where + ": " + e.what());
        }
        if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
            throw Error(Errc::MalformedJson, where + ": confidence outside [0,1]");
        }
        if (det.class_id < 0 || det.class_id >= kEvalClasses) {
            throw Error(Errc::UnknownClass, where + ": class " + std::to_string(det.class_id));
        }
        const auto it = sizes.find(det.image_id);
        if (it == sizes.end()) {
            throw Error(Errc::UnknownImage, where + ": unknown image_id '" + det.image_id + "'");
        }
        det.mask = rasterize(poly, it->second.first, it->second.second);
        out.push_back(std::move(det));
    }
    return out;
}

std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& labels_dir, const ImageSizes& sizes) {
    std::vector<GroundTruth> out;
    for (const auto& [id, wh] : sizes) {
        const auto path = labels_dir / (id + ".txt");
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) {
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        if (!in) {
            throw Error(Errc::IoFailure, "cannot read " + path.string());
        }
        std::vector<InstanceAnnotation> instances;
        try {
            instances = parse_label_file(ss.str(), wh.first, wh.second);
        } catch (const Error& e) {
            throw Error(e.code(), path.string() + " " + e.detail());
        }
        for (const auto& inst : instances) {
            out.push_back({id, class_index(inst.class_id), rasterize(inst.polygon, wh.first, wh.second)});
        }
    }
    return out;
}

}  // namespace segpipe
