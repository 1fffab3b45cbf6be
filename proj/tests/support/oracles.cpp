#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace oracle {

int winding_number(const std::vector<Point>& poly, double x, double y) {
    int wn = 0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = poly[i];
        const Point b = poly[(i + 1) % n];
        const double cross = (b.x - a.x) * (y - a.y) - (x - a.x) * (b.y - a.y);
        if (a.y <= y) {
            if (b.y > y && cross > 0) ++wn;
        } else {
            if (b.y <= y && cross < 0) --wn;
        }
    }
    return wn;
}

BinaryMask rasterize_winding(const std::vector<Point>& v, int width, int height) {
    BinaryMask m(width, height);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            if (winding_number(v, c + 0.5, r + 0.5) != 0) {
                m.set(c, r);
            }
        }
    }
    return m;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    long inter = 0, uni = 0;
    for (int r = 0; r < a.height(); ++r) {
        for (int c = 0; c < a.width(); ++c) {
            inter += a.at(c, r) && b.at(c, r);
            uni += a.at(c, r) || b.at(c, r);
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double dsc(const BinaryMask& a, const BinaryMask& b) {
    long inter = 0, sum = 0;
    for (int r = 0; r < a.height(); ++r) {
        for (int c = 0; c < a.width(); ++c) {
            inter += a.at(c, r) && b.at(c, r);
            sum += a.at(c, r) + b.at(c, r);
        }
    }
    return sum == 0 ? 0.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sum);
}

std::vector<Point> random_convex(segpipe::Rng& rng, int width, int height) {
    const int n = 3 + static_cast<int>(rng.uniform_index(10));
    std::vector<double> angles(n);
    for (double& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    const double rx = rng.uniform(0.15, 0.45) * width, ry = rng.uniform(0.15, 0.45) * height;
    const double cx = rng.uniform(rx, width - rx), cy = rng.uniform(ry, height - ry);
    std::vector<Point> out;
    for (double a : angles) out.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    return out;
}

std::vector<Point> random_star(segpipe::Rng& rng, int width, int height) {
    const int n = 5 + static_cast<int>(rng.uniform_index(12));
    const double r_max = 0.45 * std::min(width, height);
    const double cx = width / 2.0 + rng.uniform(-2.0, 2.0), cy = height / 2.0 + rng.uniform(-2.0, 2.0);
    std::vector<Point> out;
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * std::numbers::pi * (k + rng.uniform(0.0, 0.5)) / n;
        const double r = r_max * rng.uniform(0.35, 1.0);
        out.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return out;
}

namespace {

struct Scored {
    double conf;
    bool tp;
};

double ap_direct(std::vector<Scored> list, int n_gt) {
    if (n_gt == 0) return 0.0;
    std::vector<double> prec, rec;
    int tp = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
        tp += list[i].tp;
        prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        rec.push_back(static_cast<double>(tp) / n_gt);
    }
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        double best = 0.0;
        for (std::size_t i = 0; i < prec.size(); ++i) {
            if (rec[i] >= r) best = std::max(best, prec[i]);
        }
        sum += best;
    }
    return sum / 101.0;
}

}  // namespace

MapResult brute_map(const std::vector<segpipe::Detection>& dets, const std::vector<segpipe::GroundTruth>& gts,
                    int n_classes) {
    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].confidence != dets[b].confidence) return dets[a].confidence > dets[b].confidence;
        return dets[a].image_id < dets[b].image_id;
    });
    MapResult out;
    int evaluated = 0;
    for (int c = 0; c < n_classes; ++c) {
        int n_gt = 0;
        for (const auto& g : gts) n_gt += g.class_id == c;
        if (n_gt == 0) continue;
        ++evaluated;
        double sum_all = 0.0;
        for (int pct = 50; pct <= 95; pct += 5) {
            const double thr = pct / 100.0;
            std::vector<bool> used(gts.size(), false);
            std::vector<Scored> list;
            for (std::size_t d : order) {
                if (dets[d].class_id != c) continue;
                int best = -1;
                double best_iou = 0.0;
                for (std::size_t g = 0; g < gts.size(); ++g) {
                    if (used[g] || gts[g].class_id != c || gts[g].image_id != dets[d].image_id) continue;
                    const double v = iou(dets[d].mask, gts[g].mask);
                    if (v >= thr && (best < 0 || v > best_iou)) {
                        best = static_cast<int>(g);
                        best_iou = v;
                    }
                }
                if (best >= 0) used[best] = true;
                list.push_back({dets[d].confidence, best >= 0});
            }
            const double ap = ap_direct(list, n_gt);
            if (pct == 50) out.map50 += ap;
            sum_all += ap;
        }
        out.map5095 += sum_all / 10.0;
    }
    if (evaluated > 0) {
        out.map50 /= evaluated;
        out.map5095 /= evaluated;
    }
    return out;
}

double jaccard_set_loss(const std::vector<std::uint8_t>& m, const std::vector<std::uint8_t>& y) {
    int num = 0, den = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        num += m[i];
        den += (m[i] || y[i]);
    }
    return den == 0 ? 0.0 : static_cast<double>(num) / den;
}

void adamw_step(AdamWState& s, double g, double lr, double b1, double b2, double eps, double wd) {
    s.t += 1;
    s.m = b1 * s.m + (1 - b1) * g;
    s.v = b2 * s.v + (1 - b2) * g * g;
    const double m_hat = s.m / (1 - std::pow(b1, s.t));
    const double v_hat = s.v / (1 - std::pow(b2, s.t));
    s.p = s.p - lr * (m_hat / (std::sqrt(v_hat) + eps)) - lr * wd * s.p;
}

}  // namespace oracle
