#include "segpipe/losses.hpp"

#include "segpipe/error.hpp"
#include "segpipe/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace segpipe {

LogitGrid::LogitGrid(int w, int h, double fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) {
        throw Error(Errc::InvalidDimensions, "logit grid dimensions must be positive");
    }
    values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

std::array<double, 3> LossWeights::normalized_class_weights() const {
    const double sum = class_weights[0] + class_weights[1] + class_weights[2];
    if (!(sum > 0.0)) {
        throw Error(Errc::InvalidInput, "class weights must have a positive sum");
    }
    return {class_weights[0] / sum, class_weights[1] / sum, class_weights[2] / sum};
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void check_shapes(const LogitGrid& logits, const BinaryMask& target) {
    if (logits.width != target.width() || logits.height != target.height() || logits.values.empty()) {
        throw Error(Errc::ShapeMismatch, "logits " + std::to_string(logits.width) + "x" +
                                             std::to_string(logits.height) + " vs target " +
                                             std::to_string(target.width()) + "x" + std::to_string(target.height()));
    }
}

}  // namespace

LossTerm bce(const LogitGrid& logits, const BinaryMask& target) {
    check_shapes(logits, target);
    const std::size_t n = logits.size();
    const auto& y = target.bits();
    const double inv_n = 1.0 / static_cast<double>(n);
    LossTerm out;
    out.gradient.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = logits.values[i];
        const double yi = y[i];
        // log(1 + e^s) - s y, written to avoid overflow for large |s|.
        sum += std::max(s, 0.0) - s * yi + std::log1p(std::exp(-std::abs(s)));
        out.gradient[i] = (sigmoid(s) - yi) * inv_n;
    }
    out.value = sum * inv_n;
    return out;
}

LossTerm dice_loss(const LogitGrid& logits, const BinaryMask& target, double epsilon) {
    check_shapes(logits, target);
    if (!(epsilon > 0.0)) {
        throw Error(Errc::InvalidInput, "epsilon must be positive");
    }
    const std::size_t n = logits.size();
    std::vector<double> prob(n);
    std::transform(logits.values.begin(), logits.values.end(), prob.begin(), sigmoid);
    const kernels::DiceSums sums = kernels::active().dice_sums(prob, target.bits());

    const double num = 2.0 * sums.prob_target + epsilon;
    const double den = sums.prob + sums.target + epsilon;
    LossTerm out;
    out.value = 1.0 - num / den;
    out.gradient.resize(n);
    const double den2 = den * den;
    const auto& y = target.bits();
    for (std::size_t i = 0; i < n; ++i) {
        const double dloss_dp = -(2.0 * y[i] * den - num) / den2;
        out.gradient[i] = dloss_dp * prob[i] * (1.0 - prob[i]);
    }
    return out;
}

LossTerm lovasz_extension(std::span<const double> errors, std::span<const std::uint8_t> target) {
    const std::size_t n = errors.size();
    if (target.size() != n || n == 0) {
        throw Error(Errc::ShapeMismatch, "errors and target must be non-empty and equal length");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });

    double positives = 0.0;
    for (const std::uint8_t t : target) {
        positives += t;
    }

    LossTerm out;
    out.gradient.assign(n, 0.0);
    double seen_pos = 0.0;
    double seen_neg = 0.0;
    double previous = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        if (target[i]) {
            seen_pos += 1.0;
        } else {
            seen_neg += 1.0;
        }
        const double jaccard = 1.0 - (positives - seen_pos) / (positives + seen_neg);
        const double increment = jaccard - previous;
        previous = jaccard;
        if (errors[i] > 0.0) {
            out.value += errors[i] * increment;
            out.gradient[i] = increment;
        }
    }
    return out;
}

LossTerm lovasz_hinge(const LogitGrid& logits, const BinaryMask& target) {
    check_shapes(logits, target);
    const std::size_t n = logits.size();
    const auto& y = target.bits();
    std::vector<double> errors(n);
    for (std::size_t i = 0; i < n; ++i) {
        errors[i] = 1.0 - (2.0 * y[i] - 1.0) * logits.values[i];
    }
    LossTerm out = lovasz_extension(errors, y);
    for (std::size_t i = 0; i < n; ++i) {
        out.gradient[i] *= -(2.0 * y[i] - 1.0);
    }
    return out;
}

LossValue composite_loss(const LossInput& input, const LossWeights& weights) {
    if (input.class_id < 0 || input.class_id > 2) {
        throw Error(Errc::UnknownClass, "class id " + std::to_string(input.class_id));
    }
    const LossTerm b = bce(input.logits, input.target);
    const LossTerm d = dice_loss(input.logits, input.target, weights.epsilon);
    const LossTerm l = lovasz_hinge(input.logits, input.target);

    LossValue out;
    out.class_weight = weights.normalized_class_weights()[static_cast<std::size_t>(input.class_id)];
    out.bce = b.value;
    out.dice = d.value;
    out.lovasz = l.value;
    const double wb = weights.bce;
    const double wd = weights.dice * out.class_weight;
    const double wl = weights.lovasz * out.class_weight;
    out.total = wb * b.value + wd * d.value + wl * l.value;
    out.gradient.resize(b.gradient.size());
    for (std::size_t i = 0; i < out.gradient.size(); ++i) {
        out.gradient[i] = wb * b.gradient[i] + wd * d.gradient[i] + wl * l.gradient[i];
    }
    return out;
}

std::string LossValue::to_json(bool include_gradient) const {
    nlohmann::json j;
    j["total"] = total;
    j["bce"] = bce;
    j["dice"] = dice;
    j["lovasz"] = lovasz;
    j["class_weight"] = class_weight;
    if (include_gradient) {
        j["gradient"] = gradient;
    }
    return j.dump();
}

std::vector<double> hinge_errors(const LossInput& input) {
    check_shapes(input.logits, input.target);
    const auto& y = input.target.bits();
    std::vector<double> m(input.logits.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = 1.0 - (2.0 * y[i] - 1.0) * input.logits.values[i];
    }
    return m;
}

LossInput separate_hinge_kinks(LossInput input, double min_gap, double nudge) {
    constexpr int kMaxPasses = 200;
    const std::size_t n = input.logits.size();
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        const std::vector<double> m = hinge_errors(input);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m[a] < m[b]; });
        bool clean = true;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = order[k];
            const bool near_zero = std::abs(m[i]) < min_gap;
            const bool near_next = k + 1 < n && m[order[k + 1]] - m[i] < min_gap;
            if (near_zero || near_next) {
                clean = false;
                input.logits.values[i] += nudge * static_cast<double>(1 + pass % 3);
                if (near_next) {
                    ++k;
                }
            }
        }
        if (clean) {
            break;
        }
    }
    return input;
}

GradcheckResult gradcheck(const LossFn& loss, const LossInput& input, double step) {
    const LossInput x = separate_hinge_kinks(input, std::max(1e-3, 10.0 * step), 1e-3);
    const LossTerm analytic = loss(x);
    GradcheckResult result;
    LossInput probe = x;
    for (std::size_t i = 0; i < x.logits.size(); ++i) {
        const double s = x.logits.values[i];
        probe.logits.values[i] = s + step;
        const double up = loss(probe).value;
        probe.logits.values[i] = s - step;
        const double down = loss(probe).value;
        probe.logits.values[i] = s;
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic.gradient[i];
        const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / scale;
        if (rel > result.max_relative_error) {
            result.max_relative_error = rel;
            result.worst_index = i;
        }
    }
    return result;
}

}  // namespace segpipe
