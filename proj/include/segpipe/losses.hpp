#pragma once

// Segmentation losses on a single instance mask. Inputs are raw logits:
// BCE and Dice apply the sigmoid internally, the Lovász hinge uses the logits
// directly as margins. Every loss returns its gradient with respect to the
// logits.

#include "segpipe/geometry.hpp"

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace segpipe {

struct LogitGrid {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major, unbounded

    LogitGrid() = default;
    LogitGrid(int w, int h, double fill = 0.0);
    std::size_t size() const { return values.size(); }
};

struct LossInput {
    LogitGrid logits;
    BinaryMask target;
    int class_id = 0;
};

struct LossWeights {
    double bce = 0.25;
    double dice = 0.50;
    double lovasz = 0.25;
    // Raw inverse-frequency weights for Brain, CSP, LV; applied normalized.
    std::array<double, 3> class_weights{0.1, 0.9, 0.7};
    double epsilon = 1.0;

    std::array<double, 3> normalized_class_weights() const;
};

struct LossTerm {
    double value = 0.0;
    std::vector<double> gradient;
};

struct LossValue {
    double total = 0.0;
    double bce = 0.0;
    double dice = 0.0;
    double lovasz = 0.0;
    double class_weight = 0.0;
    std::vector<double> gradient;

    std::string to_json(bool include_gradient = true) const;
};

double sigmoid(double x);

LossTerm bce(const LogitGrid& logits, const BinaryMask& target);
LossTerm dice_loss(const LogitGrid& logits, const BinaryMask& target, double epsilon = 1.0);
LossTerm lovasz_hinge(const LogitGrid& logits, const BinaryMask& target);

// Lovász extension of the Jaccard loss evaluated at an arbitrary error vector
// (sum of max(0, e) times the Jaccard increments along the descending sort).
// The gradient is with respect to the errors.
LossTerm lovasz_extension(std::span<const double> errors, std::span<const std::uint8_t> target);

LossValue composite_loss(const LossInput& input, const LossWeights& weights = {});

using LossFn = std::function<LossTerm(const LossInput&)>;

// Hinge errors 1 - (2y - 1) s for every pixel.
std::vector<double> hinge_errors(const LossInput& input);

// Nudges logits by multiples of `nudge` until every hinge error is at least
// `min_gap` away from 0 and from every other hinge error, so a finite
// difference of half-width < min_gap never crosses a kink of the Lovász term.
LossInput separate_hinge_kinks(LossInput input, double min_gap = 1e-3, double nudge = 1e-3);

struct GradcheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
};

// Central differences over every logit after separate_hinge_kinks().
GradcheckResult gradcheck(const LossFn& loss, const LossInput& input, double step = 1e-4);

}  // namespace segpipe
