#include "segpipe/kernels.hpp"

#include <array>
#include <cmath>

namespace segpipe::kernels {
namespace {

OverlapCounts overlap_counts_scalar(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    OverlapCounts out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.intersection += a[i] & b[i];
        out.count_a += a[i];
        out.count_b += b[i];
    }
    return out;
}

void blend_masked_scalar(std::span<std::uint8_t> dst, std::span<const std::uint8_t> donor,
                         std::span<const std::uint8_t> mask, std::uint32_t weight) {
    const std::uint32_t rest = kBlendDenominator - weight;
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (!mask[i]) {
            continue;
        }
        const std::uint32_t num = weight * donor[i] + rest * dst[i];
        std::uint32_t q = num / kBlendDenominator;
        const std::uint32_t twice_r = 2 * (num % kBlendDenominator);
        if (twice_r > kBlendDenominator || (twice_r == kBlendDenominator && (q & 1u))) {
            ++q;
        }
        dst[i] = static_cast<std::uint8_t>(q > 255 ? 255 : q);
    }
}

DiceSums dice_sums_scalar(std::span<const double> prob, std::span<const std::uint8_t> target) {
    std::array<double, 4> pt{}, p{}, t{};
    const std::size_t n = prob.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (std::size_t l = 0; l < 4; ++l) {
            const double y = target[i + l];
            pt[l] += prob[i + l] * y;
            p[l] += prob[i + l];
            t[l] += y;
        }
    }
    for (std::size_t l = 0; i < n; ++i, ++l) {
        const double y = target[i];
        pt[l] += prob[i] * y;
        p[l] += prob[i];
        t[l] += y;
    }
    return {(pt[0] + pt[1]) + (pt[2] + pt[3]), (p[0] + p[1]) + (p[2] + p[3]), (t[0] + t[1]) + (t[2] + t[3])};
}

void adamw_update_scalar(std::span<double> param, std::span<const double> grad, std::span<double> exp_avg,
                         std::span<double> exp_avg_sq, const AdamWCoefficients& c) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double m = c.beta1 * exp_avg[i] + c.one_minus_beta1 * g;
        const double v = c.beta2 * exp_avg_sq[i] + c.one_minus_beta2 * (g * g);
        exp_avg[i] = m;
        exp_avg_sq[i] = v;
        const double m_hat = m / c.bias_correction1;
        const double v_hat = v / c.bias_correction2;
        const double p = param[i];
        param[i] = (p - c.lr * (m_hat / (std::sqrt(v_hat) + c.eps))) - (c.lr * c.weight_decay) * p;
    }
}

void nesterov_update_scalar(std::span<double> direction, std::span<double> buf, std::span<const double> grad,
                            double momentum) {
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const double b = momentum * buf[i] + grad[i];
        buf[i] = b;
        direction[i] = grad[i] + momentum * b;
    }
}

constexpr KernelTable kScalar{
    "scalar",
    &overlap_counts_scalar,
    &blend_masked_scalar,
    &dice_sums_scalar,
    &adamw_update_scalar,
    &nesterov_update_scalar,
};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace segpipe::kernels
