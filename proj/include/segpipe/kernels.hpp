#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference variant and,
// where the target supports it, an AVX2 variant. All variants produce
// bit-identical results; reductions use a fixed four-lane striped order so
// the vector and scalar paths accumulate in the same sequence.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace segpipe::kernels {

struct OverlapCounts {
    std::uint64_t intersection = 0;
    std::uint64_t count_a = 0;
    std::uint64_t count_b = 0;
};

struct DiceSums {
    double prob_target = 0.0;  // sum p_i * y_i
    double prob = 0.0;         // sum p_i
    double target = 0.0;       // sum y_i
};

struct AdamWCoefficients {
    double lr = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double one_minus_beta1 = 0.1;
    double one_minus_beta2 = 0.001;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double bias_correction1 = 1.0;  // 1 - beta1^t
    double bias_correction2 = 1.0;  // 1 - beta2^t
};

// Blend weight as an exact rational weight / kBlendDenominator.
inline constexpr std::uint32_t kBlendDenominator = 10000;

struct KernelTable {
    std::string_view name;

    // a and b hold 0/1 bytes of equal length.
    OverlapCounts (*overlap_counts)(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

    // dst[i] = round_half_even((w * donor[i] + (D - w) * dst[i]) / D) where mask[i] != 0.
    void (*blend_masked)(std::span<std::uint8_t> dst, std::span<const std::uint8_t> donor,
                         std::span<const std::uint8_t> mask, std::uint32_t weight);

    DiceSums (*dice_sums)(std::span<const double> prob, std::span<const std::uint8_t> target);

    void (*adamw_update)(std::span<double> param, std::span<const double> grad, std::span<double> exp_avg,
                         std::span<double> exp_avg_sq, const AdamWCoefficients& c);

    // buf = momentum * buf + g; direction = g + momentum * buf
    void (*nesterov_update)(std::span<double> direction, std::span<double> buf, std::span<const double> grad,
                            double momentum);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the AVX2 variants were not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_table() noexcept;

// Chosen once per process: AVX2 when available unless SEGPIPE_SIMD=scalar.
const KernelTable& active() noexcept;

}  // namespace segpipe::kernels
