#include "segpipe/kernels.hpp"

#include <immintrin.h>

#include <array>
#include <cmath>
#include <cstring>

namespace segpipe::kernels {
namespace {

std::uint64_t hsum_epi64(__m256i v) {
    alignas(32) std::array<std::uint64_t, 4> lanes;
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes.data()), v);
    return lanes[0] + lanes[1] + lanes[2] + lanes[3];
}

OverlapCounts overlap_counts_avx2(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    const std::size_t n = a.size();
    const __m256i zero = _mm256_setzero_si256();
    __m256i inter = zero, ca = zero, cb = zero;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a.data() + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b.data() + i));
        inter = _mm256_add_epi64(inter, _mm256_sad_epu8(_mm256_and_si256(va, vb), zero));
        ca = _mm256_add_epi64(ca, _mm256_sad_epu8(va, zero));
        cb = _mm256_add_epi64(cb, _mm256_sad_epu8(vb, zero));
    }
    OverlapCounts out{hsum_epi64(inter), hsum_epi64(ca), hsum_epi64(cb)};
    for (; i < n; ++i) {
        out.intersection += a[i] & b[i];
        out.count_a += a[i];
        out.count_b += b[i];
    }
    return out;
}

// Four pixels per iteration in double lanes; every intermediate is an exact
// integer below 2^31, so floor(num / D) and the remainder are exact.
void blend_masked_avx2(std::span<std::uint8_t> dst, std::span<const std::uint8_t> donor,
                       std::span<const std::uint8_t> mask, std::uint32_t weight) {
    const std::size_t n = dst.size();
    const __m256d w = _mm256_set1_pd(static_cast<double>(weight));
    const __m256d rest = _mm256_set1_pd(static_cast<double>(kBlendDenominator - weight));
    const __m256d den = _mm256_set1_pd(static_cast<double>(kBlendDenominator));
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d max_value = _mm256_set1_pd(255.0);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        std::uint32_t mask_word;
        std::memcpy(&mask_word, mask.data() + i, 4);
        if (mask_word == 0) {
            continue;
        }
        std::uint32_t donor_word, dst_word;
        std::memcpy(&donor_word, donor.data() + i, 4);
        std::memcpy(&dst_word, dst.data() + i, 4);
        const __m256d d = _mm256_cvtepi32_pd(_mm_cvtepu8_epi32(_mm_cvtsi32_si128(static_cast<int>(donor_word))));
        const __m256d a = _mm256_cvtepi32_pd(_mm_cvtepu8_epi32(_mm_cvtsi32_si128(static_cast<int>(dst_word))));
        const __m256d num = _mm256_add_pd(_mm256_mul_pd(w, d), _mm256_mul_pd(rest, a));
        __m256d q = _mm256_floor_pd(_mm256_div_pd(num, den));
        const __m256d twice_r = _mm256_mul_pd(two, _mm256_sub_pd(num, _mm256_mul_pd(q, den)));
        const __m256d q_odd =
            _mm256_cmp_pd(_mm256_sub_pd(q, _mm256_mul_pd(two, _mm256_floor_pd(_mm256_mul_pd(q, half)))), one,
                          _CMP_EQ_OQ);
        const __m256d up = _mm256_or_pd(_mm256_cmp_pd(twice_r, den, _CMP_GT_OQ),
                                        _mm256_and_pd(_mm256_cmp_pd(twice_r, den, _CMP_EQ_OQ), q_odd));
        q = _mm256_min_pd(_mm256_add_pd(q, _mm256_and_pd(up, one)), max_value);

        alignas(16) std::array<std::int32_t, 4> out;
        _mm_store_si128(reinterpret_cast<__m128i*>(out.data()), _mm256_cvtpd_epi32(q));
        for (std::size_t l = 0; l < 4; ++l) {
            if (mask[i + l]) {
                dst[i + l] = static_cast<std::uint8_t>(out[l]);
            }
        }
    }
    if (i < n) {
        scalar_table().blend_masked(dst.subspan(i), donor.subspan(i), mask.subspan(i), weight);
    }
}

DiceSums dice_sums_avx2(std::span<const double> prob, std::span<const std::uint8_t> target) {
    const std::size_t n = prob.size();
    __m256d pt = _mm256_setzero_pd(), p = _mm256_setzero_pd(), t = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        std::uint32_t word;
        std::memcpy(&word, target.data() + i, 4);
        const __m256d y = _mm256_cvtepi32_pd(_mm_cvtepu8_epi32(_mm_cvtsi32_si128(static_cast<int>(word))));
        const __m256d x = _mm256_loadu_pd(prob.data() + i);
        pt = _mm256_add_pd(pt, _mm256_mul_pd(x, y));
        p = _mm256_add_pd(p, x);
        t = _mm256_add_pd(t, y);
    }
    alignas(32) std::array<double, 4> lpt, lp, lt;
    _mm256_store_pd(lpt.data(), pt);
    _mm256_store_pd(lp.data(), p);
    _mm256_store_pd(lt.data(), t);
    for (std::size_t l = 0; i < n; ++i, ++l) {
        const double y = target[i];
        lpt[l] += prob[i] * y;
        lp[l] += prob[i];
        lt[l] += y;
    }
    return {(lpt[0] + lpt[1]) + (lpt[2] + lpt[3]), (lp[0] + lp[1]) + (lp[2] + lp[3]),
            (lt[0] + lt[1]) + (lt[2] + lt[3])};
}

void adamw_update_avx2(std::span<double> param, std::span<const double> grad, std::span<double> exp_avg,
                       std::span<double> exp_avg_sq, const AdamWCoefficients& c) {
    const std::size_t n = param.size();
    const __m256d b1 = _mm256_set1_pd(c.beta1), b2 = _mm256_set1_pd(c.beta2);
    const __m256d omb1 = _mm256_set1_pd(c.one_minus_beta1), omb2 = _mm256_set1_pd(c.one_minus_beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias_correction1), bc2 = _mm256_set1_pd(c.bias_correction2);
    const __m256d lr = _mm256_set1_pd(c.lr), eps = _mm256_set1_pd(c.eps);
    const __m256d decay = _mm256_set1_pd(c.lr * c.weight_decay);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad.data() + i);
        const __m256d m = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(exp_avg.data() + i)), _mm256_mul_pd(omb1, g));
        const __m256d v = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(exp_avg_sq.data() + i)),
                                        _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(exp_avg.data() + i, m);
        _mm256_storeu_pd(exp_avg_sq.data() + i, v);
        const __m256d m_hat = _mm256_div_pd(m, bc1);
        const __m256d v_hat = _mm256_div_pd(v, bc2);
        const __m256d p = _mm256_loadu_pd(param.data() + i);
        const __m256d step = _mm256_mul_pd(lr, _mm256_div_pd(m_hat, _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps)));
        _mm256_storeu_pd(param.data() + i, _mm256_sub_pd(_mm256_sub_pd(p, step), _mm256_mul_pd(decay, p)));
    }
    if (i < n) {
        scalar_table().adamw_update(param.subspan(i), grad.subspan(i), exp_avg.subspan(i), exp_avg_sq.subspan(i), c);
    }
}

void nesterov_update_avx2(std::span<double> direction, std::span<double> buf, std::span<const double> grad,
                          double momentum) {
    const std::size_t n = buf.size();
    const __m256d mu = _mm256_set1_pd(momentum);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad.data() + i);
        const __m256d b = _mm256_add_pd(_mm256_mul_pd(mu, _mm256_loadu_pd(buf.data() + i)), g);
        _mm256_storeu_pd(buf.data() + i, b);
        _mm256_storeu_pd(direction.data() + i, _mm256_add_pd(g, _mm256_mul_pd(mu, b)));
    }
    if (i < n) {
        scalar_table().nesterov_update(direction.subspan(i), buf.subspan(i), grad.subspan(i), momentum);
    }
}

constexpr KernelTable kAvx2{
    "avx2",
    &overlap_counts_avx2,
    &blend_masked_avx2,
    &dice_sums_avx2,
    &adamw_update_avx2,
    &nesterov_update_avx2,
};

}  // namespace

const KernelTable& avx2_table_unchecked() noexcept { return kAvx2; }

}  // namespace segpipe::kernels
