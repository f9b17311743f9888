// AVX2 variants. Compiled with -mavx2 -ffp-contract=off and no FMA so that
// every elementwise kernel performs the same IEEE operations, in the same
// order, as the scalar reference; only the two reductions reassociate.

#include "hazesplat/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace hazesplat::kernels {

namespace {

void row_min_avx2(const float* in, float* out, int h, int w, int radius) {
    for (int y = 0; y < h; ++y) {
        const float* src = in + static_cast<std::size_t>(y) * w;
        float* dst = out + static_cast<std::size_t>(y) * w;
        auto scalar_at = [&](int x) {
            const int lo = std::max(0, x - radius);
            const int hi = std::min(w - 1, x + radius);
            float m = src[lo];
            for (int i = lo + 1; i <= hi; ++i) m = std::min(m, src[i]);
            dst[x] = m;
        };
        int x = 0;
        for (; x < std::min(radius, w); ++x) scalar_at(x);
        // Interior: the full window [x - r, x + r + 7] lies inside the row.
        for (; x + 7 + radius < w; x += 8) {
            __m256 m = _mm256_loadu_ps(src + x - radius);
            for (int i = -radius + 1; i <= radius; ++i) m = _mm256_min_ps(m, _mm256_loadu_ps(src + x + i));
            _mm256_storeu_ps(dst + x, m);
        }
        for (; x < w; ++x) scalar_at(x);
    }
}

void col_min_avx2(const float* in, float* out, int h, int w, int radius) {
    for (int y = 0; y < h; ++y) {
        const int lo = std::max(0, y - radius);
        const int hi = std::min(h - 1, y + radius);
        float* dst = out + static_cast<std::size_t>(y) * w;
        int x = 0;
        for (; x + 8 <= w; x += 8) {
            __m256 m = _mm256_loadu_ps(in + static_cast<std::size_t>(lo) * w + x);
            for (int j = lo + 1; j <= hi; ++j)
                m = _mm256_min_ps(m, _mm256_loadu_ps(in + static_cast<std::size_t>(j) * w + x));
            _mm256_storeu_ps(dst + x, m);
        }
        for (; x < w; ++x) {
            float m = in[static_cast<std::size_t>(lo) * w + x];
            for (int j = lo + 1; j <= hi; ++j) m = std::min(m, in[static_cast<std::size_t>(j) * w + x]);
            dst[x] = m;
        }
    }
}

void conv_rows_avx2(const double* in, double* out, int h, int w, const double* k, int taps) {
    const int ow = w - taps + 1;
    for (int y = 0; y < h; ++y) {
        const double* src = in + static_cast<std::size_t>(y) * w;
        double* dst = out + static_cast<std::size_t>(y) * ow;
        int x = 0;
        for (; x + 4 <= ow; x += 4) {
            __m256d s = _mm256_setzero_pd();
            for (int t = 0; t < taps; ++t)
                s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_set1_pd(k[t]), _mm256_loadu_pd(src + x + t)));
            _mm256_storeu_pd(dst + x, s);
        }
        for (; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < taps; ++t) s += k[t] * src[x + t];
            dst[x] = s;
        }
    }
}

void conv_cols_avx2(const double* in, double* out, int h, int w, const double* k, int taps) {
    const int oh = h - taps + 1;
    for (int y = 0; y < oh; ++y) {
        double* dst = out + static_cast<std::size_t>(y) * w;
        int x = 0;
        for (; x + 4 <= w; x += 4) {
            __m256d s = _mm256_setzero_pd();
            for (int t = 0; t < taps; ++t)
                s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_set1_pd(k[t]),
                                                   _mm256_loadu_pd(in + static_cast<std::size_t>(y + t) * w + x)));
            _mm256_storeu_pd(dst + x, s);
        }
        for (; x < w; ++x) {
            double s = 0.0;
            for (int t = 0; t < taps; ++t) s += k[t] * in[static_cast<std::size_t>(y + t) * w + x];
            dst[x] = s;
        }
    }
}

void adam_update_avx2(double* param, const double* grad, double* m, double* v, std::size_t n,
                      double step_size, double beta1, double beta2, double bc2_sqrt, double eps) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d one_b1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d one_b2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d ss = _mm256_set1_pd(step_size);
    const __m256d bc2 = _mm256_set1_pd(bc2_sqrt);
    const __m256d ep = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(one_b1, g));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(_mm256_mul_pd(one_b2, g), g));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d denom = _mm256_add_pd(_mm256_div_pd(_mm256_sqrt_pd(vi), bc2), ep);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(ss, mi), denom);
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        param[i] -= step_size * m[i] / (std::sqrt(v[i]) / bc2_sqrt + eps);
    }
}

double l1_sign_avx2(const float* a, const float* b, float* sign_out, std::size_t n, float scale) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 pos = _mm256_set1_ps(scale);
    const __m256 neg = _mm256_set1_ps(-scale);
    const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
    __m256d acc_lo = _mm256_setzero_pd();
    __m256d acc_hi = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        const __m256 ad = _mm256_and_ps(d, abs_mask);
        acc_lo = _mm256_add_pd(acc_lo, _mm256_cvtps_pd(_mm256_castps256_ps128(ad)));
        acc_hi = _mm256_add_pd(acc_hi, _mm256_cvtps_pd(_mm256_extractf128_ps(ad, 1)));
        const __m256 gt = _mm256_cmp_ps(d, zero, _CMP_GT_OQ);
        const __m256 lt = _mm256_cmp_ps(d, zero, _CMP_LT_OQ);
        const __m256 s = _mm256_or_ps(_mm256_and_ps(gt, pos), _mm256_and_ps(lt, neg));
        _mm256_storeu_ps(sign_out + i, s);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, _mm256_add_pd(acc_lo, acc_hi));
    double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) {
        const float d = a[i] - b[i];
        sum += std::fabs(static_cast<double>(d));
        sign_out[i] = d > 0.0f ? scale : (d < 0.0f ? -scale : 0.0f);
    }
    return sum;
}

inline __m256 clamp01(__m256 v) {
    // max(0, v) keeps -0.0 like std::clamp does.
    return _mm256_min_ps(_mm256_max_ps(_mm256_setzero_ps(), v), _mm256_set1_ps(1.0f));
}

void affine_clamp_rgb_avx2(float* data, std::size_t n, const RgbPattern& gain, const RgbPattern& offset) {
    const __m256 g0 = _mm256_loadu_ps(gain.data());
    const __m256 g1 = _mm256_loadu_ps(gain.data() + 8);
    const __m256 g2 = _mm256_loadu_ps(gain.data() + 16);
    const __m256 o0 = _mm256_loadu_ps(offset.data());
    const __m256 o1 = _mm256_loadu_ps(offset.data() + 8);
    const __m256 o2 = _mm256_loadu_ps(offset.data() + 16);
    std::size_t i = 0;
    for (; i + 24 <= n; i += 24) {
        _mm256_storeu_ps(data + i, clamp01(_mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(data + i), g0), o0)));
        _mm256_storeu_ps(data + i + 8, clamp01(_mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(data + i + 8), g1), o1)));
        _mm256_storeu_ps(data + i + 16, clamp01(_mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(data + i + 16), g2), o2)));
    }
    for (; i < n; ++i) {
        const std::size_t c = i % 3;
        data[i] = std::clamp(data[i] * gain[c] + offset[c], 0.0f, 1.0f);
    }
}

void haze_blend_rgb_avx2(const float* clean, const float* trans, float* out, std::size_t pixels,
                         const RgbPattern& airlight) {
    // Four pixels = twelve interleaved values = three double registers.
    const __m128i idx0 = _mm_setr_epi32(0, 0, 0, 1);
    const __m128i idx1 = _mm_setr_epi32(1, 1, 2, 2);
    const __m128i idx2 = _mm_setr_epi32(2, 3, 3, 3);
    const __m256d a0 = _mm256_cvtps_pd(_mm_loadu_ps(airlight.data()));
    const __m256d a1 = _mm256_cvtps_pd(_mm_loadu_ps(airlight.data() + 4));
    const __m256d a2 = _mm256_cvtps_pd(_mm_loadu_ps(airlight.data() + 8));
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    auto blend = [&](const float* j, __m128 t4, __m128i idx, __m256d a) {
        const __m256d t = _mm256_cvtps_pd(_mm_permutevar_ps(t4, idx));
        const __m256d v = _mm256_add_pd(_mm256_mul_pd(_mm256_cvtps_pd(_mm_loadu_ps(j)), t),
                                        _mm256_mul_pd(a, _mm256_sub_pd(one, t)));
        return _mm256_cvtpd_ps(_mm256_min_pd(_mm256_max_pd(zero, v), one));
    };
    std::size_t p = 0;
    for (; p + 4 <= pixels; p += 4) {
        const __m128 t4 = _mm_loadu_ps(trans + p);
        const float* j = clean + p * 3;
        float* o = out + p * 3;
        _mm_storeu_ps(o, blend(j, t4, idx0, a0));
        _mm_storeu_ps(o + 4, blend(j + 4, t4, idx1, a1));
        _mm_storeu_ps(o + 8, blend(j + 8, t4, idx2, a2));
    }
    for (; p < pixels; ++p) {
        const double t = trans[p];
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = static_cast<double>(clean[p * 3 + c]) * t + static_cast<double>(airlight[c]) * (1.0 - t);
            out[p * 3 + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
}

MomentSums weighted_moments_avx2(const float* w, const float* a, const float* b, std::size_t n) {
    __m256d sw = _mm256_setzero_pd(), swa = sw, swb = sw, swaa = sw, swbb = sw, swab = sw;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d wi = _mm256_cvtps_pd(_mm_loadu_ps(w + i));
        const __m256d ai = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        const __m256d bi = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
        const __m256d wa = _mm256_mul_pd(wi, ai);
        const __m256d wb = _mm256_mul_pd(wi, bi);
        sw = _mm256_add_pd(sw, wi);
        swa = _mm256_add_pd(swa, wa);
        swb = _mm256_add_pd(swb, wb);
        swaa = _mm256_add_pd(swaa, _mm256_mul_pd(wa, ai));
        swbb = _mm256_add_pd(swbb, _mm256_mul_pd(wb, bi));
        swab = _mm256_add_pd(swab, _mm256_mul_pd(wa, bi));
    }
    auto hsum = [](__m256d v) {
        alignas(32) double l[4];
        _mm256_store_pd(l, v);
        return (l[0] + l[1]) + (l[2] + l[3]);
    };
    MomentSums s{hsum(sw), hsum(swa), hsum(swb), hsum(swaa), hsum(swbb), hsum(swab)};
    for (; i < n; ++i) {
        const double wi = w[i], ai = a[i], bi = b[i];
        s.w += wi;
        s.wa += wi * ai;
        s.wb += wi * bi;
        s.waa += wi * ai * ai;
        s.wbb += wi * bi * bi;
        s.wab += wi * ai * bi;
    }
    return s;
}

}  // namespace

const KernelTable* avx2_kernels_compiled() {
    static const KernelTable table{
        "avx2",
        row_min_avx2,
        col_min_avx2,
        conv_rows_avx2,
        conv_cols_avx2,
        adam_update_avx2,
        l1_sign_avx2,
        affine_clamp_rgb_avx2,
        haze_blend_rgb_avx2,
        weighted_moments_avx2,
    };
    return &table;
}

}  // namespace hazesplat::kernels
