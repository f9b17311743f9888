#include "hazesplat/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace hazesplat::kernels {

namespace {

void row_min_scalar(const float* in, float* out, int h, int w, int radius) {
    for (int y = 0; y < h; ++y) {
        const float* src = in + static_cast<std::size_t>(y) * w;
        float* dst = out + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(0, x - radius);
            const int hi = std::min(w - 1, x + radius);
            float m = src[lo];
            for (int i = lo + 1; i <= hi; ++i) m = std::min(m, src[i]);
            dst[x] = m;
        }
    }
}

void col_min_scalar(const float* in, float* out, int h, int w, int radius) {
    for (int y = 0; y < h; ++y) {
        const int lo = std::max(0, y - radius);
        const int hi = std::min(h - 1, y + radius);
        float* dst = out + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            float m = in[static_cast<std::size_t>(lo) * w + x];
            for (int j = lo + 1; j <= hi; ++j) m = std::min(m, in[static_cast<std::size_t>(j) * w + x]);
            dst[x] = m;
        }
    }
}

void conv_rows_scalar(const double* in, double* out, int h, int w, const double* k, int taps) {
    const int ow = w - taps + 1;
    for (int y = 0; y < h; ++y) {
        const double* src = in + static_cast<std::size_t>(y) * w;
        double* dst = out + static_cast<std::size_t>(y) * ow;
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < taps; ++t) s += k[t] * src[x + t];
            dst[x] = s;
        }
    }
}

void conv_cols_scalar(const double* in, double* out, int h, int w, const double* k, int taps) {
    const int oh = h - taps + 1;
    for (int y = 0; y < oh; ++y) {
        double* dst = out + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = 0; t < taps; ++t) s += k[t] * in[static_cast<std::size_t>(y + t) * w + x];
            dst[x] = s;
        }
    }
}

void adam_update_scalar(double* param, const double* grad, double* m, double* v, std::size_t n,
                        double step_size, double beta1, double beta2, double bc2_sqrt, double eps) {
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        param[i] -= step_size * m[i] / (std::sqrt(v[i]) / bc2_sqrt + eps);
    }
}

double l1_sign_scalar(const float* a, const float* b, float* sign_out, std::size_t n, float scale) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const float d = a[i] - b[i];
        sum += std::fabs(static_cast<double>(d));
        sign_out[i] = d > 0.0f ? scale : (d < 0.0f ? -scale : 0.0f);
    }
    return sum;
}

void affine_clamp_rgb_scalar(float* data, std::size_t n, const RgbPattern& gain,
                             const RgbPattern& offset) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 3;
        const float v = data[i] * gain[c] + offset[c];
        data[i] = std::clamp(v, 0.0f, 1.0f);
    }
}

void haze_blend_rgb_scalar(const float* clean, const float* trans, float* out, std::size_t pixels,
                           const RgbPattern& airlight) {
    for (std::size_t p = 0; p < pixels; ++p) {
        const double t = trans[p];
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = static_cast<double>(clean[p * 3 + c]) * t + static_cast<double>(airlight[c]) * (1.0 - t);
            out[p * 3 + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
}

MomentSums weighted_moments_scalar(const float* w, const float* a, const float* b, std::size_t n) {
    MomentSums s;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w[i];
        const double ai = a[i];
        const double bi = b[i];
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

RgbPattern make_rgb_pattern(float r, float g, float b) {
    RgbPattern p{};
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = (i % 3 == 0) ? r : (i % 3 == 1 ? g : b);
    return p;
}

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar",
        row_min_scalar,
        col_min_scalar,
        conv_rows_scalar,
        conv_cols_scalar,
        adam_update_scalar,
        l1_sign_scalar,
        affine_clamp_rgb_scalar,
        haze_blend_rgb_scalar,
        weighted_moments_scalar,
    };
    return table;
}

}  // namespace hazesplat::kernels
