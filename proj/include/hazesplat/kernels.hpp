#pragma once

// Data-parallel inner loops shared by the image, loss and optimizer code.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2 variant compiled in its own translation unit. The variant is
// chosen once at startup from CPUID; HAZESPLAT_SIMD=scalar in the environment
// forces the reference path. Min/max/clamp kernels are bit-identical across
// variants, and so are the elementwise arithmetic kernels (no FMA is used);
// the two reductions (l1_sign, weighted_moments) agree to summation rounding.

#include <array>
#include <cstddef>
#include <string_view>

namespace hazesplat::kernels {

/// Repeating 24-float pattern for interleaved RGB: lane i holds channel i % 3.
/// 24 = lcm(3, 8) so an AVX2 register sequence lines up with pixel triples.
using RgbPattern = std::array<float, 24>;
RgbPattern make_rgb_pattern(float r, float g, float b);

struct MomentSums {
    double w = 0, wa = 0, wb = 0, waa = 0, wbb = 0, wab = 0;
};

struct KernelTable {
    const char* name;

    // out[y][x] = min(in[y][clamp(x-r .. x+r)]) over a row-major h x w plane.
    void (*row_min)(const float* in, float* out, int h, int w, int radius);
    // out[y][x] = min(in[clamp(y-r .. y+r)][x]).
    void (*col_min)(const float* in, float* out, int h, int w, int radius);

    // Valid correlation along rows: out is h x (w - taps + 1).
    void (*conv_rows)(const double* in, double* out, int h, int w, const double* k, int taps);
    // Valid correlation along columns: out is (h - taps + 1) x w.
    void (*conv_cols)(const double* in, double* out, int h, int w, const double* k, int taps);

    // Bias-corrected Adam; step_size = lr / (1 - beta1^t), bc2 = 1 - beta2^t.
    void (*adam_update)(double* param, const double* grad, double* m, double* v, std::size_t n,
                        double step_size, double beta1, double beta2, double bc2_sqrt, double eps);

    // Returns sum |a - b| and writes sign(a - b) * scale (sign(0) = 0).
    double (*l1_sign)(const float* a, const float* b, float* sign_out, std::size_t n, float scale);

    // data[i] = clamp(data[i] * gain[i % 24] + offset[i % 24], 0, 1) on
    // interleaved RGB (n counts floats, multiple of 3).
    void (*affine_clamp_rgb)(float* data, std::size_t n, const RgbPattern& gain,
                             const RgbPattern& offset);

    // out = clamp(J * t + A * (1 - t), 0, 1) evaluated in double and rounded
    // once; t is per-pixel, J interleaved RGB.
    void (*haze_blend_rgb)(const float* clean, const float* trans, float* out,
                           std::size_t pixels, const RgbPattern& airlight);

    // Weighted first and second moments over (w, a, b).
    MomentSums (*weighted_moments)(const float* w, const float* a, const float* b, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// The table selected for this process.
const KernelTable& active();

}  // namespace hazesplat::kernels
