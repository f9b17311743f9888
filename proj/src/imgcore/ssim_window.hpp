#pragma once

// Windowed SSIM statistics shared by the metric and the SSIM loss.

#include "hazesplat/image.hpp"

#include <vector>

namespace hazesplat::detail {

/// Separable valid-mode Gaussian filtering of a single h x w plane with a
/// k x k window. Output is (h - k + 1) x (w - k + 1).
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, int k);

/// Adjoint of filter_valid: scatters an (h - k + 1) x (w - k + 1) map back
/// onto an h x w plane (zero-padded full correlation, symmetric taps).
std::vector<double> filter_adjoint(const std::vector<double>& map, int h, int w, int k);

/// Per-window statistics of one channel of a and b.
struct SsimWindowStats {
    int window = 0;
    int out_h = 0;
    int out_w = 0;
    std::vector<double> mu_a, mu_b, var_a, var_b, cov;
};

SsimWindowStats window_stats(const ImageBuffer& a, const ImageBuffer& b, int channel);

inline double ssim_at(double mu_a, double mu_b, double var_a, double var_b, double cov) {
    const double n1 = 2.0 * mu_a * mu_b + kSsimC1;
    const double n2 = 2.0 * cov + kSsimC2;
    const double d1 = mu_a * mu_a + mu_b * mu_b + kSsimC1;
    const double d2 = var_a + var_b + kSsimC2;
    return (n1 * n2) / (d1 * d2);
}

void check_ssim_inputs(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace hazesplat::detail
