#pragma once

#include "hazesplat/image.hpp"
#include "hazesplat/splat.hpp"

namespace hazesplat {

/// Weights of the training objective
///   (1 - ls) L1 + ls L_ssim + ld L_dcp + lp L_depth + lg L_grad.
struct LossWeights {
    double lambda_ssim = 0.2;
    double lambda_dcp = 0.01;
    double lambda_depth = 0.1;
    double lambda_grad = 0.1;
    int dcp_patch = 15;

    void validate() const;
};

struct LossReport {
    double total = 0.0;
    double l1 = 0.0;
    double ssim_loss = 0.0;
    double dcp = 0.0;
    double depth = 0.0;
    double grad = 0.0;
};

/// A scalar loss and its gradient with respect to the first argument.
struct LossValue {
    double value = 0.0;
    ImageBuffer grad;
};

LossValue l1_loss(const ImageBuffer& rendered, const ImageBuffer& reference);

/// 1 - ssim(rendered, reference) with the analytic gradient of the windowed mean.
LossValue ssim_loss(const ImageBuffer& rendered, const ImageBuffer& reference);

/// Mean dark channel. The subgradient sends each output pixel's weight to its
/// argmin (pixel, channel), first in row-major (y, x, c) order on ties.
LossValue dcp_loss(const ImageBuffer& rendered, int patch_size);

/// 1 + weighted Pearson correlation between rendered depth and pseudo
/// inverse-depth. Weighted means; weights and pseudo-depth are constants.
/// Zero total weight or a product of weighted std-devs below 1e-8 yields
/// loss 1 with zero gradient.
LossValue pearson_depth_loss(const ImageBuffer& rendered_depth, const ImageBuffer& pseudo_depth,
                             const ImageBuffer& weights);

inline constexpr double kPearsonFloor = 1e-8;

struct SobelPair {
    ImageBuffer gx;
    ImageBuffer gy;
};

/// 3x3 Sobel per channel with replicate-padded borders.
SobelPair sobel(const ImageBuffer& image);

/// Mean L1 between Sobel responses of `rendered` and of `structure`
/// normalised to the channel statistics of `primary`.
LossValue grad_loss(const ImageBuffer& rendered, const ImageBuffer& structure, const ImageBuffer& primary);

/// Same loss against an already-normalised structural reference.
LossValue grad_loss_to_reference(const ImageBuffer& rendered, const ImageBuffer& reference);

struct LossTargets {
    const ImageBuffer* reference = nullptr;     // primary training image
    const ImageBuffer* pseudo_depth = nullptr;  // pseudo inverse-depth
    const ImageBuffer* structure = nullptr;     // structural edge reference
    const ImageBuffer* primary = nullptr;       // statistics source for `structure`; defaults to reference
    const ImageBuffer* depth_weights = nullptr; // per-pixel depth weights; defaults to render.alpha
};

struct CompositeLoss {
    LossReport report;
    ImageBuffer grad_color;
    ImageBuffer grad_depth;
};

/// Full objective on one rendered view. The depth term weights pixels by
/// render.alpha (or targets.depth_weights), held constant. Terms with zero weight still report their
/// value but contribute no gradient.
CompositeLoss composite_loss(const RenderOutput& render, const LossTargets& targets, const LossWeights& weights);

}  // namespace hazesplat
