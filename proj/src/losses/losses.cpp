#include "hazesplat/losses.hpp"

#include "hazesplat/kernels.hpp"
#include "hazesplat/normalize.hpp"
#include "hazesplat/scatter.hpp"
#include "imgcore/ssim_window.hpp"

#include <algorithm>
#include <cmath>

namespace hazesplat {

void LossWeights::validate() const {
    if (lambda_ssim < 0.0 || lambda_dcp < 0.0 || lambda_depth < 0.0 || lambda_grad < 0.0)
        throw InvariantError("loss weights must be non-negative");
    if (lambda_ssim > 1.0) throw InvariantError("lambda_ssim must not exceed 1");
    if (dcp_patch <= 0 || dcp_patch % 2 == 0) throw InvariantError("dcp patch size must be odd");
}

LossValue l1_loss(const ImageBuffer& rendered, const ImageBuffer& reference) {
    if (!rendered.same_shape(reference)) throw InvariantError("l1_loss: dimension mismatch");
    LossValue out{0.0, ImageBuffer(rendered.height(), rendered.width(), rendered.channels())};
    const auto n = rendered.size();
    const double sum = kernels::active().l1_sign(rendered.data(), reference.data(), out.grad.data(), n,
                                                 static_cast<float>(1.0 / static_cast<double>(n)));
    out.value = sum / static_cast<double>(n);
    return out;
}

LossValue ssim_loss(const ImageBuffer& rendered, const ImageBuffer& reference) {
    detail::check_ssim_inputs(rendered, reference);
    const int h = rendered.height();
    const int w = rendered.width();
    const int nc = rendered.channels();
    LossValue out{0.0, ImageBuffer(h, w, nc)};
    double ssim_total = 0.0;
    for (int c = 0; c < nc; ++c) {
        const auto s = detail::window_stats(rendered, reference, c);
        const std::size_t m = s.mu_a.size();
        // Partials of each window's SSIM with respect to the raw moments
        // E[x], E[x^2], E[xy] of the rendered image.
        std::vector<double> d_m1(m), d_m2(m), d_mxy(m);
        double sum = 0.0;
        const double scale = -1.0 / (static_cast<double>(m) * nc);
        for (std::size_t i = 0; i < m; ++i) {
            const double mx = s.mu_a[i], my = s.mu_b[i];
            const double n1 = 2.0 * mx * my + kSsimC1;
            const double n2 = 2.0 * s.cov[i] + kSsimC2;
            const double d1 = mx * mx + my * my + kSsimC1;
            const double d2 = s.var_a[i] + s.var_b[i] + kSsimC2;
            const double value = (n1 * n2) / (d1 * d2);
            sum += value;
            const double ds_dmu = 2.0 * my * n2 / (d1 * d2) - value * 2.0 * mx / d1;
            const double ds_dvar = -value / d2;
            const double ds_dcov = 2.0 * n1 / (d1 * d2);
            d_m1[i] = scale * (ds_dmu - 2.0 * mx * ds_dvar - my * ds_dcov);
            d_m2[i] = scale * ds_dvar;
            d_mxy[i] = scale * ds_dcov;
        }
        ssim_total += sum / static_cast<double>(m);
        const auto g1 = detail::filter_adjoint(d_m1, h, w, s.window);
        const auto g2 = detail::filter_adjoint(d_m2, h, w, s.window);
        const auto gxy = detail::filter_adjoint(d_mxy, h, w, s.window);
        for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
            const double x = rendered.data()[p * nc + c];
            const double y = reference.data()[p * nc + c];
            out.grad.data()[p * nc + c] = static_cast<float>(g1[p] + 2.0 * x * g2[p] + y * gxy[p]);
        }
    }
    out.value = 1.0 - ssim_total / nc;
    return out;
}

LossValue dcp_loss(const ImageBuffer& rendered, int patch_size) {
    const ImageBuffer dark = dark_channel(rendered, patch_size);
    const int h = rendered.height();
    const int w = rendered.width();
    const int nc = rendered.channels();
    const int r = patch_size / 2;
    const double n = static_cast<double>(dark.size());
    LossValue out{0.0, ImageBuffer(h, w, nc)};
    double sum = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float target = dark.at(y, x);
            sum += target;
            // First (y, x, c) in scan order attaining the window minimum.
            std::size_t arg = 0;
            bool found = false;
            for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r) && !found; ++yy)
                for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r) && !found; ++xx)
                    for (int c = 0; c < nc; ++c)
                        if (rendered.at(yy, xx, c) == target) {
                            arg = rendered.index(yy, xx, c);
                            found = true;
                            break;
                        }
            out.grad.data()[arg] += static_cast<float>(1.0 / n);
        }
    }
    out.value = sum / n;
    return out;
}

LossValue pearson_depth_loss(const ImageBuffer& rendered_depth, const ImageBuffer& pseudo_depth,
                             const ImageBuffer& weights) {
    if (!rendered_depth.same_shape(pseudo_depth) || !rendered_depth.same_shape(weights) ||
        rendered_depth.channels() != 1)
        throw InvariantError("pearson_depth_loss: expected three single-channel maps of equal size");
    for (float v : weights.values())
        if (!(v >= 0.0f)) throw InvariantError("pearson_depth_loss: negative weight");
    const std::size_t n = rendered_depth.size();
    LossValue out{1.0, ImageBuffer(rendered_depth.height(), rendered_depth.width(), 1)};
    const kernels::MomentSums s =
        kernels::active().weighted_moments(weights.data(), rendered_depth.data(), pseudo_depth.data(), n);
    if (!(s.w > 0.0)) return out;
    const double mean_a = s.wa / s.w;
    const double mean_b = s.wb / s.w;
    // Centred second pass: the raw-moment shortcut cancels badly in float data.
    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = weights.data()[i];
        const double da = rendered_depth.data()[i] - mean_a;
        const double db = pseudo_depth.data()[i] - mean_b;
        var_a += wi * da * da;
        var_b += wi * db * db;
        cov += wi * da * db;
    }
    const double denom = std::sqrt(var_a) * std::sqrt(var_b);
    if (denom < kPearsonFloor) return out;
    const double rho = std::clamp(cov / denom, -1.0, 1.0);
    out.value = 1.0 + rho;
    const double inv_denom = 1.0 / denom;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = weights.data()[i];
        const double da = rendered_depth.data()[i] - mean_a;
        const double db = pseudo_depth.data()[i] - mean_b;
        out.grad.data()[i] = static_cast<float>(wi * db * inv_denom - rho * wi * da / var_a);
    }
    return out;
}

namespace {

constexpr int kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr int kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

}  // namespace

namespace {

struct SobelPlanes {
    std::vector<double> gx, gy;
};

SobelPlanes sobel_planes(const ImageBuffer& image) {
    const int h = image.height();
    const int w = image.width();
    const int nc = image.channels();
    SobelPlanes out{std::vector<double>(image.size()), std::vector<double>(image.size())};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < nc; ++c) {
                double gx = 0.0, gy = 0.0;
                for (int j = -1; j <= 1; ++j)
                    for (int i = -1; i <= 1; ++i) {
                        const double v = image.at(std::clamp(y + j, 0, h - 1), std::clamp(x + i, 0, w - 1), c);
                        gx += kSobelX[j + 1][i + 1] * v;
                        gy += kSobelY[j + 1][i + 1] * v;
                    }
                out.gx[image.index(y, x, c)] = gx;
                out.gy[image.index(y, x, c)] = gy;
            }
    return out;
}

}  // namespace

SobelPair sobel(const ImageBuffer& image) {
    const SobelPlanes p = sobel_planes(image);
    SobelPair out{ImageBuffer(image.height(), image.width(), image.channels()),
                  ImageBuffer(image.height(), image.width(), image.channels())};
    for (std::size_t i = 0; i < image.size(); ++i) {
        out.gx.data()[i] = static_cast<float>(p.gx[i]);
        out.gy.data()[i] = static_cast<float>(p.gy[i]);
    }
    return out;
}

LossValue grad_loss_to_reference(const ImageBuffer& rendered, const ImageBuffer& reference) {
    if (!rendered.same_shape(reference)) throw InvariantError("grad_loss: dimension mismatch");
    const int h = rendered.height();
    const int w = rendered.width();
    const int nc = rendered.channels();
    const SobelPlanes a = sobel_planes(rendered);
    const SobelPlanes b = sobel_planes(reference);
    const double n = 2.0 * static_cast<double>(rendered.size());
    LossValue out{0.0, ImageBuffer(h, w, nc)};
    double sum = 0.0;
    std::vector<double> sx(rendered.size()), sy(rendered.size());
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double dx = a.gx[i] - b.gx[i];
        const double dy = a.gy[i] - b.gy[i];
        sum += std::fabs(dx) + std::fabs(dy);
        sx[i] = (dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0)) / n;
        sy[i] = (dy > 0.0 ? 1.0 : (dy < 0.0 ? -1.0 : 0.0)) / n;
    }
    out.value = sum / n;
    // Adjoint of the replicate-padded Sobel: each tap scatters back to the
    // clamped source pixel it read.
    std::vector<double> g(rendered.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < nc; ++c) {
                const std::size_t o = rendered.index(y, x, c);
                if (sx[o] == 0.0 && sy[o] == 0.0) continue;
                for (int j = -1; j <= 1; ++j)
                    for (int i = -1; i <= 1; ++i) {
                        const std::size_t src =
                            rendered.index(std::clamp(y + j, 0, h - 1), std::clamp(x + i, 0, w - 1), c);
                        g[src] += kSobelX[j + 1][i + 1] * sx[o] + kSobelY[j + 1][i + 1] * sy[o];
                    }
            }
    for (std::size_t i = 0; i < g.size(); ++i) out.grad.data()[i] = static_cast<float>(g[i]);
    return out;
}

LossValue grad_loss(const ImageBuffer& rendered, const ImageBuffer& structure, const ImageBuffer& primary) {
    if (!structure.same_shape(primary)) throw InvariantError("grad_loss: structure/primary dimension mismatch");
    return grad_loss_to_reference(rendered, normalize_to(structure, channel_stats(primary)));
}

CompositeLoss composite_loss(const RenderOutput& render, const LossTargets& targets, const LossWeights& weights) {
    weights.validate();
    if (targets.reference == nullptr || targets.pseudo_depth == nullptr || targets.structure == nullptr)
        throw InvariantError("composite_loss: missing reference, pseudo-depth or structure image");
    const ImageBuffer& img = render.color;
    const ImageBuffer* primary = targets.primary != nullptr ? targets.primary : targets.reference;

    CompositeLoss out;
    out.grad_color = ImageBuffer(img.height(), img.width(), img.channels());
    out.grad_depth = ImageBuffer(img.height(), img.width(), 1);
    auto accumulate = [&](ImageBuffer& dst, const ImageBuffer& g, double scale) {
        if (scale == 0.0) return;
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst.data()[i] = static_cast<float>(dst.data()[i] + scale * g.data()[i]);
    };

    const LossValue l1 = l1_loss(img, *targets.reference);
    const LossValue ss = ssim_loss(img, *targets.reference);
    const LossValue dc = dcp_loss(img, weights.dcp_patch);
    const LossValue dp = pearson_depth_loss(render.depth, *targets.pseudo_depth,
                                             targets.depth_weights != nullptr ? *targets.depth_weights : render.alpha);
    const LossValue gr = grad_loss(img, *targets.structure, *primary);

    auto& r = out.report;
    r.l1 = l1.value;
    r.ssim_loss = ss.value;
    r.dcp = dc.value;
    r.depth = dp.value;
    r.grad = gr.value;
    r.total = (1.0 - weights.lambda_ssim) * r.l1 + weights.lambda_ssim * r.ssim_loss +
              weights.lambda_dcp * r.dcp + weights.lambda_depth * r.depth + weights.lambda_grad * r.grad;

    accumulate(out.grad_color, l1.grad, 1.0 - weights.lambda_ssim);
    accumulate(out.grad_color, ss.grad, weights.lambda_ssim);
    accumulate(out.grad_color, dc.grad, weights.lambda_dcp);
    accumulate(out.grad_color, gr.grad, weights.lambda_grad);
    accumulate(out.grad_depth, dp.grad, weights.lambda_depth);
    return out;
}

}  // namespace hazesplat
