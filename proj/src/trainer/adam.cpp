#include "hazesplat/trainer.hpp"

#include "hazesplat/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace hazesplat {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr, int step,
               const AdamHyper& hyper) {
    if (params.size() != grads.size()) throw InvariantError("adam_step: parameter/gradient size mismatch");
    if (step < 1) throw InvariantError("adam_step: steps are 1-based");
    state.m.resize(params.size(), 0.0);
    state.v.resize(params.size(), 0.0);
    const double bc1 = 1.0 - std::pow(hyper.beta1, step);
    const double bc2 = 1.0 - std::pow(hyper.beta2, step);
    kernels::active().adam_update(params.data(), grads.data(), state.m.data(), state.v.data(), params.size(),
                                  lr / bc1, hyper.beta1, hyper.beta2, std::sqrt(bc2), hyper.eps);
}

CloudLayout CloudLayout::identity(std::size_t n) {
    CloudLayout l;
    l.source.resize(n);
    for (std::size_t i = 0; i < n; ++i) l.source[i] = i;
    l.reset.assign(n, 0);
    return l;
}

bool CloudLayout::is_identity() const {
    for (std::size_t i = 0; i < source.size(); ++i)
        if (source[i] != i || reset[i]) return false;
    return true;
}

CloudOptimizer::CloudOptimizer(const OptimConfig& cfg, std::size_t n) : cfg_(cfg) {
    means_.m.assign(3 * n, 0.0);
    means_.v.assign(3 * n, 0.0);
    colors_ = means_;
    scales_.m.assign(n, 0.0);
    scales_.v.assign(n, 0.0);
    opacity_ = scales_;
}

void CloudOptimizer::step(GaussianCloud& cloud, const CloudGradients& grads, int step) {
    const AdamHyper hyper{cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps};
    adam_step(cloud.means, grads.means, means_, cfg_.lr_means, step, hyper);
    adam_step(cloud.log_scales, grads.log_scales, scales_, cfg_.lr_scales, step, hyper);
    adam_step(cloud.logit_opacities, grads.logit_opacities, opacity_, cfg_.lr_opacities, step, hyper);
    adam_step(cloud.colors, grads.colors, colors_, cfg_.lr_colors, step, hyper);
    for (double& c : cloud.colors) c = std::clamp(c, 0.0, 1.0);
}

namespace {

void remap(AdamState& state, const CloudLayout& layout, std::size_t stride) {
    AdamState out;
    out.m.assign(layout.source.size() * stride, 0.0);
    out.v.assign(layout.source.size() * stride, 0.0);
    for (std::size_t i = 0; i < layout.source.size(); ++i) {
        if (layout.reset[i]) continue;
        for (std::size_t k = 0; k < stride; ++k) {
            out.m[i * stride + k] = state.m[layout.source[i] * stride + k];
            out.v[i * stride + k] = state.v[layout.source[i] * stride + k];
        }
    }
    state = std::move(out);
}

}  // namespace

void CloudOptimizer::apply(const CloudLayout& layout) {
    if (layout.is_identity() && layout.source.size() == size()) return;
    remap(means_, layout, 3);
    remap(colors_, layout, 3);
    remap(scales_, layout, 1);
    remap(opacity_, layout, 1);
}

}  // namespace hazesplat
