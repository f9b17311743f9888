#include "hazesplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hazesplat {

std::string to_string(Strategy s) { return s == Strategy::Mcmc ? "mcmc" : "default"; }

Strategy parse_strategy(const std::string& s) {
    if (s == "mcmc") return Strategy::Mcmc;
    if (s == "default") return Strategy::Default;
    throw InvariantError("unknown densification strategy '" + s + "' (expected mcmc|default)");
}

void DensifyConfig::validate(int total_steps) const {
    if (densify_start < 0 || densify_start >= densify_stop)
        throw InvariantError("densify: start must be >= 0 and below stop");
    if (total_steps > 0 && densify_stop > total_steps)
        throw InvariantError("densify: stop must not exceed total steps");
    if (refine_interval <= 0) throw InvariantError("densify: refine interval must be positive");
    if (noise_decay_step <= 0) throw InvariantError("densify: noise decay step must be positive");
    if (noise_lr < 0.0 || opacity_prune_threshold < 0.0 || default_grad_threshold < 0.0 || growth_rate < 0.0)
        throw InvariantError("densify: rates and thresholds must be non-negative");
    if (cap_max == 0) throw InvariantError("densify: cap_max must be positive");
}

bool should_densify(int step, const DensifyConfig& cfg) {
    return step >= cfg.densify_start && step < cfg.densify_stop && step % cfg.refine_interval == 0;
}

double noise_scale(int step, const DensifyConfig& cfg) {
    if (step >= cfg.noise_decay_step) return 0.0;
    return cfg.noise_lr * std::max(0.0, 1.0 - static_cast<double>(step) / cfg.noise_decay_step);
}

double noise_gate(double opacity) { return 1.0 / (1.0 + std::exp(-100.0 * ((1.0 - opacity) - 0.995))); }

namespace {

double safe_logit(double p) { return logit(std::clamp(p, 1e-6, 1.0 - 1e-6)); }

// Draws `count` sources among Gaussians with opacity >= threshold, weighted
// by opacity. Empty when nothing is alive.
std::vector<std::size_t> sample_alive(const GaussianCloud& cloud, double threshold, std::size_t count,
                                      std::mt19937_64& rng) {
    std::vector<std::size_t> alive;
    std::vector<double> weights;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double o = cloud.opacity(i);
        if (o >= threshold) {
            alive.push_back(i);
            weights.push_back(o);
        }
    }
    std::vector<std::size_t> picks;
    if (alive.empty() || count == 0) return picks;
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    picks.reserve(count);
    for (std::size_t k = 0; k < count; ++k) picks.push_back(alive[dist(rng)]);
    return picks;
}

// Each source shared by k copies (itself included) gets opacity
// 1 - (1 - o)^(1/k), so the stacked copies composite to the original.
std::map<std::size_t, double> split_opacities(const GaussianCloud& cloud, const std::vector<std::size_t>& picks) {
    std::map<std::size_t, int> copies;
    for (std::size_t s : picks) ++copies[s];
    std::map<std::size_t, double> out;
    for (const auto& [s, n] : copies) out[s] = 1.0 - std::pow(1.0 - cloud.opacity(s), 1.0 / (n + 1));
    return out;
}

}  // namespace

CloudLayout mcmc_step(GaussianCloud& cloud, int step, const DensifyConfig& cfg, double lr_means,
                      std::mt19937_64& rng) {
    CloudLayout layout = CloudLayout::identity(cloud.size());
    if (should_densify(step, cfg)) {
        std::vector<std::size_t> dead;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (cloud.opacity(i) < cfg.opacity_prune_threshold) dead.push_back(i);
        if (!dead.empty()) {
            const auto picks = sample_alive(cloud, cfg.opacity_prune_threshold, dead.size(), rng);
            if (!picks.empty()) {
                const auto shared = split_opacities(cloud, picks);
                for (std::size_t k = 0; k < dead.size(); ++k) {
                    GaussianParams g = cloud.get(picks[k]);
                    g.logit_opacity = safe_logit(shared.at(picks[k]));
                    cloud.set(dead[k], g);
                    layout.reset[dead[k]] = 1;
                }
                for (const auto& [s, o] : shared) {
                    cloud.logit_opacities[s] = safe_logit(o);
                    layout.reset[s] = 1;
                }
            }
        }
        const std::size_t n = cloud.size();
        if (n < cfg.cap_max) {
            const auto grow = static_cast<std::size_t>(std::floor(cfg.growth_rate * static_cast<double>(n)));
            const std::size_t n_add = std::min(cfg.cap_max - n, std::max<std::size_t>(grow, 1));
            const auto picks = sample_alive(cloud, cfg.opacity_prune_threshold, n_add, rng);
            if (!picks.empty()) {
                const auto shared = split_opacities(cloud, picks);
                for (std::size_t s : picks) {
                    GaussianParams g = cloud.get(s);
                    g.logit_opacity = safe_logit(shared.at(s));
                    cloud.push_back(g);
                    layout.source.push_back(s);
                    layout.reset.push_back(1);
                }
                for (const auto& [s, o] : shared) {
                    cloud.logit_opacities[s] = safe_logit(o);
                    layout.reset[s] = 1;
                }
            }
        }
    }

    const double ns = noise_scale(step, cfg);
    if (ns > 0.0) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double scale = cloud.scale(i);
            const double amp = ns * lr_means * scale * scale * noise_gate(cloud.opacity(i));
            for (int k = 0; k < 3; ++k) cloud.means[3 * i + k] += normal(rng) * amp;
        }
    }
    return layout;
}

void GradAccumulator::resize(std::size_t n) {
    screen_grad_sum.assign(n, 0.0);
    mean_grad_sum.assign(3 * n, 0.0);
    count.assign(n, 0);
}

void GradAccumulator::add(const CloudGradients& grads) {
    if (count.size() != grads.visible.size()) resize(grads.visible.size());
    for (std::size_t i = 0; i < count.size(); ++i) {
        if (!grads.visible[i]) continue;
        screen_grad_sum[i] += grads.screen_grad_norm[i];
        for (int k = 0; k < 3; ++k) mean_grad_sum[3 * i + k] += grads.means[3 * i + k];
        ++count[i];
    }
}

void GradAccumulator::apply(const CloudLayout& layout) {
    GradAccumulator out;
    out.resize(layout.source.size());
    for (std::size_t i = 0; i < layout.source.size(); ++i) {
        if (layout.reset[i]) continue;
        const std::size_t s = layout.source[i];
        out.screen_grad_sum[i] = screen_grad_sum[s];
        for (int k = 0; k < 3; ++k) out.mean_grad_sum[3 * i + k] = mean_grad_sum[3 * s + k];
        out.count[i] = count[s];
    }
    *this = std::move(out);
}

CloudLayout default_densify_step(GaussianCloud& cloud, GradAccumulator& accum, int step, const DensifyConfig& cfg,
                                 double scene_scale) {
    const std::size_t n = cloud.size();
    if (!should_densify(step, cfg)) return CloudLayout::identity(n);
    if (accum.count.size() != n) accum.resize(n);

    std::vector<GaussianParams> params;
    std::vector<std::size_t> source;
    std::vector<std::uint8_t> reset;
    params.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        params.push_back(cloud.get(i));
        source.push_back(i);
        reset.push_back(0);
    }
    const double split_scale = 0.01 * scene_scale;
    std::size_t total = n;
    for (std::size_t i = 0; i < n && total < cfg.cap_max; ++i) {
        if (accum.count[i] == 0) continue;
        const double avg = accum.screen_grad_sum[i] / accum.count[i];
        if (!(avg > cfg.default_grad_threshold)) continue;
        const double scale = cloud.scale(i);
        if (scale > split_scale) {
            Vec3 dir{accum.mean_grad_sum[3 * i], accum.mean_grad_sum[3 * i + 1], accum.mean_grad_sum[3 * i + 2]};
            const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
            if (len > 0.0) {
                for (double& d : dir) d /= len;
            } else {
                dir = {1.0, 0.0, 0.0};
            }
            GaussianParams a = params[i];
            a.log_scale -= std::log(1.6);
            GaussianParams b = a;
            for (int k = 0; k < 3; ++k) {
                a.mean[k] -= 0.5 * scale * dir[k];
                b.mean[k] += 0.5 * scale * dir[k];
            }
            params[i] = a;
            reset[i] = 1;
            params.push_back(b);
        } else {
            params.push_back(params[i]);
        }
        source.push_back(i);
        reset.push_back(1);
        ++total;
    }

    CloudLayout layout;
    GaussianCloud next;
    for (std::size_t j = 0; j < params.size(); ++j) {
        if (sigmoid(params[j].logit_opacity) < cfg.opacity_prune_threshold) continue;
        next.push_back(params[j]);
        layout.source.push_back(source[j]);
        layout.reset.push_back(reset[j]);
    }
    cloud = std::move(next);
    accum.resize(cloud.size());
    return layout;
}

}  // namespace hazesplat
