#include "hazesplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace hazesplat {

void OptimConfig::validate() const {
    for (double lr : {lr_means, lr_colors, lr_opacities, lr_scales})
        if (!(lr > 0.0) || !std::isfinite(lr)) throw InvariantError("optim: learning rates must be finite and positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw InvariantError("optim: Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw InvariantError("optim: Adam eps must be positive");
    if (total_steps < 0) throw InvariantError("optim: total steps must be non-negative");
    if (val_interval <= 0) throw InvariantError("optim: validation interval must be positive");
}

void TrainConfig::validate() const {
    optim.validate();
    densify.validate(optim.total_steps);
    weights.validate();
    dcp.validate();
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvariantError("train: gamma must be positive");
    if (init_points == 0) throw InvariantError("train: at least one initial Gaussian is required");
    if (init_points > densify.cap_max) throw InvariantError("train: cap_max is below the initial Gaussian count");
    if (!(scene_scale > 0.0)) throw InvariantError("train: scene scale must be positive");
}

namespace {

ImageBuffer load_checked(const fs::path& path, const CameraView& cam, int channels) {
    ImageBuffer img = read_image(path);
    if (img.height() != cam.height || img.width() != cam.width || img.channels() != channels)
        throw InvariantError(path.string() + ": size does not match its camera");
    return img;
}

}  // namespace

TrainingData load_training_data(const SceneManifest& manifest, const DataOverrides& overrides,
                                const DcpConfig& dcp) {
    manifest.validate();
    if (manifest.train_views.empty()) throw InvariantError("dataset has no training views");
    if (manifest.val_views.empty()) throw InvariantError("dataset has no validation views");
    TrainingData data;
    data.aabb_min = manifest.aabb_min;
    data.aabb_max = manifest.aabb_max;
    data.background = manifest.background;
    for (const CameraView& cam : manifest.train_views) {
        const fs::path name = fs::path(cam.image_path).filename();
        const fs::path image_path =
            overrides.image_dir.empty() ? manifest.root / cam.image_path : overrides.image_dir / name;
        TrainingView view{cam, load_checked(image_path, cam, 3), load_checked(manifest.root / cam.depth_path, cam, 1),
                          ImageBuffer(1, 1, 3)};
        view.structure = overrides.structure_dir.empty() ? dehaze_dcp(view.image, dcp)
                                                         : load_checked(overrides.structure_dir / name, cam, 3);
        data.train.push_back(std::move(view));
    }
    for (const CameraView& cam : manifest.val_views)
        data.val.push_back(ValidationView{cam, load_checked(manifest.root / cam.image_path, cam, 3)});
    return data;
}

ValidationScore evaluate(const GaussianCloud& cloud, const std::vector<ValidationView>& views, const Rgb& background) {
    if (views.empty()) throw InvariantError("evaluate: no validation views");
    ValidationScore s;
    for (const ValidationView& v : views) {
        const ImageBuffer img = render(cloud, v.camera, background).color;
        s.psnr += psnr(img, v.image);
        s.ssim += ssim(img, v.image);
    }
    s.psnr /= static_cast<double>(views.size());
    s.ssim /= static_cast<double>(views.size());
    return s;
}

GaussianCloud initial_cloud(const TrainConfig& cfg, const Vec3& aabb_min, const Vec3& aabb_max,
                            std::mt19937_64& rng) {
    double extent = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (!(aabb_max[k] > aabb_min[k])) throw InvariantError("initial_cloud: empty bounding box");
        extent = std::max(extent, aabb_max[k] - aabb_min[k]);
    }
    const double scale = 0.5 * extent / std::cbrt(static_cast<double>(cfg.init_points));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GaussianCloud cloud;
    for (std::size_t i = 0; i < cfg.init_points; ++i) {
        GaussianParams g;
        for (int k = 0; k < 3; ++k) g.mean[k] = aabb_min[k] + unit(rng) * (aabb_max[k] - aabb_min[k]);
        g.log_scale = std::log(scale);
        g.logit_opacity = logit(0.1);
        for (int k = 0; k < 3; ++k) g.color[k] = unit(rng);
        cloud.push_back(g);
    }
    return cloud;
}

TrainResult train(const TrainingData& data, const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (data.train.empty()) throw InvariantError("train: no training views");
    if (data.val.empty()) throw InvariantError("train: no validation views");

    std::mt19937_64 rng(seed);
    GaussianCloud cloud = initial_cloud(cfg, data.aabb_min, data.aabb_max, rng);
    CloudOptimizer optimizer(cfg.optim, cloud.size());
    GradAccumulator accum;
    accum.resize(cloud.size());

    std::vector<ImageBuffer> targets;
    for (const TrainingView& v : data.train) {
        ImageBuffer t = v.image;
        if (cfg.gamma != 1.0)
            for (float& x : t.values()) x = static_cast<float>(std::pow(static_cast<double>(x), 1.0 / cfg.gamma));
        targets.push_back(std::move(t));
    }

    TrainResult result;
    auto checkpoint = [&](int step, MetricsRow row) {
        const ValidationScore score = evaluate(cloud, data.val, data.background);
        result.checkpoints.push_back(Checkpoint{step, cloud, score.psnr, score.ssim});
        row.val_psnr = score.psnr;
        row.has_val = true;
        return row;
    };

    result.gaussian_counts.push_back(cloud.size());
    result.metrics.push_back(checkpoint(0, MetricsRow{0, {}, false, 0.0, false, cloud.size()}));

    std::vector<std::size_t> order(data.train.size());
    std::size_t cursor = order.size();
    const int total = cfg.optim.total_steps;
    for (int step = 1; step <= total; ++step) {
        if (cursor == order.size()) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const std::size_t vi = order[cursor++];
        const TrainingView& view = data.train[vi];

        const RenderOutput r = render(cloud, view.camera, data.background);
        const LossTargets lt{&targets[vi], &view.pseudo_depth, &view.structure, &targets[vi]};
        const CompositeLoss loss = composite_loss(r, lt, cfg.weights);
        const CloudGradients grads = render_backward(cloud, view.camera, data.background, loss.grad_color,
                                                     loss.grad_depth);
        optimizer.step(cloud, grads, step);

        CloudLayout layout;
        if (cfg.densify.strategy == Strategy::Mcmc) {
            layout = mcmc_step(cloud, step, cfg.densify, cfg.optim.lr_means, rng);
        } else {
            accum.add(grads);
            layout = default_densify_step(cloud, accum, step, cfg.densify, cfg.scene_scale);
        }
        optimizer.apply(layout);
        if (cloud.size() > cfg.densify.cap_max) throw InvariantError("train: Gaussian count exceeded cap_max");
        result.gaussian_counts.push_back(cloud.size());

        MetricsRow row{step, loss.report, true, 0.0, false, cloud.size()};
        if (step % cfg.optim.val_interval == 0 || step == total) row = checkpoint(step, row);
        result.metrics.push_back(row);
    }
    return result;
}

const Checkpoint& select_best_checkpoint(const std::vector<Checkpoint>& checkpoints) {
    if (checkpoints.empty()) throw InvariantError("select_best_checkpoint: no checkpoints");
    const Checkpoint* best = &checkpoints.front();
    for (const Checkpoint& c : checkpoints)
        if (c.val_psnr > best->val_psnr || (c.val_psnr == best->val_psnr && c.step < best->step)) best = &c;
    return *best;
}

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << kMetricsHeader << '\n';
    for (const MetricsRow& r : rows) {
        out << r.step << ',';
        if (r.has_loss)
            out << num(r.loss.total) << ',' << num(r.loss.l1) << ',' << num(r.loss.ssim_loss) << ','
                << num(r.loss.dcp) << ',' << num(r.loss.depth) << ',' << num(r.loss.grad) << ',';
        else
            out << ",,,,,,";
        if (r.has_val) out << num(r.val_psnr);
        out << ',' << r.n_gaussians << '\n';
    }
    return out.str();
}

}  // namespace hazesplat
