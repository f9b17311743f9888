#pragma once

#include "hazesplat/losses.hpp"
#include "hazesplat/scatter.hpp"
#include "hazesplat/scenegen.hpp"
#include "hazesplat/splat.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hazesplat {

struct OptimConfig {
    double lr_means = 1.6e-4;
    double lr_colors = 2.5e-3;
    double lr_opacities = 5e-2;
    double lr_scales = 5e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;
    int total_steps = 20000;
    int val_interval = 1000;

    void validate() const;
};

enum class Strategy { Mcmc, Default };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct DensifyConfig {
    Strategy strategy = Strategy::Mcmc;
    std::size_t cap_max = 500000;
    double noise_lr = 5e5;
    int noise_decay_step = 8000;
    int densify_start = 500;
    int densify_stop = 3000;
    int refine_interval = 100;
    double opacity_prune_threshold = 0.005;
    double default_grad_threshold = 2e-4;
    double growth_rate = 0.05;

    void validate(int total_steps) const;
};

struct TrainConfig {
    OptimConfig optim;
    DensifyConfig densify;
    LossWeights weights;
    DcpConfig dcp;
    double gamma = 1.0;
    std::size_t init_points = 2000;
    double scene_scale = 2.0;

    void validate() const;
};

/// First and second Adam moments for one parameter group.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// One bias-corrected Adam update at (1-based) step `step`.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr, int step,
               const AdamHyper& hyper);

/// How a densification step rebuilt the cloud: Gaussian i of the new cloud
/// was copied from old index source[i]; reset[i] marks entries whose
/// optimizer moments restart from zero.
struct CloudLayout {
    std::vector<std::size_t> source;
    std::vector<std::uint8_t> reset;

    static CloudLayout identity(std::size_t n);
    bool is_identity() const;
};

/// Adam moments for every parameter group of a GaussianCloud.
class CloudOptimizer {
public:
    CloudOptimizer(const OptimConfig& cfg, std::size_t n);

    void step(GaussianCloud& cloud, const CloudGradients& grads, int step);
    void apply(const CloudLayout& layout);
    std::size_t size() const { return opacity_.m.size(); }

private:
    OptimConfig cfg_;
    AdamState means_, scales_, opacity_, colors_;
};

bool should_densify(int step, const DensifyConfig& cfg);

/// noise_lr * max(0, 1 - step / noise_decay_step).
double noise_scale(int step, const DensifyConfig& cfg);

/// Gate on the positional noise: ~1 for nearly transparent Gaussians,
/// vanishing once opacity exceeds a few percent.
double noise_gate(double opacity);

/// Relocation of dead Gaussians and growth toward cap_max on refinement
/// steps, followed by positional noise injection while noise_scale > 0.
/// The noise on Gaussian i has standard deviation
/// noise_scale * lr_means * scale_i^2 * noise_gate(opacity_i), i.e. it is
/// shaped by the isotropic covariance.
CloudLayout mcmc_step(GaussianCloud& cloud, int step, const DensifyConfig& cfg, double lr_means,
                      std::mt19937_64& rng);

/// Positional-gradient statistics accumulated between refinement steps.
struct GradAccumulator {
    std::vector<double> screen_grad_sum;
    std::vector<double> mean_grad_sum;  // N x 3, direction for splitting
    std::vector<std::uint32_t> count;

    void resize(std::size_t n);
    void add(const CloudGradients& grads);
    void apply(const CloudLayout& layout);
};

/// Gradient-triggered split/clone followed by opacity pruning.
CloudLayout default_densify_step(GaussianCloud& cloud, GradAccumulator& accum, int step, const DensifyConfig& cfg,
                                 double scene_scale);

struct TrainingView {
    CameraView camera;
    ImageBuffer image;         // primary training target
    ImageBuffer pseudo_depth;  // pseudo inverse-depth
    ImageBuffer structure;     // structural edge reference
};

struct ValidationView {
    CameraView camera;
    ImageBuffer image;
};

struct TrainingData {
    std::vector<TrainingView> train;
    std::vector<ValidationView> val;
    Vec3 aabb_min{-1.0, -1.0, -1.0};
    Vec3 aabb_max{1.0, 1.0, 1.0};
    Rgb background{1.0f, 1.0f, 1.0f};
};

struct DataOverrides {
    std::filesystem::path image_dir;      // replaces the manifest's training image directory
    std::filesystem::path structure_dir;  // structural references; DCP-dehazed targets when empty
};

/// Loads the images a manifest references. Training images may be taken from
/// another directory holding files of the same names.
TrainingData load_training_data(const SceneManifest& manifest, const DataOverrides& overrides,
                                const DcpConfig& dcp);

struct MetricsRow {
    int step = 0;
    LossReport loss;
    bool has_loss = false;
    double val_psnr = 0.0;
    bool has_val = false;
    std::size_t n_gaussians = 0;
};

struct TrainResult {
    std::vector<Checkpoint> checkpoints;
    std::vector<MetricsRow> metrics;
    std::vector<std::size_t> gaussian_counts;  // after each step; index 0 is the initial cloud
};

struct ValidationScore {
    double psnr = 0.0;
    double ssim = 0.0;
};

ValidationScore evaluate(const GaussianCloud& cloud, const std::vector<ValidationView>& views, const Rgb& background);

GaussianCloud initial_cloud(const TrainConfig& cfg, const Vec3& aabb_min, const Vec3& aabb_max,
                            std::mt19937_64& rng);

/// Runs the full schedule. Checkpoints are taken at step 0, every
/// val_interval steps and at the final step.
TrainResult train(const TrainingData& data, const TrainConfig& cfg, std::uint64_t seed);

/// Highest validation PSNR; the earliest step wins ties.
const Checkpoint& select_best_checkpoint(const std::vector<Checkpoint>& checkpoints);

inline constexpr const char* kMetricsHeader = "step,total,l1,ssim,dcp,depth,grad,psnr_val,n_gaussians";
std::string metrics_csv(const std::vector<MetricsRow>& rows);

}  // namespace hazesplat
