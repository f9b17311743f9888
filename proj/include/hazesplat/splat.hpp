#pragma once

#include "hazesplat/image.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hazesplat {

using Vec3 = std::array<double, 3>;

/// One isotropic Gaussian in the unconstrained parameterisation the
/// optimizer works on.
struct GaussianParams {
    Vec3 mean{};
    double log_scale = 0.0;
    double logit_opacity = 0.0;
    Vec3 color{};
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Structure-of-arrays Gaussian scene. `means` and `colors` are N x 3
/// row-major; the flat layout lets the optimizer treat each group as one
/// contiguous parameter vector.
struct GaussianCloud {
    std::vector<double> means;
    std::vector<double> log_scales;
    std::vector<double> logit_opacities;
    std::vector<double> colors;

    std::size_t size() const { return log_scales.size(); }
    bool empty() const { return log_scales.empty(); }

    void push_back(const GaussianParams& g);
    GaussianParams get(std::size_t i) const;
    void set(std::size_t i, const GaussianParams& g);

    Vec3 mean(std::size_t i) const { return {means[3 * i], means[3 * i + 1], means[3 * i + 2]}; }
    double scale(std::size_t i) const { return std::exp(log_scales[i]); }
    double opacity(std::size_t i) const { return sigmoid(logit_opacities[i]); }

    /// Keeps the Gaussians listed in `sources`, in that order (duplicates allowed).
    GaussianCloud gather(const std::vector<std::size_t>& sources) const;

    void validate() const;
    bool operator==(const GaussianCloud&) const = default;
};

/// Pinhole camera, OpenCV convention (x right, y down, z forward).
/// `cam_to_world` is a row-major 4x4 rigid transform.
struct CameraView {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    std::array<double, 16> cam_to_world{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    std::string image_path;
    std::string depth_path;

    Vec3 world_to_camera(const Vec3& p) const;
    /// Rotates a camera-space vector into world space.
    Vec3 rotate_to_world(const Vec3& v) const;
    Vec3 position() const { return {cam_to_world[3], cam_to_world[7], cam_to_world[11]}; }
    void validate() const;
};

struct RenderOutput {
    ImageBuffer color;  // H x W x 3
    ImageBuffer depth;  // H x W x 1, expected camera-space depth
    ImageBuffer alpha;  // H x W x 1, accumulated opacity
};

inline constexpr double kNearPlane = 0.01;
inline constexpr double kAlphaMax = 0.999;
inline constexpr double kTransmittanceMin = 1e-4;
inline constexpr double kFootprintSigmas = 3.0;
inline constexpr int kTileSize = 16;

struct Projection {
    double u = 0.0, v = 0.0;  // pixel coordinates; pixel (x, y) has centre (x + 0.5, y + 0.5)
    double depth = 0.0;       // camera z
    double radius = 0.0;      // isotropic screen-space sigma in pixels
};

/// Pinhole projection of an isotropic Gaussian; nullopt when z <= near plane.
std::optional<Projection> project(const Vec3& mean, double scale, const CameraView& cam);

/// Front-to-back alpha compositing of depth-sorted Gaussians (ties broken
/// by index). The footprint is truncated at 3 sigma, alpha is clamped to
/// 0.999 and a pixel stops once transmittance drops below 1e-4.
RenderOutput render(const GaussianCloud& cloud, const CameraView& cam, const Rgb& background);

/// Gradients with respect to the optimizer parameters, plus the screen-space
/// positional gradient norm used by gradient-triggered densification.
struct CloudGradients {
    std::vector<double> means;
    std::vector<double> log_scales;
    std::vector<double> logit_opacities;
    std::vector<double> colors;
    std::vector<double> screen_grad_norm;  // |dL/d(u, v)| in NDC units
    std::vector<std::uint8_t> visible;     // touched at least one pixel

    void resize(std::size_t n);
};

/// Reverse pass of render(). The alpha output is treated as detached and
/// receives no gradient.
CloudGradients render_backward(const GaussianCloud& cloud, const CameraView& cam, const Rgb& background,
                               const ImageBuffer& grad_color, const ImageBuffer& grad_depth);

/// Cloud snapshot as written to ckpt_<step>.bin / best.bin.
struct Checkpoint {
    std::int64_t step = 0;
    GaussianCloud cloud;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
};

// Binary layout, little-endian: "HZSPLAT\0" magic, u32 version (1),
// i64 step, f64 val_psnr, f64 val_ssim, u64 N, then N records of 8 f64
// (mean xyz, log_scale, logit_opacity, rgb).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hazesplat
