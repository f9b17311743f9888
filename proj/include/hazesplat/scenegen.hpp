#pragma once

#include "hazesplat/scatter.hpp"
#include "hazesplat/splat.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hazesplat {

/// transforms.json-style description of a generated (or adapted) dataset.
/// Image and depth paths inside the views are relative to `root`.
struct SceneManifest {
    std::filesystem::path root;
    std::vector<CameraView> train_views;
    std::vector<CameraView> val_views;
    std::string image_dir = "images";
    std::string depth_dir = "depth";
    std::string gt_dir = "gt";        // unjittered clean training images
    std::string hazy_dir;             // empty when no haze was synthesised
    double scene_scale = 2.0;
    Vec3 aabb_min{-1.0, -1.0, -1.0};
    Vec3 aabb_max{1.0, 1.0, 1.0};
    Rgb background{1.0f, 1.0f, 1.0f};

    void validate() const;
};

inline constexpr const char* kManifestName = "transforms.json";

void write_manifest(const SceneManifest& manifest, const std::filesystem::path& path);
SceneManifest read_manifest(const std::filesystem::path& path);

/// Presets: "checker-wall", "cluster", "random-<k>". Deterministic in seed,
/// all means inside [-1, 1]^3.
GaussianCloud make_scene(const std::string& preset, std::uint64_t seed);

struct Orbit {
    std::vector<CameraView> train;
    std::vector<CameraView> val;
};

/// Cameras evenly spaced on a horizontal circle around the origin, looking
/// at it. Train azimuths are 360 i / n_train; validation azimuths sit
/// halfway between neighbouring train azimuths.
Orbit make_orbit(int n_train, int n_val, double radius, int image_size, double focal);

struct DatasetOptions {
    std::optional<HazeModel> haze;
    std::optional<double> jitter;
    Rgb background{1.0f, 1.0f, 1.0f};
    double scene_scale = 2.0;
    std::uint64_t seed = 0;
};

/// Pseudo inverse-depth: 1 / (depth + 1e-3) divided by its maximum over
/// pixels with alpha > 0.5, and 0 elsewhere.
ImageBuffer pseudo_inverse_depth(const ImageBuffer& depth, const ImageBuffer& alpha);

/// Renders every view, writes images, true and pseudo depth, optional hazy
/// and jittered copies, and the manifest into out_dir.
SceneManifest generate_dataset(const GaussianCloud& scene, const Orbit& cameras, const DatasetOptions& options,
                               const std::filesystem::path& out_dir);

}  // namespace hazesplat
