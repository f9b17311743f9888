#include "hazesplat/scenegen.hpp"

#include "hazesplat/normalize.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace hazesplat {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void SceneManifest::validate() const {
    if (train_views.empty()) throw InvariantError("manifest: no training views");
    if (val_views.empty()) throw InvariantError("manifest: no validation views");
    for (const auto* list : {&train_views, &val_views})
        for (const auto& v : *list) v.validate();
}

namespace {

ordered_json view_to_json(const CameraView& v) {
    ordered_json j;
    j["file_path"] = v.image_path;
    j["depth_path"] = v.depth_path;
    j["fl_x"] = v.fx;
    j["fl_y"] = v.fy;
    j["cx"] = v.cx;
    j["cy"] = v.cy;
    j["w"] = v.width;
    j["h"] = v.height;
    ordered_json m = ordered_json::array();
    for (int r = 0; r < 4; ++r)
        m.push_back({v.cam_to_world[4 * r], v.cam_to_world[4 * r + 1], v.cam_to_world[4 * r + 2],
                     v.cam_to_world[4 * r + 3]});
    j["camera_to_world"] = m;
    return j;
}

CameraView view_from_json(const ordered_json& j) {
    CameraView v;
    v.image_path = j.at("file_path").get<std::string>();
    v.depth_path = j.value("depth_path", std::string{});
    v.fx = j.at("fl_x").get<double>();
    v.fy = j.at("fl_y").get<double>();
    v.cx = j.at("cx").get<double>();
    v.cy = j.at("cy").get<double>();
    v.width = j.at("w").get<int>();
    v.height = j.at("h").get<int>();
    const auto& m = j.at("camera_to_world");
    if (m.size() != 4) throw IoError("manifest: camera_to_world must be 4x4");
    for (int r = 0; r < 4; ++r) {
        if (m[r].size() != 4) throw IoError("manifest: camera_to_world must be 4x4");
        for (int c = 0; c < 4; ++c) v.cam_to_world[4 * r + c] = m[r][c].get<double>();
    }
    return v;
}

}  // namespace

void write_manifest(const SceneManifest& manifest, const fs::path& path) {
    ordered_json j;
    j["scene_scale"] = manifest.scene_scale;
    j["aabb"] = {{manifest.aabb_min[0], manifest.aabb_min[1], manifest.aabb_min[2]},
                 {manifest.aabb_max[0], manifest.aabb_max[1], manifest.aabb_max[2]}};
    j["background"] = {manifest.background[0], manifest.background[1], manifest.background[2]};
    j["image_dir"] = manifest.image_dir;
    j["depth_dir"] = manifest.depth_dir;
    j["gt_dir"] = manifest.gt_dir;
    j["hazy_dir"] = manifest.hazy_dir;
    j["train"] = ordered_json::array();
    for (const auto& v : manifest.train_views) j["train"].push_back(view_to_json(v));
    j["val"] = ordered_json::array();
    for (const auto& v : manifest.val_views) j["val"].push_back(view_to_json(v));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

SceneManifest read_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    SceneManifest m;
    try {
        const ordered_json j = ordered_json::parse(in);
        m.root = path.parent_path();
        m.scene_scale = j.value("scene_scale", 2.0);
        if (j.contains("aabb")) {
            for (int k = 0; k < 3; ++k) {
                m.aabb_min[k] = j["aabb"][0][k].get<double>();
                m.aabb_max[k] = j["aabb"][1][k].get<double>();
            }
        }
        if (j.contains("background"))
            for (int k = 0; k < 3; ++k) m.background[k] = j["background"][k].get<float>();
        m.image_dir = j.value("image_dir", std::string("images"));
        m.depth_dir = j.value("depth_dir", std::string("depth"));
        m.gt_dir = j.value("gt_dir", std::string("gt"));
        m.hazy_dir = j.value("hazy_dir", std::string{});
        for (const auto& v : j.at("train")) m.train_views.push_back(view_from_json(v));
        for (const auto& v : j.at("val")) m.val_views.push_back(view_from_json(v));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

GaussianCloud make_scene(const std::string& preset, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GaussianCloud cloud;

    if (preset == "checker-wall") {
        // Two walls facing the z axis, each an 8 x 8 checkerboard of 2 x 2
        // Gaussian cells; the back wall is larger so it shows around the front.
        const double planes[2] = {-0.35, 0.45};
        const double extents[2] = {0.55, 0.9};
        const std::array<Vec3, 4> palette{{{0.85, 0.15, 0.1}, {0.95, 0.9, 0.2}, {0.1, 0.3, 0.8}, {0.15, 0.6, 0.25}}};
        for (int p = 0; p < 2; ++p) {
            const int n = 16;
            const double step = 2.0 * extents[p] / n;
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix) {
                    GaussianParams g;
                    g.mean = {-extents[p] + (ix + 0.5) * step, -extents[p] + (iy + 0.5) * step, planes[p]};
                    g.log_scale = std::log(0.6 * step);
                    g.logit_opacity = logit(0.95);
                    const bool odd = ((ix / 2) + (iy / 2)) % 2 == 1;
                    g.color = palette[2 * p + (odd ? 1 : 0)];
                    cloud.push_back(g);
                }
        }
        return cloud;
    }

    if (preset == "cluster") {
        const std::array<Vec3, 3> centers{{{-0.5, -0.2, 0.1}, {0.45, 0.3, -0.2}, {0.0, 0.4, 0.5}}};
        const std::array<Vec3, 3> tints{{{0.9, 0.2, 0.2}, {0.2, 0.8, 0.3}, {0.2, 0.3, 0.9}}};
        std::normal_distribution<double> spread(0.0, 0.18);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 80; ++i) {
                GaussianParams g;
                for (int k = 0; k < 3; ++k) g.mean[k] = std::clamp(centers[c][k] + spread(rng), -1.0, 1.0);
                g.log_scale = std::log(0.05 + 0.05 * unit(rng));
                g.logit_opacity = logit(0.6 + 0.35 * unit(rng));
                for (int k = 0; k < 3; ++k) g.color[k] = std::clamp(tints[c][k] + 0.1 * (unit(rng) - 0.5), 0.0, 1.0);
                cloud.push_back(g);
            }
        return cloud;
    }

    const std::string prefix = "random-";
    if (preset.rfind(prefix, 0) == 0) {
        int k = 0;
        try {
            std::size_t used = 0;
            k = std::stoi(preset.substr(prefix.size()), &used);
            if (used != preset.size() - prefix.size()) throw std::invalid_argument(preset);
        } catch (const std::exception&) {
            throw InvariantError("make_scene: bad preset '" + preset + "'");
        }
        if (k <= 0) throw InvariantError("make_scene: random-k needs k > 0");
        for (int i = 0; i < k; ++i) {
            GaussianParams g;
            for (double& m : g.mean) m = -0.9 + 1.8 * unit(rng);
            g.log_scale = std::log(0.05 + 0.1 * unit(rng));
            g.logit_opacity = logit(0.5 + 0.45 * unit(rng));
            for (double& c : g.color) c = unit(rng);
            cloud.push_back(g);
        }
        return cloud;
    }
    throw InvariantError("make_scene: unknown preset '" + preset + "'");
}

namespace {

CameraView look_at_origin(double azimuth_deg, double radius, int image_size, double focal) {
    const double a = azimuth_deg * std::numbers::pi / 180.0;
    const Vec3 pos{radius * std::sin(a), 0.0, -radius * std::cos(a)};
    const Vec3 fwd{-pos[0] / radius, -pos[1] / radius, -pos[2] / radius};
    const Vec3 down{0.0, 1.0, 0.0};
    // right = down x forward, y = forward x right (x right, y down, z forward)
    Vec3 right{down[1] * fwd[2] - down[2] * fwd[1], down[2] * fwd[0] - down[0] * fwd[2],
               down[0] * fwd[1] - down[1] * fwd[0]};
    const double rn = std::sqrt(right[0] * right[0] + right[1] * right[1] + right[2] * right[2]);
    for (double& v : right) v /= rn;
    const Vec3 up{fwd[1] * right[2] - fwd[2] * right[1], fwd[2] * right[0] - fwd[0] * right[2],
                  fwd[0] * right[1] - fwd[1] * right[0]};
    CameraView cam;
    cam.fx = cam.fy = focal;
    cam.cx = cam.cy = image_size / 2.0;
    cam.width = cam.height = image_size;
    cam.cam_to_world = {right[0], up[0], fwd[0], pos[0],
                        right[1], up[1], fwd[1], pos[1],
                        right[2], up[2], fwd[2], pos[2],
                        0.0,      0.0,   0.0,    1.0};
    return cam;
}

std::string frame_name(const char* kind, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d", kind, i);
    return buf;
}

}  // namespace

Orbit make_orbit(int n_train, int n_val, double radius, int image_size, double focal) {
    if (n_train < 1 || n_val < 0 || !(radius > 0.0) || image_size <= 0 || !(focal > 0.0))
        throw InvariantError("make_orbit: invalid arguments");
    Orbit orbit;
    const double step = 360.0 / n_train;
    for (int i = 0; i < n_train; ++i) {
        orbit.train.push_back(look_at_origin(step * i, radius, image_size, focal));
        orbit.train.back().image_path = "images/" + frame_name("train", i) + ".ppm";
        orbit.train.back().depth_path = "depth/" + frame_name("train", i) + ".pfm";
    }
    for (int j = 0; j < n_val; ++j) {
        const int slot = (j * n_train) / n_val;
        orbit.val.push_back(look_at_origin(step * (slot + 0.5), radius, image_size, focal));
        orbit.val.back().image_path = "images/" + frame_name("val", j) + ".ppm";
        orbit.val.back().depth_path = "depth/" + frame_name("val", j) + ".pfm";
    }
    return orbit;
}

ImageBuffer pseudo_inverse_depth(const ImageBuffer& depth, const ImageBuffer& alpha) {
    if (!depth.same_shape(alpha) || depth.channels() != 1)
        throw InvariantError("pseudo_inverse_depth: expected matching single-channel depth and alpha");
    ImageBuffer out(depth.height(), depth.width(), 1);
    double max_inv = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i)
        if (alpha.data()[i] > 0.5f) max_inv = std::max(max_inv, 1.0 / (depth.data()[i] + 1e-3));
    if (max_inv == 0.0) return out;
    for (std::size_t i = 0; i < depth.size(); ++i)
        if (alpha.data()[i] > 0.5f) out.data()[i] = static_cast<float>((1.0 / (depth.data()[i] + 1e-3)) / max_inv);
    return out;
}

SceneManifest generate_dataset(const GaussianCloud& scene, const Orbit& cameras, const DatasetOptions& options,
                               const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    SceneManifest m;
    m.root = out_dir;
    m.train_views = cameras.train;
    m.val_views = cameras.val;
    m.scene_scale = options.scene_scale;
    m.background = options.background;
    if (options.haze) m.hazy_dir = "hazy";
    for (const char* d : {"images", "depth", "true_depth", "gt"}) fs::create_directories(out_dir / d, ec);
    if (options.haze) fs::create_directories(out_dir / m.hazy_dir, ec);
    if (ec) throw IoError("cannot create dataset directories under " + out_dir.string());

    FrameSet train_clean;
    auto render_view = [&](const CameraView& cam, const std::string& name, bool is_train) {
        const RenderOutput r = render(scene, cam, options.background);
        write_image(pseudo_inverse_depth(r.depth, r.alpha), out_dir / cam.depth_path);
        write_image(r.depth, out_dir / "true_depth" / (name + ".pfm"));
        if (!is_train) {
            write_image(r.color, out_dir / cam.image_path);
            return;
        }
        write_image(r.color, out_dir / m.gt_dir / (name + ".ppm"));
        if (options.haze) {
            const ImageBuffer t = transmission_from_depth(r.depth, options.haze->beta);
            write_image(apply_haze(r.color, t, *options.haze), out_dir / m.hazy_dir / (name + ".ppm"));
        }
        train_clean.frames.push_back(r.color);
        train_clean.ids.push_back(name);
    };
    for (std::size_t i = 0; i < cameras.train.size(); ++i)
        render_view(cameras.train[i], frame_name("train", static_cast<int>(i)), true);
    for (std::size_t i = 0; i < cameras.val.size(); ++i)
        render_view(cameras.val[i], frame_name("val", static_cast<int>(i)), false);

    const FrameSet train_images =
        options.jitter ? inject_jitter(train_clean, *options.jitter, options.seed) : train_clean;
    for (std::size_t i = 0; i < cameras.train.size(); ++i)
        write_image(train_images.frames[i], out_dir / cameras.train[i].image_path);

    write_manifest(m, out_dir / kManifestName);
    return m;
}

}  // namespace hazesplat
