#pragma once

#include "hazesplat/image.hpp"
#include "hazesplat/splat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace test_support {

using namespace hazesplat;

inline ImageBuffer random_image(int h, int w, int c, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    ImageBuffer img(h, w, c);
    for (float& v : img.values()) v = u(rng);
    return img;
}

// Camera at the origin looking down +z.
inline CameraView front_camera(int w, int h, double focal) {
    CameraView cam;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * w;
    cam.cy = 0.5 * h;
    return cam;
}

// Gaussians scattered in front of front_camera(w, h, focal) so that they
// overlap and cover most of an image of the given size.
inline GaussianCloud random_cloud(std::size_t n, std::mt19937_64& rng, double spread = 0.35) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GaussianCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        GaussianParams g;
        g.mean = {spread * u(rng), spread * u(rng), 2.0 + 0.5 * u(rng)};
        g.log_scale = std::log(0.12 + 0.08 * unit(rng));
        g.logit_opacity = logit(0.3 + 0.5 * unit(rng));
        g.color = {unit(rng), unit(rng), unit(rng)};
        cloud.push_back(g);
    }
    return cloud;
}

struct ParamRef {
    std::string name;
    double* value;
    double grad;
};

inline std::vector<ParamRef> parameters(GaussianCloud& cloud, const CloudGradients& g) {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < cloud.means.size(); ++i) out.push_back({"mean", &cloud.means[i], g.means[i]});
    for (std::size_t i = 0; i < cloud.log_scales.size(); ++i)
        out.push_back({"log_scale", &cloud.log_scales[i], g.log_scales[i]});
    for (std::size_t i = 0; i < cloud.logit_opacities.size(); ++i)
        out.push_back({"opacity", &cloud.logit_opacities[i], g.logit_opacities[i]});
    for (std::size_t i = 0; i < cloud.colors.size(); ++i) out.push_back({"color", &cloud.colors[i], g.colors[i]});
    return out;
}

/// |a - f| / max(|a|, |f|, floor).
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct FdTally {
    std::size_t tested = 0;
    std::size_t passed = 0;
    double worst = 0.0;

    void add(double err, double tol) {
        ++tested;
        if (err < tol) ++passed;
        worst = std::max(worst, err);
    }
    double fraction() const { return tested == 0 ? 1.0 : static_cast<double>(passed) / tested; }
};

inline double central_difference(double& x, double h, const std::function<double()>& f) {
    const double x0 = x;
    x = x0 + h;
    const double fp = f();
    x = x0 - h;
    const double fm = f();
    x = x0;
    return (fp - fm) / (2.0 * h);
}

/// Central difference with respect to one float pixel; uses the step that
/// was actually stored after rounding.
inline double central_difference(float& x, float h, const std::function<double()>& f) {
    const float x0 = x;
    const float xp = x0 + h;
    const float xm = x0 - h;
    x = xp;
    const double fp = f();
    x = xm;
    const double fm = f();
    x = x0;
    return (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
}

/// Which (pixel, Gaussian) pairs fall inside the footprint cutoff and which
/// of them hit the alpha clamp, plus the depth order. Finite differences
/// across a change of this key straddle a discontinuity of the renderer.
inline std::vector<std::uint8_t> render_structure(const GaussianCloud& cloud, const CameraView& cam) {
    std::vector<std::uint8_t> key;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto p = project(cloud.mean(i), cloud.scale(i), cam);
        key.push_back(p.has_value());
        if (!p) continue;
        order.emplace_back(p->depth, i);
        const double reach = kFootprintSigmas * p->radius;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const double dx = x + 0.5 - p->u;
                const double dy = y + 0.5 - p->v;
                const double r2 = dx * dx + dy * dy;
                const bool inside = r2 <= reach * reach;
                const bool clamped =
                    inside && cloud.opacity(i) * std::exp(-r2 / (2.0 * p->radius * p->radius)) > kAlphaMax;
                key.push_back(static_cast<std::uint8_t>(inside + 2 * clamped));
            }
    }
    std::sort(order.begin(), order.end());
    for (const auto& [z, i] : order) key.push_back(static_cast<std::uint8_t>(i));
    return key;
}

/// True when moving x by +-h changes render_structure.
inline bool crosses_discontinuity(double& x, double h, const GaussianCloud& cloud, const CameraView& cam) {
    const double x0 = x;
    x = x0 + h;
    const auto kp = render_structure(cloud, cam);
    x = x0 - h;
    const auto km = render_structure(cloud, cam);
    x = x0;
    return kp != km;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const char* base = std::getenv("HAZESPLAT_TEST_TMP");
    const std::filesystem::path root =
        base != nullptr ? std::filesystem::path(base) : std::filesystem::temp_directory_path() / "hazesplat_tests";
    const auto dir = root / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace test_support
