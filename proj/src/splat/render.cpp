#include "hazesplat/splat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hazesplat {

std::optional<Projection> project(const Vec3& mean, double scale, const CameraView& cam) {
    const Vec3 p = cam.world_to_camera(mean);
    if (p[2] <= kNearPlane) return std::nullopt;
    Projection out;
    out.u = cam.fx * p[0] / p[2] + cam.cx;
    out.v = cam.fy * p[1] / p[2] + cam.cy;
    out.depth = p[2];
    out.radius = scale * cam.fx / p[2];
    return out;
}

namespace {

struct Splat {
    std::uint32_t index;  // position in the cloud
    Vec3 cam;             // camera-space mean
    double u, v, radius;
    double opacity;
    double scale;
};

// Visible splats in front-to-back order plus per-tile lists of indices into
// that order. Lists inherit the global order, so each is already sorted.
struct Binning {
    std::vector<Splat> splats;
    std::vector<std::vector<std::uint32_t>> tiles;
    int tiles_x = 0;
    int tiles_y = 0;
};

Binning bin_splats(const GaussianCloud& cloud, const CameraView& cam) {
    Binning b;
    b.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
    b.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
    b.tiles.resize(static_cast<std::size_t>(b.tiles_x) * b.tiles_y);

    struct Box {
        int x0, x1, y0, y1;
    };
    std::vector<Box> boxes;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double scale = cloud.scale(i);
        const auto proj = project(cloud.mean(i), scale, cam);
        if (!proj) continue;
        const double reach = kFootprintSigmas * proj->radius;
        // Pixels whose centre (x + 0.5) lies inside [u - reach, u + reach].
        const double fx0 = std::ceil(proj->u - reach - 0.5);
        const double fx1 = std::floor(proj->u + reach - 0.5);
        const double fy0 = std::ceil(proj->v - reach - 0.5);
        const double fy1 = std::floor(proj->v + reach - 0.5);
        if (fx1 < 0.0 || fy1 < 0.0 || fx0 > cam.width - 1 || fy0 > cam.height - 1 || fx0 > fx1 || fy0 > fy1)
            continue;
        Box box{static_cast<int>(std::max(fx0, 0.0)), static_cast<int>(std::min(fx1, cam.width - 1.0)),
                static_cast<int>(std::max(fy0, 0.0)), static_cast<int>(std::min(fy1, cam.height - 1.0))};
        b.splats.push_back(Splat{static_cast<std::uint32_t>(i), cam.world_to_camera(cloud.mean(i)), proj->u,
                                 proj->v, proj->radius, cloud.opacity(i), scale});
        boxes.push_back(box);
    }

    std::vector<std::uint32_t> order(b.splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t c) {
        const Splat& sa = b.splats[a];
        const Splat& sc = b.splats[c];
        return sa.cam[2] != sc.cam[2] ? sa.cam[2] < sc.cam[2] : sa.index < sc.index;
    });
    std::vector<Splat> sorted;
    std::vector<Box> sorted_boxes;
    sorted.reserve(order.size());
    for (std::uint32_t o : order) {
        sorted.push_back(b.splats[o]);
        sorted_boxes.push_back(boxes[o]);
    }
    b.splats = std::move(sorted);

    for (std::uint32_t s = 0; s < b.splats.size(); ++s) {
        const Box& box = sorted_boxes[s];
        for (int ty = box.y0 / kTileSize; ty <= box.y1 / kTileSize; ++ty)
            for (int tx = box.x0 / kTileSize; tx <= box.x1 / kTileSize; ++tx)
                b.tiles[static_cast<std::size_t>(ty) * b.tiles_x + tx].push_back(s);
    }
    return b;
}

struct Contribution {
    std::uint32_t splat;
    double alpha;
    double gauss;
    double transmittance;  // before this splat
    bool clamped;
};

// Walks the depth-ordered list for one pixel. Returns the final
// transmittance; `visit` sees every contributing splat in order.
template <typename Visit>
double composite_pixel(const Binning& b, const std::vector<std::uint32_t>& list, double px, double py,
                       Visit&& visit) {
    double t = 1.0;
    for (std::uint32_t s : list) {
        const Splat& sp = b.splats[s];
        const double dx = px - sp.u;
        const double dy = py - sp.v;
        const double r2 = dx * dx + dy * dy;
        const double reach = kFootprintSigmas * sp.radius;
        if (r2 > reach * reach) continue;
        const double g = std::exp(-r2 / (2.0 * sp.radius * sp.radius));
        double alpha = sp.opacity * g;
        const bool clamped = alpha > kAlphaMax;
        if (clamped) alpha = kAlphaMax;
        visit(Contribution{s, alpha, g, t, clamped});
        t *= 1.0 - alpha;
        if (t < kTransmittanceMin) break;
    }
    return t;
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const CameraView& cam, const Rgb& background) {
    cloud.validate();
    cam.validate();
    const int h = cam.height;
    const int w = cam.width;
    RenderOutput out{ImageBuffer(h, w, 3), ImageBuffer(h, w, 1), ImageBuffer(h, w, 1)};
    const Binning b = bin_splats(cloud, cam);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto& list = b.tiles[static_cast<std::size_t>(y / kTileSize) * b.tiles_x + x / kTileSize];
            double c[3] = {0.0, 0.0, 0.0};
            double d = 0.0;
            const double t = composite_pixel(b, list, x + 0.5, y + 0.5, [&](const Contribution& k) {
                const Splat& sp = b.splats[k.splat];
                const double weight = k.alpha * k.transmittance;
                for (int ch = 0; ch < 3; ++ch) c[ch] += weight * cloud.colors[3 * sp.index + ch];
                d += weight * sp.cam[2];
            });
            for (int ch = 0; ch < 3; ++ch) out.color.at(y, x, ch) = static_cast<float>(c[ch] + t * background[ch]);
            out.depth.at(y, x) = static_cast<float>(d);
            out.alpha.at(y, x) = static_cast<float>(1.0 - t);
        }
    }
    return out;
}

CloudGradients render_backward(const GaussianCloud& cloud, const CameraView& cam, const Rgb& background,
                               const ImageBuffer& grad_color, const ImageBuffer& grad_depth) {
    cloud.validate();
    cam.validate();
    const int h = cam.height;
    const int w = cam.width;
    if (grad_color.height() != h || grad_color.width() != w || grad_color.channels() != 3 ||
        grad_depth.height() != h || grad_depth.width() != w || grad_depth.channels() != 1)
        throw InvariantError("render_backward: gradient images do not match the camera");

    const Binning b = bin_splats(cloud, cam);
    const std::size_t ns = b.splats.size();
    // Screen-space partials per splat: u, v, radius, opacity, rgb, depth.
    std::vector<double> d_u(ns, 0.0), d_v(ns, 0.0), d_r(ns, 0.0), d_o(ns, 0.0), d_c(3 * ns, 0.0), d_z(ns, 0.0);
    std::vector<std::uint8_t> touched(ns, 0);
    std::vector<Contribution> chain;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto& list = b.tiles[static_cast<std::size_t>(y / kTileSize) * b.tiles_x + x / kTileSize];
            const double px = x + 0.5;
            const double py = y + 0.5;
            chain.clear();
            const double t_final =
                composite_pixel(b, list, px, py, [&](const Contribution& k) { chain.push_back(k); });
            const double gc[3] = {grad_color.at(y, x, 0), grad_color.at(y, x, 1), grad_color.at(y, x, 2)};
            const double gd = grad_depth.at(y, x);
            if (gc[0] == 0.0 && gc[1] == 0.0 && gc[2] == 0.0 && gd == 0.0) {
                for (const auto& k : chain) touched[k.splat] = 1;
                continue;
            }
            // Colour and depth accumulated behind the current splat.
            double behind_c[3] = {t_final * background[0], t_final * background[1], t_final * background[2]};
            double behind_d = 0.0;
            for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
                const Contribution& k = *it;
                const Splat& sp = b.splats[k.splat];
                touched[k.splat] = 1;
                const double weight = k.alpha * k.transmittance;
                const double one_minus = 1.0 - k.alpha;
                double d_alpha = 0.0;
                for (int ch = 0; ch < 3; ++ch) {
                    const double col = cloud.colors[3 * sp.index + ch];
                    d_c[3 * k.splat + ch] += gc[ch] * weight;
                    d_alpha += gc[ch] * (col * k.transmittance - behind_c[ch] / one_minus);
                    behind_c[ch] += weight * col;
                }
                d_z[k.splat] += gd * weight;
                d_alpha += gd * (sp.cam[2] * k.transmittance - behind_d / one_minus);
                behind_d += weight * sp.cam[2];

                if (k.clamped) continue;
                d_o[k.splat] += d_alpha * k.gauss;
                const double d_g = d_alpha * sp.opacity;
                const double inv_r2 = 1.0 / (sp.radius * sp.radius);
                const double dx = px - sp.u;
                const double dy = py - sp.v;
                d_u[k.splat] += d_g * k.gauss * dx * inv_r2;
                d_v[k.splat] += d_g * k.gauss * dy * inv_r2;
                d_r[k.splat] += d_g * k.gauss * (dx * dx + dy * dy) * inv_r2 / sp.radius;
            }
        }
    }

    CloudGradients grads;
    grads.resize(cloud.size());
    for (std::size_t s = 0; s < ns; ++s) {
        const Splat& sp = b.splats[s];
        const std::size_t i = sp.index;
        const double z = sp.cam[2];
        const double inv_z = 1.0 / z;
        const double fx = cam.fx;
        const double fy = cam.fy;
        // u = fx x / z + cx, v = fy y / z + cy, radius = scale fx / z.
        const Vec3 d_cam{d_u[s] * fx * inv_z, d_v[s] * fy * inv_z,
                         -d_u[s] * fx * sp.cam[0] * inv_z * inv_z - d_v[s] * fy * sp.cam[1] * inv_z * inv_z -
                             d_r[s] * sp.scale * fx * inv_z * inv_z + d_z[s]};
        const Vec3 d_mean = cam.rotate_to_world(d_cam);
        for (int k = 0; k < 3; ++k) {
            grads.means[3 * i + k] += d_mean[k];
            grads.colors[3 * i + k] += d_c[3 * s + k];
        }
        grads.log_scales[i] += d_r[s] * fx * inv_z * sp.scale;
        grads.logit_opacities[i] += d_o[s] * sp.opacity * (1.0 - sp.opacity);
        const double gu = d_u[s] * 0.5 * cam.width;
        const double gv = d_v[s] * 0.5 * cam.height;
        grads.screen_grad_norm[i] = std::sqrt(gu * gu + gv * gv);
        grads.visible[i] = touched[s];
    }
    return grads;
}

}  // namespace hazesplat
