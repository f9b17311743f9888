#include "hazesplat/splat.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hazesplat {

void GaussianCloud::push_back(const GaussianParams& g) {
    means.insert(means.end(), g.mean.begin(), g.mean.end());
    log_scales.push_back(g.log_scale);
    logit_opacities.push_back(g.logit_opacity);
    colors.insert(colors.end(), g.color.begin(), g.color.end());
}

GaussianParams GaussianCloud::get(std::size_t i) const {
    GaussianParams g;
    g.mean = mean(i);
    g.log_scale = log_scales[i];
    g.logit_opacity = logit_opacities[i];
    g.color = {colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]};
    return g;
}

void GaussianCloud::set(std::size_t i, const GaussianParams& g) {
    for (int k = 0; k < 3; ++k) {
        means[3 * i + k] = g.mean[k];
        colors[3 * i + k] = g.color[k];
    }
    log_scales[i] = g.log_scale;
    logit_opacities[i] = g.logit_opacity;
}

GaussianCloud GaussianCloud::gather(const std::vector<std::size_t>& sources) const {
    GaussianCloud out;
    out.means.reserve(sources.size() * 3);
    out.colors.reserve(sources.size() * 3);
    out.log_scales.reserve(sources.size());
    out.logit_opacities.reserve(sources.size());
    for (std::size_t s : sources) out.push_back(get(s));
    return out;
}

void GaussianCloud::validate() const {
    const std::size_t n = size();
    if (means.size() != 3 * n || colors.size() != 3 * n || logit_opacities.size() != n)
        throw InvariantError("cloud: parameter arrays disagree on Gaussian count");
    auto finite = [](const std::vector<double>& v) {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    };
    if (!finite(means) || !finite(log_scales) || !finite(logit_opacities) || !finite(colors))
        throw InvariantError("cloud: non-finite parameter");
}

Vec3 CameraView::world_to_camera(const Vec3& p) const {
    const auto& m = cam_to_world;
    const Vec3 d{p[0] - m[3], p[1] - m[7], p[2] - m[11]};
    // R^T * d
    return {m[0] * d[0] + m[4] * d[1] + m[8] * d[2],
            m[1] * d[0] + m[5] * d[1] + m[9] * d[2],
            m[2] * d[0] + m[6] * d[1] + m[10] * d[2]};
}

Vec3 CameraView::rotate_to_world(const Vec3& v) const {
    const auto& m = cam_to_world;
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[4] * v[0] + m[5] * v[1] + m[6] * v[2],
            m[8] * v[0] + m[9] * v[1] + m[10] * v[2]};
}

void CameraView::validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw InvariantError("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvariantError("camera: image size must be positive");
    const auto& m = cam_to_world;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += m[4 * k + a] * m[4 * k + b];
            if (std::fabs(dot - (a == b ? 1.0 : 0.0)) > 1e-5)
                throw InvariantError("camera: rotation block is not orthonormal");
        }
}

void CloudGradients::resize(std::size_t n) {
    means.assign(3 * n, 0.0);
    log_scales.assign(n, 0.0);
    logit_opacities.assign(n, 0.0);
    colors.assign(3 * n, 0.0);
    screen_grad_norm.assign(n, 0.0);
    visible.assign(n, 0);
}

namespace {

constexpr char kMagic[8] = {'H', 'Z', 'S', 'P', 'L', 'A', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::filesystem::path& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("truncated checkpoint " + path.string());
    return value;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put(out, ckpt.step);
    put(out, ckpt.val_psnr);
    put(out, ckpt.val_ssim);
    put(out, static_cast<std::uint64_t>(ckpt.cloud.size()));
    for (std::size_t i = 0; i < ckpt.cloud.size(); ++i) {
        const GaussianParams g = ckpt.cloud.get(i);
        for (double v : g.mean) put(out, v);
        put(out, g.log_scale);
        put(out, g.logit_opacity);
        for (double v : g.color) put(out, v);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("not a checkpoint: " + path.string());
    const auto version = take<std::uint32_t>(in, path);
    if (version != kVersion) throw IoError("unsupported checkpoint version in " + path.string());
    Checkpoint ckpt;
    ckpt.step = take<std::int64_t>(in, path);
    ckpt.val_psnr = take<double>(in, path);
    ckpt.val_ssim = take<double>(in, path);
    const auto n = take<std::uint64_t>(in, path);
    for (std::uint64_t i = 0; i < n; ++i) {
        GaussianParams g;
        for (double& v : g.mean) v = take<double>(in, path);
        g.log_scale = take<double>(in, path);
        g.logit_opacity = take<double>(in, path);
        for (double& v : g.color) v = take<double>(in, path);
        ckpt.cloud.push_back(g);
    }
    ckpt.cloud.validate();
    return ckpt;
}

}  // namespace hazesplat
