#include "hazesplat/scatter.hpp"

#include "hazesplat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hazesplat {

void HazeModel::validate() const {
    if (!(beta >= 0.0)) throw InvariantError("haze: beta must be >= 0");
    for (float a : airlight)
        if (!(a >= 0.0f && a <= 1.0f)) throw InvariantError("haze: airlight channels must lie in [0, 1]");
}

void DcpConfig::validate() const {
    if (patch_size <= 0 || patch_size % 2 == 0) throw InvariantError("dcp: patch size must be odd and positive");
    if (!(omega > 0.0 && omega <= 1.0)) throw InvariantError("dcp: omega must lie in (0, 1]");
    if (!(t_floor > 0.0 && t_floor < 1.0)) throw InvariantError("dcp: t_floor must lie in (0, 1)");
    if (!(airlight_fraction > 0.0 && airlight_fraction <= 1.0))
        throw InvariantError("dcp: airlight fraction must lie in (0, 1]");
}

ImageBuffer transmission_from_depth(const ImageBuffer& depth, double beta) {
    if (depth.channels() != 1) throw InvariantError("transmission: depth must be single-channel");
    if (!(beta >= 0.0)) throw InvariantError("transmission: beta must be >= 0");
    ImageBuffer t(depth.height(), depth.width(), 1);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const float d = depth.data()[i];
        if (!(d >= 0.0f)) throw InvariantError("transmission: negative depth");
        t.data()[i] = static_cast<float>(std::exp(-beta * d));
    }
    return t;
}

ImageBuffer apply_haze(const ImageBuffer& clean, const ImageBuffer& transmission, const HazeModel& haze) {
    if (clean.channels() != 3 || transmission.channels() != 1 || !clean.same_extent(transmission))
        throw InvariantError("apply_haze: expected RGB image and matching single-channel transmission");
    haze.validate();
    ImageBuffer out(clean.height(), clean.width(), 3);
    const auto a = kernels::make_rgb_pattern(haze.airlight[0], haze.airlight[1], haze.airlight[2]);
    kernels::active().haze_blend_rgb(clean.data(), transmission.data(), out.data(), clean.pixel_count(), a);
    return out;
}

ImageBuffer invert_haze(const ImageBuffer& hazy, const ImageBuffer& transmission, const HazeModel& haze,
                        double t_floor) {
    if (hazy.channels() != 3 || transmission.channels() != 1 || !hazy.same_extent(transmission))
        throw InvariantError("invert_haze: expected RGB image and matching single-channel transmission");
    ImageBuffer out(hazy.height(), hazy.width(), 3);
    for (std::size_t p = 0; p < hazy.pixel_count(); ++p) {
        const double t = std::max(static_cast<double>(transmission.data()[p]), t_floor);
        for (int c = 0; c < 3; ++c) {
            const double a = haze.airlight[c];
            const double j = (hazy.data()[p * 3 + c] - a) / t + a;
            out.data()[p * 3 + c] = static_cast<float>(std::clamp(j, 0.0, 1.0));
        }
    }
    return out;
}

ImageBuffer dark_channel(const ImageBuffer& image, int patch_size) {
    if (patch_size <= 0 || patch_size % 2 == 0) throw InvariantError("dark_channel: patch size must be odd");
    const int h = image.height();
    const int w = image.width();
    ImageBuffer channel_min(h, w, 1);
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        const float* px = image.data() + p * image.channels();
        channel_min.data()[p] = *std::min_element(px, px + image.channels());
    }
    // A clamped rectangular window is separable under min.
    const int r = patch_size / 2;
    const auto& k = kernels::active();
    ImageBuffer rows(h, w, 1);
    k.row_min(channel_min.data(), rows.data(), h, w, r);
    ImageBuffer out(h, w, 1);
    k.col_min(rows.data(), out.data(), h, w, r);
    return out;
}

Rgb estimate_airlight(const ImageBuffer& hazy, const DcpConfig& cfg) {
    cfg.validate();
    if (hazy.channels() != 3) throw InvariantError("estimate_airlight: expected RGB image");
    const ImageBuffer dark = dark_channel(hazy, cfg.patch_size);
    const std::size_t n = dark.size();
    const std::size_t count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(cfg.airlight_fraction * static_cast<double>(n))), 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Brightest dark-channel values first; index breaks ties for determinism.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const float da = dark.data()[a];
                          const float db = dark.data()[b];
                          return da != db ? da > db : a < b;
                      });
    std::array<double, 3> sum{};
    for (std::size_t i = 0; i < count; ++i)
        for (int c = 0; c < 3; ++c) sum[c] += hazy.data()[order[i] * 3 + c];
    Rgb a{};
    for (int c = 0; c < 3; ++c) a[c] = static_cast<float>(sum[c] / static_cast<double>(count));
    return a;
}

ImageBuffer estimate_transmission(const ImageBuffer& hazy, const Rgb& airlight, const DcpConfig& cfg) {
    cfg.validate();
    if (hazy.channels() != 3) throw InvariantError("estimate_transmission: expected RGB image");
    ImageBuffer scaled(hazy.height(), hazy.width(), 3);
    for (std::size_t p = 0; p < hazy.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c)
            scaled.data()[p * 3 + c] = hazy.data()[p * 3 + c] / std::max(airlight[c], kAirlightGuard);
    ImageBuffer t = dark_channel(scaled, cfg.patch_size);
    for (float& v : t.values())
        v = static_cast<float>(std::clamp(1.0 - cfg.omega * v, cfg.t_floor, 1.0));
    return t;
}

ImageBuffer dehaze_dcp(const ImageBuffer& hazy, const DcpConfig& cfg) {
    const Rgb a = estimate_airlight(hazy, cfg);
    const ImageBuffer t = estimate_transmission(hazy, a, cfg);
    HazeModel model;
    model.airlight = a;
    return invert_haze(hazy, t, model, cfg.t_floor);
}

}  // namespace hazesplat
