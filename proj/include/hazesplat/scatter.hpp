#pragma once

#include "hazesplat/image.hpp"

namespace hazesplat {

/// Homogeneous atmosphere: I = J * t + A * (1 - t), t = exp(-beta * depth).
struct HazeModel {
    Rgb airlight{1.0f, 1.0f, 1.0f};
    double beta = 0.0;

    void validate() const;
};

/// Classical dark-channel-prior dehazing parameters.
struct DcpConfig {
    int patch_size = 15;
    double omega = 0.95;
    double t_floor = 0.1;
    double airlight_fraction = 0.001;

    void validate() const;
};

/// Guard applied to airlight channels before dividing by them.
inline constexpr float kAirlightGuard = 1e-3f;

ImageBuffer transmission_from_depth(const ImageBuffer& depth, double beta);
ImageBuffer apply_haze(const ImageBuffer& clean, const ImageBuffer& transmission, const HazeModel& haze);

/// J = (I - A) / max(t, t_floor) + A, clamped to [0, 1].
ImageBuffer invert_haze(const ImageBuffer& hazy, const ImageBuffer& transmission, const HazeModel& haze,
                        double t_floor);

/// Per-pixel min over channels, then min over a k x k window clamped to the
/// image bounds. k must be odd.
ImageBuffer dark_channel(const ImageBuffer& image, int patch_size);

Rgb estimate_airlight(const ImageBuffer& hazy, const DcpConfig& cfg);
ImageBuffer estimate_transmission(const ImageBuffer& hazy, const Rgb& airlight, const DcpConfig& cfg);
ImageBuffer dehaze_dcp(const ImageBuffer& hazy, const DcpConfig& cfg = {});

}  // namespace hazesplat
