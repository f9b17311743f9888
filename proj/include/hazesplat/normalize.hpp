#pragma once

#include "hazesplat/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hazesplat {

/// Ordered frames of identical dimensions with unique ids.
struct FrameSet {
    std::vector<ImageBuffer> frames;
    std::vector<std::string> ids;

    void validate() const;
    std::size_t size() const { return frames.size(); }
};

/// Below this a channel is treated as constant and mapped to the target mean.
inline constexpr double kStdFloor = 1e-6;

ChannelStats channel_stats(const ImageBuffer& image);

/// Per channel (I - mu) / max(sigma, 1e-6) * sigma_t + mu_t, clamped to [0, 1].
ImageBuffer normalize_to(const ImageBuffer& image, const ChannelStats& target);

/// Median over frames of per-frame means and of per-frame stds (lower median
/// for even counts).
ChannelStats median_reference(const FrameSet& frames);

/// Largest |mean_luma(f[i+1]) - mean_luma(f[i])| over consecutive frames.
double max_adjacent_jump(const FrameSet& frames);

/// Independent per-frame, per-channel gain ~ U[1-a, 1+a] and offset
/// ~ U[-a/2, a/2], drawn from a generator seeded with `seed`.
FrameSet inject_jitter(const FrameSet& frames, double amplitude, std::uint64_t seed);

}  // namespace hazesplat
