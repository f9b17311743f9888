#include "hazesplat/normalize.hpp"

#include "hazesplat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace hazesplat {

void FrameSet::validate() const {
    if (frames.empty()) throw InvariantError("frame set is empty");
    if (ids.size() != frames.size()) throw InvariantError("frame set: id count does not match frame count");
    for (const auto& f : frames)
        if (!f.same_shape(frames.front())) throw InvariantError("frame set: frames differ in dimensions");
    if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
        throw InvariantError("frame set: duplicate frame ids");
}

ChannelStats channel_stats(const ImageBuffer& image) {
    const int nc = image.channels();
    ChannelStats s;
    s.mean.assign(nc, 0.0);
    s.std.assign(nc, 0.0);
    const std::size_t n = image.pixel_count();
    if (n == 0) return s;
    for (std::size_t p = 0; p < n; ++p)
        for (int c = 0; c < nc; ++c) s.mean[c] += image.data()[p * nc + c];
    for (int c = 0; c < nc; ++c) s.mean[c] /= static_cast<double>(n);
    // Two-pass variance avoids cancellation on near-constant channels.
    for (std::size_t p = 0; p < n; ++p)
        for (int c = 0; c < nc; ++c) {
            const double d = image.data()[p * nc + c] - s.mean[c];
            s.std[c] += d * d;
        }
    for (int c = 0; c < nc; ++c) s.std[c] = std::sqrt(s.std[c] / static_cast<double>(n));
    return s;
}

ImageBuffer normalize_to(const ImageBuffer& image, const ChannelStats& target) {
    const int nc = image.channels();
    if (static_cast<int>(target.mean.size()) != nc || static_cast<int>(target.std.size()) != nc)
        throw InvariantError("normalize_to: target channel count does not match image");
    const ChannelStats src = channel_stats(image);
    std::array<float, 3> gain{}, offset{};
    for (int c = 0; c < nc; ++c) {
        // Constant channels collapse to the target mean (the sigma -> 0 limit).
        const double g = src.std[c] < kStdFloor ? 0.0 : target.std[c] / src.std[c];
        gain[c] = static_cast<float>(g);
        offset[c] = static_cast<float>(target.mean[c] - src.mean[c] * g);
    }
    ImageBuffer out = image;
    if (nc == 3) {
        kernels::active().affine_clamp_rgb(out.data(), out.size(),
                                           kernels::make_rgb_pattern(gain[0], gain[1], gain[2]),
                                           kernels::make_rgb_pattern(offset[0], offset[1], offset[2]));
    } else {
        for (float& v : out.values()) v = std::clamp(v * gain[0] + offset[0], 0.0f, 1.0f);
    }
    return out;
}

namespace {

double lower_median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

}  // namespace

ChannelStats median_reference(const FrameSet& frames) {
    frames.validate();
    const int nc = frames.frames.front().channels();
    std::vector<ChannelStats> per_frame;
    per_frame.reserve(frames.size());
    for (const auto& f : frames.frames) per_frame.push_back(channel_stats(f));
    ChannelStats ref;
    for (int c = 0; c < nc; ++c) {
        std::vector<double> means, stds;
        for (const auto& s : per_frame) {
            means.push_back(s.mean[c]);
            stds.push_back(s.std[c]);
        }
        ref.mean.push_back(lower_median(means));
        ref.std.push_back(lower_median(stds));
    }
    return ref;
}

double max_adjacent_jump(const FrameSet& frames) {
    double jump = 0.0;
    for (std::size_t i = 1; i < frames.size(); ++i)
        jump = std::max(jump, std::fabs(mean_luma(frames.frames[i]) - mean_luma(frames.frames[i - 1])));
    return jump;
}

FrameSet inject_jitter(const FrameSet& frames, double amplitude, std::uint64_t seed) {
    if (!(amplitude >= 0.0)) throw InvariantError("inject_jitter: amplitude must be >= 0");
    FrameSet out = frames;
    if (amplitude == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gain_dist(1.0 - amplitude, 1.0 + amplitude);
    std::uniform_real_distribution<double> offset_dist(-amplitude / 2.0, amplitude / 2.0);
    for (auto& f : out.frames) {
        const int nc = f.channels();
        std::array<float, 3> gain{}, offset{};
        for (int c = 0; c < nc; ++c) {
            gain[c] = static_cast<float>(gain_dist(rng));
            offset[c] = static_cast<float>(offset_dist(rng));
        }
        if (nc == 3) {
            kernels::active().affine_clamp_rgb(f.data(), f.size(),
                                               kernels::make_rgb_pattern(gain[0], gain[1], gain[2]),
                                               kernels::make_rgb_pattern(offset[0], offset[1], offset[2]));
        } else {
            for (float& v : f.values()) v = std::clamp(v * gain[0] + offset[0], 0.0f, 1.0f);
        }
    }
    return out;
}

}  // namespace hazesplat
