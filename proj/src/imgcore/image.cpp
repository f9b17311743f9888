#include "hazesplat/image.hpp"

#include <algorithm>
#include <cmath>

namespace hazesplat {

ImageBuffer::ImageBuffer(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0) throw InvariantError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw InvariantError("image must have 1 or 3 channels");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

double mean_luma(const ImageBuffer& image) {
    if (image.empty()) return 0.0;
    double sum = 0.0;
    for (float v : image.values()) sum += v;
    return sum / static_cast<double>(image.size());
}

void clamp_unit(ImageBuffer& image) {
    for (float& v : image.values()) v = std::clamp(v, 0.0f, 1.0f);
}

bool all_finite(const ImageBuffer& image) {
    return std::all_of(image.values().begin(), image.values().end(),
                       [](float v) { return std::isfinite(v); });
}

}  // namespace hazesplat
