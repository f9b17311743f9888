#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hazesplat {

/// Raised for unreadable, malformed or unwritable files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an input violates a documented precondition (dimension
/// mismatch, negative depth, even window size, ...).
class InvariantError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// H x W x C row-major image of 32-bit reals, interleaved channels.
/// Carries colour images (C = 3) as well as depth, alpha and transmission
/// maps (C = 1). Values are linear light; no gamma is ever applied.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int height, int width, int channels, float fill = 0.0f);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }
    std::size_t index(int y, int x, int c = 0) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    bool same_shape(const ImageBuffer& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }
    bool same_extent(const ImageBuffer& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool operator==(const ImageBuffer& other) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

using Rgb = std::array<float, 3>;

/// Per-channel population mean and standard deviation.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> std;
};

// File I/O. ".ppm" is binary P6 with maxval 255 (colour); ".pfm" is a
// single-channel little-endian PFM (scale -1.0). The format is chosen from
// the file extension.
ImageBuffer read_image(const std::filesystem::path& path);
void write_image(const ImageBuffer& image, const std::filesystem::path& path);

ImageBuffer read_ppm(const std::filesystem::path& path);
ImageBuffer read_pfm(const std::filesystem::path& path);
void write_ppm(const ImageBuffer& image, const std::filesystem::path& path);
void write_pfm(const ImageBuffer& image, const std::filesystem::path& path);

/// PSNR with peak 1.0. Identical images return kPsnrIdentical instead of +inf
/// so that checkpoint selection stays totally ordered.
inline constexpr double kPsnrIdentical = 99.0;
double mse(const ImageBuffer& a, const ImageBuffer& b);
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Mean SSIM over every valid 11x11 Gaussian window (sigma 1.5,
/// K1 = 0.01, K2 = 0.03, data range 1), averaged over channels. Images
/// narrower than 11 pixels use the largest odd window that fits.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Side of the SSIM window for an h x w image.
int ssim_window_size(int height, int width);

/// Normalised 1-D Gaussian taps (sigma 1.5) of an odd-sized SSIM window.
std::vector<double> ssim_taps(int size = kSsimWindow);

/// Mean over all pixels of (R + G + B) / 3, or the plain mean for 1 channel.
double mean_luma(const ImageBuffer& image);

void clamp_unit(ImageBuffer& image);
bool all_finite(const ImageBuffer& image);

}  // namespace hazesplat
