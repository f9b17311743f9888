#include "hazesplat/image.hpp"
#include "hazesplat/kernels.hpp"
#include "ssim_window.hpp"

#include <algorithm>
#include <cmath>

namespace hazesplat {

int ssim_window_size(int height, int width) {
    const int side = std::min({kSsimWindow, height, width});
    return side % 2 == 1 ? side : side - 1;
}

std::vector<double> ssim_taps(int size) {
    if (size < 1 || size % 2 == 0 || size > kSsimWindow) throw InvariantError("ssim: bad window size");
    std::vector<double> t(static_cast<std::size_t>(size));
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - size / 2;
        t[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += t[i];
    }
    for (double& v : t) v /= sum;
    return t;
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) throw InvariantError("mse: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        sum += d * d;
    }
    return a.empty() ? 0.0 : sum / static_cast<double>(a.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    const double e = mse(a, b);
    if (e == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(1.0 / e);
}

namespace detail {

void check_ssim_inputs(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) throw InvariantError("ssim: dimension mismatch");
    if (a.empty()) throw InvariantError("ssim: empty image");
}

std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, int k) {
    const auto& kern = kernels::active();
    const auto taps = ssim_taps(k);
    const int ow = w - k + 1;
    const int oh = h - k + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow);
    kern.conv_rows(plane.data(), rows.data(), h, w, taps.data(), k);
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    kern.conv_cols(rows.data(), out.data(), h, ow, taps.data(), k);
    return out;
}

std::vector<double> filter_adjoint(const std::vector<double>& map, int h, int w, int k) {
    const int pad = k - 1;
    const int mh = h - pad;
    const int mw = w - pad;
    const int ph = mh + 2 * pad;
    const int pw = mw + 2 * pad;
    std::vector<double> padded(static_cast<std::size_t>(ph) * pw, 0.0);
    for (int y = 0; y < mh; ++y)
        for (int x = 0; x < mw; ++x)
            padded[static_cast<std::size_t>(y + pad) * pw + x + pad] = map[static_cast<std::size_t>(y) * mw + x];
    // Taps are symmetric, so valid correlation of the padded map is the adjoint.
    return filter_valid(padded, ph, pw, k);
}

SsimWindowStats window_stats(const ImageBuffer& a, const ImageBuffer& b, int channel) {
    const int h = a.height();
    const int w = a.width();
    const std::size_t n = a.pixel_count();
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double va = a.data()[i * a.channels() + channel];
        const double vb = b.data()[i * b.channels() + channel];
        pa[i] = va;
        pb[i] = vb;
        paa[i] = va * va;
        pbb[i] = vb * vb;
        pab[i] = va * vb;
    }
    SsimWindowStats s;
    s.window = ssim_window_size(h, w);
    s.out_h = h - s.window + 1;
    s.out_w = w - s.window + 1;
    s.mu_a = filter_valid(pa, h, w, s.window);
    s.mu_b = filter_valid(pb, h, w, s.window);
    s.var_a = filter_valid(paa, h, w, s.window);
    s.var_b = filter_valid(pbb, h, w, s.window);
    s.cov = filter_valid(pab, h, w, s.window);
    for (std::size_t i = 0; i < s.mu_a.size(); ++i) {
        s.var_a[i] -= s.mu_a[i] * s.mu_a[i];
        s.var_b[i] -= s.mu_b[i] * s.mu_b[i];
        s.cov[i] -= s.mu_a[i] * s.mu_b[i];
    }
    return s;
}

}  // namespace detail

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    detail::check_ssim_inputs(a, b);
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        const auto s = detail::window_stats(a, b, c);
        double sum = 0.0;
        for (std::size_t i = 0; i < s.mu_a.size(); ++i)
            sum += detail::ssim_at(s.mu_a[i], s.mu_b[i], s.var_a[i], s.var_b[i], s.cov[i]);
        total += sum / static_cast<double>(s.mu_a.size());
    }
    return total / a.channels();
}

}  // namespace hazesplat
