#pragma once

// Brute-force double-precision reference implementations used as test
// oracles. They follow the definitions directly (no separable filtering, no
// tiling, no SIMD) and are meant to be slow and obvious.

#include "hazesplat/image.hpp"
#include "hazesplat/losses.hpp"
#include "hazesplat/splat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

using namespace hazesplat;

/// Interleaved double image.
struct Plane {
    int h = 0, w = 0, c = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}
    explicit Plane(const ImageBuffer& img) : Plane(img.height(), img.width(), img.channels()) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.data()[i];
    }
    double& at(int y, int x, int ch = 0) { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    double at(int y, int x, int ch = 0) const { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

struct Render {
    Plane color, depth, alpha;
};

inline Vec3 to_camera(const CameraView& cam, const Vec3& p) {
    const auto& m = cam.cam_to_world;
    const Vec3 d{p[0] - m[3], p[1] - m[7], p[2] - m[11]};
    return {m[0] * d[0] + m[4] * d[1] + m[8] * d[2], m[1] * d[0] + m[5] * d[1] + m[9] * d[2],
            m[2] * d[0] + m[6] * d[1] + m[10] * d[2]};
}

inline Render render(const GaussianCloud& cloud, const CameraView& cam, const Rgb& bg) {
    const int h = cam.height, w = cam.width;
    Render out{Plane(h, w, 3), Plane(h, w, 1), Plane(h, w, 1)};
    struct P {
        std::size_t i;
        double u, v, z, s, o;
    };
    std::vector<P> ps;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 q = to_camera(cam, cloud.mean(i));
        if (q[2] <= kNearPlane) continue;
        ps.push_back({i, cam.fx * q[0] / q[2] + cam.cx, cam.fy * q[1] / q[2] + cam.cy, q[2],
                      std::exp(cloud.log_scales[i]) * cam.fx / q[2], 1.0 / (1.0 + std::exp(-cloud.logit_opacities[i]))});
    }
    std::stable_sort(ps.begin(), ps.end(), [](const P& a, const P& b) { return a.z < b.z; });
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double t = 1.0;
            std::array<double, 3> col{0, 0, 0};
            double depth = 0.0;
            for (const P& p : ps) {
                const double dx = x + 0.5 - p.u, dy = y + 0.5 - p.v;
                const double r2 = dx * dx + dy * dy;
                if (r2 > 9.0 * p.s * p.s) continue;
                const double a = std::min(p.o * std::exp(-r2 / (2.0 * p.s * p.s)), kAlphaMax);
                for (int k = 0; k < 3; ++k) col[k] += a * t * cloud.colors[3 * p.i + k];
                depth += a * t * p.z;
                t *= 1.0 - a;
                if (t < kTransmittanceMin) break;
            }
            for (int k = 0; k < 3; ++k) out.color.at(y, x, k) = col[k] + t * bg[k];
            out.depth.at(y, x) = depth;
            out.alpha.at(y, x) = 1.0 - t;
        }
    return out;
}

inline double l1(const Plane& a, const ImageBuffer& ref) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += std::fabs(a.v[i] - ref.data()[i]);
    return s / static_cast<double>(a.v.size());
}

/// SSIM window side for an h x w image: 11, or the largest odd size that fits.
inline int window_side(int h, int w) {
    int k = std::min({11, h, w});
    return k % 2 == 1 ? k : k - 1;
}

/// Mean SSIM, every window evaluated directly with 2-D Gaussian weights.
inline double ssim(const Plane& a, const Plane& b) {
    const int k = window_side(a.h, a.w);
    std::vector<double> g(k);
    for (int i = 0; i < k; ++i) g[i] = std::exp(-(i - k / 2) * (i - k / 2) / (2.0 * 1.5 * 1.5));
    const double gs = std::accumulate(g.begin(), g.end(), 0.0);
    for (double& x : g) x /= gs;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (int ch = 0; ch < a.c; ++ch) {
        double sum = 0.0;
        int count = 0;
        for (int y0 = 0; y0 + k <= a.h; ++y0)
            for (int x0 = 0; x0 + k <= a.w; ++x0) {
                double ma = 0, mb = 0;
                for (int j = 0; j < k; ++j)
                    for (int i = 0; i < k; ++i) {
                        ma += g[j] * g[i] * a.at(y0 + j, x0 + i, ch);
                        mb += g[j] * g[i] * b.at(y0 + j, x0 + i, ch);
                    }
                double va = 0, vb = 0, cv = 0;
                for (int j = 0; j < k; ++j)
                    for (int i = 0; i < k; ++i) {
                        const double da = a.at(y0 + j, x0 + i, ch) - ma;
                        const double db = b.at(y0 + j, x0 + i, ch) - mb;
                        va += g[j] * g[i] * da * da;
                        vb += g[j] * g[i] * db * db;
                        cv += g[j] * g[i] * da * db;
                    }
                sum += (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        total += sum / count;
    }
    return total / a.c;
}

inline double ssim_loss(const Plane& a, const ImageBuffer& ref) { return 1.0 - ssim(a, Plane(ref)); }

/// Dark channel by direct window scan.
inline Plane dark_channel(const Plane& a, int k) {
    const int r = k / 2;
    Plane out(a.h, a.w, 1);
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            double m = 1e300;
            for (int yy = std::max(0, y - r); yy <= std::min(a.h - 1, y + r); ++yy)
                for (int xx = std::max(0, x - r); xx <= std::min(a.w - 1, x + r); ++xx)
                    for (int ch = 0; ch < a.c; ++ch) m = std::min(m, a.at(yy, xx, ch));
            out.at(y, x) = m;
        }
    return out;
}

inline double dcp(const Plane& a, int k) {
    const Plane d = dark_channel(a, k);
    return std::accumulate(d.v.begin(), d.v.end(), 0.0) / static_cast<double>(d.v.size());
}

/// Argmin source (flat index) of every dark-channel output, first in scan order.
inline std::vector<std::size_t> dcp_argmins(const Plane& a, int k) {
    const int r = k / 2;
    std::vector<std::size_t> out;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            double m = 1e300;
            std::size_t arg = 0;
            for (int yy = std::max(0, y - r); yy <= std::min(a.h - 1, y + r); ++yy)
                for (int xx = std::max(0, x - r); xx <= std::min(a.w - 1, x + r); ++xx)
                    for (int ch = 0; ch < a.c; ++ch)
                        if (a.at(yy, xx, ch) < m) {
                            m = a.at(yy, xx, ch);
                            arg = (static_cast<std::size_t>(yy) * a.w + xx) * a.c + ch;
                        }
            out.push_back(arg);
        }
    return out;
}

/// 1 + weighted Pearson correlation; 1 when degenerate.
inline double pearson(const Plane& dr, const ImageBuffer& dp, const ImageBuffer& w) {
    double sw = 0, ma = 0, mb = 0;
    for (std::size_t i = 0; i < dr.v.size(); ++i) {
        sw += w.data()[i];
        ma += w.data()[i] * dr.v[i];
        mb += w.data()[i] * dp.data()[i];
    }
    if (!(sw > 0.0)) return 1.0;
    ma /= sw;
    mb /= sw;
    double va = 0, vb = 0, cv = 0;
    for (std::size_t i = 0; i < dr.v.size(); ++i) {
        const double da = dr.v[i] - ma, db = dp.data()[i] - mb;
        va += w.data()[i] * da * da;
        vb += w.data()[i] * db * db;
        cv += w.data()[i] * da * db;
    }
    const double den = std::sqrt(va) * std::sqrt(vb);
    return den < 1e-8 ? 1.0 : 1.0 + cv / den;
}

struct SobelOut {
    Plane gx, gy;
};

inline SobelOut sobel(const Plane& a) {
    static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    SobelOut out{Plane(a.h, a.w, a.c), Plane(a.h, a.w, a.c)};
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x)
            for (int ch = 0; ch < a.c; ++ch)
                for (int j = -1; j <= 1; ++j)
                    for (int i = -1; i <= 1; ++i) {
                        const double v = a.at(std::clamp(y + j, 0, a.h - 1), std::clamp(x + i, 0, a.w - 1), ch);
                        out.gx.at(y, x, ch) += kx[j + 1][i + 1] * v;
                        out.gy.at(y, x, ch) += ky[j + 1][i + 1] * v;
                    }
    return out;
}

/// Mean |Sobel(a) - Sobel(ref)| over both components, against an
/// already-normalised reference.
inline double grad_loss(const Plane& a, const ImageBuffer& ref) {
    const SobelOut sa = sobel(a), sb = sobel(Plane(ref));
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += std::fabs(sa.gx.v[i] - sb.gx.v[i]) + std::fabs(sa.gy.v[i] - sb.gy.v[i]);
    return s / (2.0 * static_cast<double>(a.v.size()));
}

/// Signs of the Sobel residuals; a change between two inputs marks a kink.
inline std::vector<std::int8_t> grad_signs(const Plane& a, const ImageBuffer& ref) {
    const SobelOut sa = sobel(a), sb = sobel(Plane(ref));
    std::vector<std::int8_t> out;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double dx = sa.gx.v[i] - sb.gx.v[i], dy = sa.gy.v[i] - sb.gy.v[i];
        out.push_back(static_cast<std::int8_t>((dx > 0) - (dx < 0)));
        out.push_back(static_cast<std::int8_t>((dy > 0) - (dy < 0)));
    }
    return out;
}

inline std::vector<std::int8_t> l1_signs(const Plane& a, const ImageBuffer& ref) {
    std::vector<std::int8_t> out;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - ref.data()[i];
        out.push_back(static_cast<std::int8_t>((d > 0) - (d < 0)));
    }
    return out;
}

/// Targets for the composite objective; `structure` is already normalised
/// and `weights` are the held depth weights.
struct Targets {
    const ImageBuffer* reference;
    const ImageBuffer* pseudo_depth;
    const ImageBuffer* structure;
    const ImageBuffer* weights;
};

inline double composite(const Render& r, const Targets& t, const LossWeights& lw) {
    return (1.0 - lw.lambda_ssim) * l1(r.color, *t.reference) + lw.lambda_ssim * ssim_loss(r.color, *t.reference) +
           lw.lambda_dcp * dcp(r.color, lw.dcp_patch) + lw.lambda_depth * pearson(r.depth, *t.pseudo_depth, *t.weights) +
           lw.lambda_grad * grad_loss(r.color, *t.structure);
}

/// Every non-smooth branch the composite objective takes at r.
inline std::vector<std::int64_t> composite_branches(const Render& r, const Targets& t, const LossWeights& lw) {
    std::vector<std::int64_t> key;
    for (auto s : l1_signs(r.color, *t.reference)) key.push_back(s);
    for (auto a : dcp_argmins(r.color, lw.dcp_patch)) key.push_back(static_cast<std::int64_t>(a));
    for (auto s : grad_signs(r.color, *t.structure)) key.push_back(s);
    return key;
}

}  // namespace oracle
