#pragma once
// JPEG-style lossy degradation (colour transform, chroma subsampling, 8x8 DCT
// quantisation round trip) and cubic-convolution resampling. Entropy coding
// is lossless and therefore not modelled.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "igprobe/image.hpp"

namespace igprobe {

/// JPEG quality factor in [1, 100], or ORIGINAL (no degradation).
class QualityLevel {
public:
    static QualityLevel original() { return QualityLevel(); }

    static QualityLevel jpeg(int q) {
        if (q < 1 || q > 100) throw Error("quality " + std::to_string(q) + " outside [1, 100]");
        QualityLevel l;
        l.q_ = q;
        return l;
    }

    /// "original" (any case) or an integer quality.
    static QualityLevel parse(const std::string& s) {
        std::string lower;
        for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (lower == "original" || lower == "orig") return original();
        std::size_t pos = 0;
        int q = 0;
        try {
            q = std::stoi(s, &pos);
        } catch (const std::exception&) {
            throw Error("bad quality '" + s + "'");
        }
        if (pos != s.size()) throw Error("bad quality '" + s + "'");
        return jpeg(q);
    }

    bool is_original() const noexcept { return !q_.has_value(); }
    int value() const {
        if (!q_) throw Error("ORIGINAL has no quality factor");
        return *q_;
    }

    /// Column label used in tables: "Original" / "Quality 75".
    std::string label() const { return q_ ? "Quality " + std::to_string(*q_) : "Original"; }
    /// Short token used in file names and CSV keys: "original" / "q75".
    std::string token() const { return q_ ? "q" + std::to_string(*q_) : "original"; }

    bool operator==(const QualityLevel&) const = default;

private:
    QualityLevel() = default;
    std::optional<int> q_;
};

using Block8 = std::array<double, 64>;
using QuantMatrix = std::array<int, 64>;

struct QuantTable {
    QuantMatrix luma{};
    QuantMatrix chroma{};
};

// Standard example tables (ITU-T T.81 Annex K), natural row-major order.
inline constexpr QuantMatrix kBaseLuma = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr QuantMatrix kBaseChroma = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

/// IJG quality scaling: scale = 5000/q below 50, else 200 - 2q (integer
/// arithmetic), entry = clamp((base * scale + 50) / 100, 1, 255).
inline QuantTable quant_table(const QualityLevel& q) {
    if (q.is_original()) throw Error("ORIGINAL quality has no quantisation table");
    const int quality = q.value();
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    auto scaled = [scale](const QuantMatrix& base) {
        QuantMatrix m{};
        for (std::size_t i = 0; i < 64; ++i) m[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
        return m;
    };
    return {scaled(kBaseLuma), scaled(kBaseChroma)};
}

namespace detail {

/// Orthonormal DCT-II basis: basis[u][x] = a(u) cos((2x + 1) u pi / 16).
inline const std::array<std::array<double, 8>, 8>& dct_basis() {
    static const auto basis = [] {
        std::array<std::array<double, 8>, 8> b{};
        for (int u = 0; u < 8; ++u)
            for (int x = 0; x < 8; ++x)
                b[u][x] = (u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                          std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
        return b;
    }();
    return basis;
}

}  // namespace detail

/// 2-D orthonormal DCT-II of an 8x8 block (row-major).
inline Block8 dct8x8(const Block8& in) {
    const auto& C = detail::dct_basis();
    Block8 tmp{}, out{};
    for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int x = 0; x < 8; ++x) s += C[u][x] * in[y * 8 + x];
            tmp[y * 8 + u] = s;
        }
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) s += C[v][y] * tmp[y * 8 + u];
            out[v * 8 + u] = s;
        }
    return out;
}

/// Inverse of dct8x8 (orthonormal DCT-III).
inline Block8 idct8x8(const Block8& in) {
    const auto& C = detail::dct_basis();
    Block8 tmp{}, out{};
    for (int v = 0; v < 8; ++v)
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) s += C[u][x] * in[v * 8 + u];
            tmp[v * 8 + x] = s;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) s += C[v][y] * tmp[v * 8 + x];
            out[y * 8 + x] = s;
        }
    return out;
}

inline Tensor dct8x8(const Tensor& block) {
    if (block.shape() != Shape{8, 8}) throw DimensionError("dct8x8 expects [8,8], got " + shape_str(block.shape()));
    Block8 b{};
    std::copy(block.data().begin(), block.data().end(), b.begin());
    const auto r = dct8x8(b);
    return Tensor({8, 8}, std::vector<double>(r.begin(), r.end()));
}

inline Tensor idct8x8(const Tensor& block) {
    if (block.shape() != Shape{8, 8}) throw DimensionError("idct8x8 expects [8,8], got " + shape_str(block.shape()));
    Block8 b{};
    std::copy(block.data().begin(), block.data().end(), b.begin());
    const auto r = idct8x8(b);
    return Tensor({8, 8}, std::vector<double>(r.begin(), r.end()));
}

inline double round_half_away(double v) { return v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5); }

struct JpegOptions {
    int subsample_below = 95;  // 4:2:0 chroma when q < this, else 4:4:4
};

namespace detail {

struct Plane {
    std::size_t h = 0, w = 0;
    std::vector<double> v;
    double& at(std::size_t y, std::size_t x) { return v[y * w + x]; }
    double at(std::size_t y, std::size_t x) const { return v[y * w + x]; }
};

inline Plane pad_edge(const Plane& p, std::size_t h, std::size_t w) {
    Plane out{h, w, std::vector<double>(h * w)};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(y, x) = p.at(std::min(y, p.h - 1), std::min(x, p.w - 1));
    return out;
}

inline Plane downsample2(const Plane& p) {
    Plane out{p.h / 2, p.w / 2, std::vector<double>(p.h / 2 * (p.w / 2))};
    for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t x = 0; x < out.w; ++x)
            out.at(y, x) = 0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                                   p.at(2 * y + 1, 2 * x + 1));
    return out;
}

inline Plane upsample2(const Plane& p) {
    Plane out{p.h * 2, p.w * 2, std::vector<double>(p.h * p.w * 4)};
    for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t x = 0; x < out.w; ++x) out.at(y, x) = p.at(y / 2, x / 2);
    return out;
}

/// Level shift, DCT, quantise/dequantise, IDCT, unshift; every block in place.
/// Plane dimensions must be multiples of 8.
inline void quantize_plane(Plane& p, const QuantMatrix& q) {
    for (std::size_t by = 0; by < p.h; by += 8)
        for (std::size_t bx = 0; bx < p.w; bx += 8) {
            Block8 b{};
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) b[y * 8 + x] = p.at(by + y, bx + x) - 128.0;
            auto c = dct8x8(b);
            for (int i = 0; i < 64; ++i) c[i] = round_half_away(c[i] / q[i]) * q[i];
            const auto r = idct8x8(c);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) p.at(by + y, bx + x) = r[y * 8 + x] + 128.0;
        }
}

}  // namespace detail

/// Lossy JPEG round trip in floating point. ORIGINAL returns the input unchanged.
inline ImageBuf degrade_jpeg(const ImageBuf& img, const QualityLevel& q, const JpegOptions& opt = {}) {
    if (q.is_original()) return img;
    const QuantTable tables = quant_table(q);
    const bool sub = q.value() < opt.subsample_below;
    const std::size_t H = img.height(), W = img.width();
    const std::size_t unit = sub ? 16 : 8;
    const std::size_t PH = (H + unit - 1) / unit * unit, PW = (W + unit - 1) / unit * unit;

    detail::Plane Y{H, W, std::vector<double>(H * W)}, Cb = Y, Cr = Y;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const double r = img.at(y, x, 0) * 255.0, g = img.at(y, x, 1) * 255.0, b = img.at(y, x, 2) * 255.0;
            Y.at(y, x) = 0.299 * r + 0.587 * g + 0.114 * b;
            Cb.at(y, x) = -0.168735892 * r - 0.331264108 * g + 0.5 * b + 128.0;
            Cr.at(y, x) = 0.5 * r - 0.418687589 * g - 0.081312411 * b + 128.0;
        }
    Y = detail::pad_edge(Y, PH, PW);
    Cb = detail::pad_edge(Cb, PH, PW);
    Cr = detail::pad_edge(Cr, PH, PW);
    if (sub) {
        Cb = detail::downsample2(Cb);
        Cr = detail::downsample2(Cr);
    }
    detail::quantize_plane(Y, tables.luma);
    detail::quantize_plane(Cb, tables.chroma);
    detail::quantize_plane(Cr, tables.chroma);
    if (sub) {
        Cb = detail::upsample2(Cb);
        Cr = detail::upsample2(Cr);
    }

    Tensor out({H, W, 3});
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const double yy = Y.at(y, x), cb = Cb.at(y, x) - 128.0, cr = Cr.at(y, x) - 128.0;
            const double rgb[3] = {yy + 1.402 * cr, yy - 0.344136286 * cb - 0.714136286 * cr, yy + 1.772 * cb};
            for (int c = 0; c < 3; ++c) out[(y * W + x) * 3 + c] = rgb[c] / 255.0;
        }
    return ImageBuf(std::move(out));  // clamps to [0, 1]
}

// ---------------------------------------------------------------------------
// Resampling

inline constexpr double kBicubicA = -0.75;

/// Keys cubic convolution kernel.
inline double cubic_kernel(double x, double a = kBicubicA) {
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

/// Tap weights for source samples floor(s)-1 .. floor(s)+2 at fractional offset t in [0, 1).
inline std::array<double, 4> cubic_weights(double t, double a = kBicubicA) {
    return {cubic_kernel(t + 1.0, a), cubic_kernel(t, a), cubic_kernel(1.0 - t, a), cubic_kernel(2.0 - t, a)};
}

namespace detail {

struct Taps {
    std::array<std::ptrdiff_t, 4> idx;
    std::array<double, 4> w;
};

/// Half-pixel centres: src = (i + 0.5) * in/out - 0.5, indices clamped to the edge.
inline std::vector<Taps> resample_taps(std::size_t in, std::size_t out, double a) {
    std::vector<Taps> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
        const double f = std::floor(src);
        const auto base = static_cast<std::ptrdiff_t>(f);
        taps[i].w = cubic_weights(src - f, a);
        for (int k = 0; k < 4; ++k)
            taps[i].idx[k] = std::clamp<std::ptrdiff_t>(base - 1 + k, 0, static_cast<std::ptrdiff_t>(in) - 1);
    }
    return taps;
}

}  // namespace detail

/// Separable bicubic resize (rows first, then columns), output clamped to [0, 1].
/// Each tap sum is taken relative to the nearest-left sample, which makes flat
/// regions and same-size resizes reproduce their input exactly.
inline ImageBuf resize_bicubic(const ImageBuf& img, std::size_t out_h, std::size_t out_w, double a = kBicubicA) {
    if (out_h == 0 || out_w == 0) throw Error("resize target must be at least 1x1");
    const std::size_t H = img.height(), W = img.width();
    const auto tx = detail::resample_taps(W, out_w, a);
    const auto ty = detail::resample_taps(H, out_h, a);
    std::vector<double> horiz(H * out_w * 3);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < out_w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double anchor = img.at(y, static_cast<std::size_t>(tx[x].idx[1]), c);
                double s = 0.0;
                for (int k = 0; k < 4; ++k)
                    s += tx[x].w[k] * (img.at(y, static_cast<std::size_t>(tx[x].idx[k]), c) - anchor);
                horiz[(y * out_w + x) * 3 + c] = anchor + s;
            }
    Tensor out({out_h, out_w, 3});
    for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                auto at = [&](int k) { return horiz[(static_cast<std::size_t>(ty[y].idx[k]) * out_w + x) * 3 + c]; };
                const double anchor = at(1);
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += ty[y].w[k] * (at(k) - anchor);
                out[(y * out_w + x) * 3 + c] = anchor + s;
            }
    return ImageBuf(std::move(out));
}

/// 10 log10(1 / MSE) over all channels; +infinity for identical images.
inline double psnr(const ImageBuf& a, const ImageBuf& b) {
    require_same_shape(a.tensor(), b.tensor(), "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.tensor().size(); ++i) {
        const double d = a.tensor()[i] - b.tensor()[i];
        se += d * d;
    }
    if (se == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(static_cast<double>(a.tensor().size()) / se);
}

}  // namespace igprobe
