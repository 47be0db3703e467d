#pragma once
// RGB image buffer and PPM (P6) / optional PNG file I/O.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "igprobe/tensor.hpp"

#ifdef IGPROBE_WITH_PNG
#include <png.h>
#endif

namespace igprobe {

/// H x W x 3 image with RGB values in [0, 1].
class ImageBuf {
public:
    ImageBuf() = default;

    ImageBuf(std::size_t height, std::size_t width, double fill = 0.0)
        : pixels_({height, width, 3}, std::clamp(fill, 0.0, 1.0)) {}

    /// Wraps an H x W x 3 tensor, clamping values into [0, 1].
    explicit ImageBuf(Tensor pixels) : pixels_(std::move(pixels)) {
        if (pixels_.rank() != 3 || pixels_.shape()[2] != 3)
            throw DimensionError("image tensor must be HxWx3, got " + shape_str(pixels_.shape()));
        for (double& v : pixels_.data()) v = std::clamp(v, 0.0, 1.0);
    }

    std::size_t height() const noexcept { return pixels_.shape()[0]; }
    std::size_t width() const noexcept { return pixels_.shape()[1]; }
    const Shape& shape() const noexcept { return pixels_.shape(); }

    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels_[(y * width() + x) * 3 + c];
    }
    void set(std::size_t y, std::size_t x, std::size_t c, double v) {
        pixels_[(y * width() + x) * 3 + c] = std::clamp(v, 0.0, 1.0);
    }

    const Tensor& tensor() const noexcept { return pixels_; }

    bool operator==(const ImageBuf&) const = default;

private:
    Tensor pixels_;
};

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

namespace detail {

inline std::string ppm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

}  // namespace detail

/// Reads a binary PPM (P6). maxval up to 65535 is accepted; 16-bit samples are big-endian.
inline ImageBuf read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    if (detail::ppm_token(in) != "P6") throw Error(path.string() + ": not a P6 PPM file");
    std::size_t w = 0, h = 0;
    long maxval = 0;
    try {
        w = std::stoul(detail::ppm_token(in));
        h = std::stoul(detail::ppm_token(in));
        maxval = std::stol(detail::ppm_token(in));
    } catch (const std::exception&) {
        throw Error(path.string() + ": malformed PPM header");
    }
    if (w == 0 || h == 0 || maxval <= 0 || maxval > 65535)
        throw Error(path.string() + ": unsupported PPM dimensions or maxval");
    const std::size_t bps = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(w * h * 3 * bps);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw Error(path.string() + ": truncated PPM data");
    Tensor t({h, w, 3});
    for (std::size_t i = 0; i < w * h * 3; ++i) {
        const unsigned v = bps == 1 ? raw[i] : (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1];
        t[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return ImageBuf(std::move(t));
}

/// Writes an 8-bit binary PPM (P6, maxval 255).
inline void write_ppm(const std::filesystem::path& path, const ImageBuf& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> raw(img.tensor().size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img.tensor()[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw Error("write failed: " + path.string());
}

#ifdef IGPROBE_WITH_PNG
inline ImageBuf read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw Error(path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error(path.string() + ": " + image.message);
    }
    Tensor t({image.height, image.width, 3});
    for (std::size_t i = 0; i < buf.size(); ++i) t[i] = buf[i] / 255.0;
    return ImageBuf(std::move(t));
}

inline void write_png(const std::filesystem::path& path, const ImageBuf& img) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(img.tensor().size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(img.tensor()[i]);
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
        throw Error(path.string() + ": " + image.message);
}
#endif

inline bool has_png_support() {
#ifdef IGPROBE_WITH_PNG
    return true;
#else
    return false;
#endif
}

/// Dispatches on extension: .ppm always, .png when built with PNG support.
inline ImageBuf read_image(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm") return read_ppm(path);
#ifdef IGPROBE_WITH_PNG
    if (ext == ".png") return read_png(path);
#endif
    throw Error(path.string() + ": unsupported image format '" + ext + "'");
}

inline void write_image(const std::filesystem::path& path, const ImageBuf& img) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm") return write_ppm(path, img);
#ifdef IGPROBE_WITH_PNG
    if (ext == ".png") return write_png(path, img);
#endif
    throw Error(path.string() + ": unsupported image format '" + ext + "'");
}

}  // namespace igprobe
