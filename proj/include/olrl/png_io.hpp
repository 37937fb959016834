#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "olrl/core.hpp"
#include "olrl/env.hpp"

namespace olrl {
namespace detail {

class PngWriter {
  public:
    PngWriter(const std::string& path, int w, int h, int bit_depth, int color_type) {
        fp_ = std::fopen(path.c_str(), "wb");
        if (!fp_) throw IoError("cannot open " + path + " for writing");
        png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png_) {
            std::fclose(fp_);
            throw IoError("png_create_write_struct failed");
        }
        info_ = png_create_info_struct(png_);
        if (!info_ || setjmp(png_jmpbuf(png_))) {
            cleanup();
            throw IoError("png write failed: " + path);
        }
        png_init_io(png_, fp_);
        png_set_IHDR(png_, info_, png_uint_32(w), png_uint_32(h), bit_depth, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    }

    ~PngWriter() { cleanup(); }

    void write(std::vector<png_bytep>& rows, int transforms) {
        if (setjmp(png_jmpbuf(png_))) throw IoError("png write failed");
        png_set_rows(png_, info_, rows.data());
        png_write_png(png_, info_, transforms, nullptr);
    }

  private:
    void cleanup() {
        if (png_) png_destroy_write_struct(&png_, info_ ? &info_ : nullptr);
        if (fp_) std::fclose(fp_);
        png_ = nullptr;
        info_ = nullptr;
        fp_ = nullptr;
    }

    FILE* fp_ = nullptr;
    png_structp png_ = nullptr;
    png_infop info_ = nullptr;
};

}  // namespace detail

inline void write_rgb8_png(const std::string& path, int w, int h,
                           const std::vector<uint8_t>& rgb) {
    if (rgb.size() != size_t(w) * h * 3) throw UsageError("rgb buffer size mismatch");
    detail::PngWriter writer(path, w, h, 8, PNG_COLOR_TYPE_RGB);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[size_t(y)] = const_cast<uint8_t*>(rgb.data()) + size_t(y) * w * 3;
    writer.write(rows, PNG_TRANSFORM_IDENTITY);
}

inline void write_gray16_png(const std::string& path, int w, int h,
                             const std::vector<uint16_t>& gray) {
    if (gray.size() != size_t(w) * h) throw UsageError("gray buffer size mismatch");
    detail::PngWriter writer(path, w, h, 16, PNG_COLOR_TYPE_GRAY);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[size_t(y)] =
            reinterpret_cast<uint8_t*>(const_cast<uint16_t*>(gray.data())) + size_t(y) * w * 2;
    // Host is little-endian; PNG wants network order.
    writer.write(rows, PNG_TRANSFORM_SWAP_ENDIAN);
}

// Writes <stem>.png (RGB) and <stem>_depth.png (16-bit grayscale).
inline void write_frame_pngs(const std::string& stem, const Frame& f) {
    std::vector<uint8_t> rgb(size_t(f.h) * f.w * 3);
    std::vector<uint16_t> depth(size_t(f.h) * f.w);
    for (int y = 0; y < f.h; ++y) {
        for (int x = 0; x < f.w; ++x) {
            for (int c = 0; c < 3; ++c)
                rgb[(size_t(y) * f.w + x) * 3 + c] =
                    uint8_t(std::lround(std::clamp(f.at(x, y, c), 0.f, 255.f)));
            depth[size_t(y) * f.w + x] =
                uint16_t(std::lround(std::clamp(f.at(x, y, 3), 0.f, 1.f) * 65535.0));
        }
    }
    write_rgb8_png(stem + ".png", f.w, f.h, rgb);
    write_gray16_png(stem + "_depth.png", f.w, f.h, depth);
}

}  // namespace olrl
