#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "flood/common.hpp"

#ifdef FLOOD_HAVE_JPEG
#include <jpeglib.h>
#include <csetjmp>
#endif
#ifdef FLOOD_HAVE_PNG
#include <png.h>
#endif

namespace flood {

// 8-bit interleaved RGB.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;

    uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const uint8_t* pixel(int x, int y) const {
        return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
    }
};

namespace detail {

inline int pnm_next_int(std::istream& in, const std::filesystem::path& p) {
    // skips whitespace and '#' comments per the PNM grammar
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') {
            while (c != '\n' && c != EOF) c = in.get();
        }
        c = in.get();
    }
    if (c == EOF) throw DataError("cannot decode image (truncated header): " + p.string());
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw DataError("cannot decode image (bad header): " + p.string());
    return value;
}

inline Image decode_pnm(std::ifstream& in, const std::filesystem::path& p) {
    char magic[2];
    in.read(magic, 2);
    int kind = magic[1] - '0';
    int w = pnm_next_int(in, p);
    int h = pnm_next_int(in, p);
    if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) {
        throw DataError("cannot decode image (bad dimensions): " + p.string());
    }
    int maxval = pnm_next_int(in, p);
    if (maxval <= 0 || maxval > 255) {
        throw DataError("cannot decode image (unsupported maxval): " + p.string());
    }
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<size_t>(w) * h * 3);
    const size_t npix = static_cast<size_t>(w) * h;
    if (kind == 6 || kind == 5) {
        // single whitespace byte already consumed by pnm_next_int's trailing get
        size_t channels = kind == 6 ? 3 : 1;
        std::vector<uint8_t> raw(npix * channels);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<size_t>(in.gcount()) != raw.size()) {
            throw DataError("cannot decode image (truncated pixel data): " + p.string());
        }
        for (size_t i = 0; i < npix; ++i) {
            if (channels == 3) {
                img.rgb[3 * i + 0] = raw[3 * i + 0];
                img.rgb[3 * i + 1] = raw[3 * i + 1];
                img.rgb[3 * i + 2] = raw[3 * i + 2];
            } else {
                // grayscale replicated into 3 channels
                img.rgb[3 * i + 0] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = raw[i];
            }
        }
    } else if (kind == 3 || kind == 2) {
        size_t channels = kind == 3 ? 3 : 1;
        for (size_t i = 0; i < npix; ++i) {
            for (size_t c = 0; c < channels; ++c) {
                int v = pnm_next_int(in, p);
                if (channels == 3) {
                    img.rgb[3 * i + c] = static_cast<uint8_t>(v);
                } else {
                    img.rgb[3 * i + 0] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] =
                        static_cast<uint8_t>(v);
                }
            }
        }
    } else {
        throw DataError("cannot decode image (unsupported PNM kind): " + p.string());
    }
    return img;
}

#ifdef FLOOD_HAVE_JPEG
struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void jpeg_error_exit_cb(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

inline Image decode_jpeg(const std::filesystem::path& p) {
    FILE* f = std::fopen(p.string().c_str(), "rb");
    if (!f) throw DataError("cannot open image: " + p.string());
    jpeg_decompress_struct cinfo{};
    JpegErrorMgr jerr{};
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit_cb;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw DataError("cannot decode image (corrupt JPEG): " + p.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    Image img;
    img.width = static_cast<int>(cinfo.output_width);
    img.height = static_cast<int>(cinfo.output_height);
    img.rgb.resize(static_cast<size_t>(img.width) * img.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        uint8_t* row = img.rgb.data() + static_cast<size_t>(cinfo.output_scanline) * img.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return img;
}
#endif

#ifdef FLOOD_HAVE_PNG
inline Image decode_png(const std::filesystem::path& p) {
    FILE* f = std::fopen(p.string().c_str(), "rb");
    if (!f) throw DataError("cannot open image: " + p.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(f);
        throw DataError("cannot decode image (corrupt PNG): " + p.string());
    }
    png_init_io(png, f);
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);  // grayscale replicated into 3 channels
    }
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    Image img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.rgb.resize(static_cast<size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = img.rgb.data() + static_cast<size_t>(y) * w * 3;
    }
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    return img;
}
#endif

}  // namespace detail

inline Image load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path.string());
    unsigned char magic[8] = {};
    in.read(reinterpret_cast<char*>(magic), 8);
    std::streamsize got = in.gcount();
    in.clear();
    in.seekg(0);
    if (got >= 2 && magic[0] == 'P' && magic[1] >= '2' && magic[1] <= '6') {
        return detail::decode_pnm(in, path);
    }
#ifdef FLOOD_HAVE_JPEG
    if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) {
        in.close();
        return detail::decode_jpeg(path);
    }
#endif
#ifdef FLOOD_HAVE_PNG
    if (got >= 8 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') {
        in.close();
        return detail::decode_png(path);
    }
#endif
    throw DataError("cannot decode image (unknown format): " + path.string());
}

// Binary PPM (P6). The synthetic corpus uses it because the bytes are a pure
// function of the pixels: no compressor in the loop.
inline void save_ppm(const Image& img, const std::filesystem::path& path) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
    write_file_atomic(path, out);
}

}  // namespace flood
