#include "logan/image_io.hpp"

#include "logan/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

namespace logan {

namespace {

struct ReadCursor {
    std::span<const std::uint8_t> data;
    std::size_t offset = 0;
};

void on_png_error(png_structp png, png_const_charp message) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text != nullptr) *text = message;
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void read_from_cursor(png_structp png, png_bytep data, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->data.size()) {
        png_error(png, "unexpected end of PNG data");
    }
    std::memcpy(data, cursor->data.data() + cursor->offset, length);
    cursor->offset += length;
}

// Rows are passed as contiguous 8-bit samples; `channels` is 1 or 3.
Bytes encode(int width, int height, int color_type, int channels, const std::uint8_t* pixels,
             std::span<const Rgb8> palette) {
    std::string error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    if (png == nullptr) throw Error(ErrorKind::Io, "png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    Bytes out;
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    std::vector<png_color> colors;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "png encode failed: " + error);
    }
    png_set_write_fn(png, &out, write_to_vector, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        for (const auto& c : palette) colors.push_back(png_color{c[0], c[1], c[2]});
        png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
    }
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width * channels);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::uint8_t quantize(float v) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

} // namespace

Bytes encode_png_rgb(const Image& image) {
    std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(image.width) * image.height * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int k = 0; k < 3; ++k) {
                interleaved[(static_cast<std::size_t>(y) * image.width + x) * 3 + k] = quantize(image.at(k, y, x));
            }
        }
    }
    return encode(image.width, image.height, PNG_COLOR_TYPE_RGB, 3, interleaved.data(), {});
}

Bytes encode_png_gray(const GrayImage& image) {
    require(image.pixels.size() == static_cast<std::size_t>(image.width) * image.height,
            "png: gray raster size mismatch");
    return encode(image.width, image.height, PNG_COLOR_TYPE_GRAY, 1, image.pixels.data(), {});
}

Bytes encode_png_indexed(const GrayImage& indices, std::span<const Rgb8> palette) {
    require(indices.pixels.size() == static_cast<std::size_t>(indices.width) * indices.height,
            "png: index raster size mismatch");
    require(!palette.empty() && palette.size() <= 256, "png: palette must hold 1..256 colors");
    for (auto v : indices.pixels) require(v < palette.size(), "png: index outside palette");
    return encode(indices.width, indices.height, PNG_COLOR_TYPE_PALETTE, 1, indices.pixels.data(), palette);
}

GrayImage decode_png_gray(std::span<const std::uint8_t> data) {
    if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) {
        throw Error(ErrorKind::Io, "png: not a PNG stream");
    }
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    if (png == nullptr) throw Error(ErrorKind::Io, "png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    ReadCursor cursor{data, 0};
    GrayImage out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "png decode failed: " + error);
    }
    png_set_read_fn(png, &cursor, read_from_cursor);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "png: expected a single-channel grayscale or indexed image");
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "png: grayscale images must be 8-bit");
    }
    if (bit_depth < 8) png_set_packing(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
    rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) {
        rows[static_cast<std::size_t>(y)] = out.pixels.data() + static_cast<std::size_t>(y) * out.width;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::random_device rd;
    auto tmp = path;
    tmp += ".tmp-" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(ErrorKind::Io, "cannot rename into " + path.string() + ": " + ec.message());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                          text.size()));
}

} // namespace logan
