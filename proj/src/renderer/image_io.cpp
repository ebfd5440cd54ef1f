#include "hazerf/renderer/image_io.hpp"

#include "hazerf/error.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace hazerf {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode)
{
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f)
        throw Error("cannot open " + path.string());
    return f;
}

void write_png_raw(const std::filesystem::path& path, int width, int height, int channels, int bits,
                   const std::vector<std::uint8_t>& bytes)
{
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed writing " + path.string());
    }
    png_init_io(png, f.get());
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bits, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (bits / 8);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(bytes.data() + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png16(const std::filesystem::path& path, const Image& img)
{
    if (img.channels != 1 && img.channels != 3)
        throw Error("write_png16: need 1 or 3 channels");
    std::vector<std::uint8_t> bytes(img.data.size() * 2);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
        bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    write_png_raw(path, img.width, img.height, img.channels, 16, bytes);
    std::ofstream note(path.string() + ".txt");
    note << "encoding: linear light, no gamma\n"
         << "value: v / 65535 in [0, 1]\n";
}

void write_mask_png(const std::filesystem::path& path, const Image& mask)
{
    if (mask.channels != 1)
        throw Error("write_mask_png: need 1 channel");
    std::vector<std::uint8_t> bytes(mask.data.size());
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        bytes[i] = mask.data[i] > 0.5 ? 255 : 0;
    write_png_raw(path, mask.width, mask.height, 1, 8, bytes);
}

Image read_png(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw Error("missing image " + path.string());
    FilePtr f = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("failed reading " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int bits = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if ((bits != 8 && bits != 16) || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("unsupported PNG layout in " + path.string());
    }
    const int channels = color == PNG_COLOR_TYPE_GRAY ? 1 : 3;
    const std::size_t stride = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> bytes(stride * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        png_read_row(png, bytes.data() + y * stride, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(width, height, channels);
    const double scale = bits == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const std::size_t y = i / (static_cast<std::size_t>(width) * channels);
        const std::size_t off = i % (static_cast<std::size_t>(width) * channels);
        const std::uint8_t* row = bytes.data() + y * stride;
        const unsigned v = bits == 16 ? (static_cast<unsigned>(row[2 * off]) << 8) | row[2 * off + 1] : row[off];
        img.data[i] = v / scale;
    }
    return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img)
{
    if (img.channels != 1)
        throw Error("write_pfm: need 1 channel");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path.string());
    out << "Pf\n" << img.width << ' ' << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x) {
            const float v = static_cast<float>(img.at(x, y, 0));
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            const char le[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
            out.write(le, 4);
        }
    if (!out)
        throw Error("failed writing " + path.string());
}

Image read_pfm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("missing depth map " + path.string());
    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    in.get();
    if (magic != "Pf" || width < 1 || height < 1 || scale >= 0.0)
        throw Error("unsupported PFM header in " + path.string());
    Image img(width, height, 1);
    for (int y = height - 1; y >= 0; --y)
        for (int x = 0; x < width; ++x) {
            unsigned char le[4];
            in.read(reinterpret_cast<char*>(le), 4);
            const std::uint32_t bits = le[0] | (le[1] << 8) | (le[2] << 16) | (static_cast<std::uint32_t>(le[3]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            img.at(x, y, 0) = v;
        }
    if (!in)
        throw Error("truncated PFM " + path.string());
    return img;
}

std::uint32_t file_crc32(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("missing file " + path.string());
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[1 << 15];
    while (in) {
        in.read(buf, sizeof buf);
        const auto n = in.gcount();
        if (n > 0)
            crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace hazerf
