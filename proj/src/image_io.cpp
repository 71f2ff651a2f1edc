#include "docauth/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace docauth {

namespace {

[[noreturn]] void io_fail(const std::filesystem::path& path,
                          const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail(path, "cannot open");
    std::string magic;
    in >> magic;
    if (magic != "P5") io_fail(path, "not a binary PGM (P5)");
    auto next_int = [&]() {
        // Skip whitespace and '#' comment lines.
        int c;
        while ((c = in.get()) != EOF) {
            if (c == '#') {
                while ((c = in.get()) != EOF && c != '\n') {
                }
            } else if (!std::isspace(c)) {
                in.unget();
                break;
            }
        }
        long v = -1;
        in >> v;
        return v;
    };
    long w = next_int(), h = next_int(), maxval = next_int();
    if (w <= 0 || h <= 0) io_fail(path, "bad dimensions");
    if (maxval != 255) io_fail(path, "only maxval 255 supported");
    in.get();  // single whitespace after maxval
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    in.read(reinterpret_cast<char*>(img.pixels().data()),
            static_cast<std::streamsize>(img.pixels().size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels().size()))
        io_fail(path, "truncated pixel data");
    return img;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) io_fail(path, "cannot open for writing");
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels().data()),
              static_cast<std::streamsize>(img.pixels().size()));
    if (!out) io_fail(path, "write failed");
}

GrayImage load_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) io_fail(path, "cannot open");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             nullptr, nullptr);
    if (!png) io_fail(path, "png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        io_fail(path, "png init failed");
    }
    std::vector<png_bytep> rows;
    GrayImage img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        io_fail(path, "png decode error");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
        // 0.299 R + 0.587 G + 0.114 B, libpng fixed point (x 1e5).
        png_set_rgb_to_gray_fixed(png, PNG_ERROR_ACTION_NONE, 29900, 58700);
    }
    png_read_update_info(png, info);

    img = GrayImage(static_cast<int>(w), static_cast<int>(h));
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.pixels().data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) io_fail(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              nullptr, nullptr);
    if (!png) io_fail(path, "png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        io_fail(path, "png init failed");
    }
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        io_fail(path, "png encode error");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width(), img.height(), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    rows.resize(img.height());
    auto* base = const_cast<std::uint8_t*>(img.pixels().data());
    for (int y = 0; y < img.height(); ++y)
        rows[y] = base + static_cast<std::size_t>(y) * img.width();
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage load_image(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    if (ext == ".pgm") return load_pgm(path);
    if (ext == ".png") return load_png(path);
    io_fail(path, "unsupported image format (want .png or .pgm)");
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
    auto ext = path.extension().string();
    if (ext == ".pgm") return save_pgm(img, path);
    if (ext == ".png") return save_png(img, path);
    io_fail(path, "unsupported image format (want .png or .pgm)");
}

std::string rects_to_text(const std::vector<Rect>& rects) {
    std::ostringstream out;
    for (const auto& r : rects)
        out << r.x1 << " " << r.y1 << " " << r.x2 << " " << r.y2 << "\n";
    return out.str();
}

std::vector<Rect> rects_from_text(const std::string& text) {
    std::istringstream in(text);
    std::vector<Rect> rects;
    Rect r;
    while (in >> r.x1 >> r.y1 >> r.x2 >> r.y2) rects.push_back(r);
    return rects;
}

std::string rects_to_json(const std::vector<Rect>& rects) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rects)
        arr.push_back({{"x1", r.x1}, {"y1", r.y1}, {"x2", r.x2}, {"y2", r.y2}});
    return arr.dump();
}

std::vector<Rect> rects_from_json(const std::string& json_text) {
    auto arr = nlohmann::json::parse(json_text);
    std::vector<Rect> rects;
    for (const auto& o : arr)
        rects.push_back(Rect{o.at("x1").get<int>(), o.at("y1").get<int>(),
                             o.at("x2").get<int>(), o.at("y2").get<int>()});
    return rects;
}

GrayImage annotate(const GrayImage& img, const std::vector<Rect>& rects,
                   int thickness) {
    GrayImage out = img;
    for (const Rect& raw : rects) {
        Rect r = raw.clipped(img.width(), img.height());
        if (!r.valid()) continue;
        for (int t = 0; t < thickness; ++t) {
            Rect b{r.x1 + t, r.y1 + t, r.x2 - t, r.y2 - t};
            if (!b.valid()) break;
            for (int x = b.x1; x < b.x2; ++x) {
                out.set_raw(x, b.y1, 0);
                out.set_raw(x, b.y2 - 1, 0);
            }
            for (int y = b.y1; y < b.y2; ++y) {
                out.set_raw(b.x1, y, 0);
                out.set_raw(b.x2 - 1, y, 0);
            }
        }
    }
    return out;
}

}  // namespace docauth
