#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "docauth/image_io.hpp"
#include "oracle.hpp"

using namespace docauth;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("PGM round trip preserves every pixel") {
    std::mt19937_64 rng(101);
    GrayImage img = oracle::random_image(37, 23, rng);
    auto path = temp_file("docauth_io_test.pgm");
    save_pgm(img, path);
    CHECK(load_pgm(path) == img);
    fs::remove(path);
}

TEST_CASE("PNG round trip preserves every pixel") {
    std::mt19937_64 rng(103);
    GrayImage img = oracle::random_image(64, 48, rng);
    auto path = temp_file("docauth_io_test.png");
    save_png(img, path);
    CHECK(load_png(path) == img);
    fs::remove(path);
}

TEST_CASE("load_image dispatches on extension") {
    GrayImage img(5, 4, 128);
    auto png = temp_file("docauth_dispatch.png");
    auto pgm = temp_file("docauth_dispatch.pgm");
    save_image(img, png);
    save_image(img, pgm);
    CHECK(load_image(png) == img);
    CHECK(load_image(pgm) == img);
    CHECK_THROWS(load_image(temp_file("docauth_dispatch.bmp")));
    fs::remove(png);
    fs::remove(pgm);
}

TEST_CASE("missing and malformed files raise errors") {
    CHECK_THROWS(load_pgm(temp_file("does_not_exist.pgm")));
    auto path = temp_file("docauth_bad.pgm");
    {
        std::ofstream out(path);
        out << "P5\n4 4\n255\nxx";  // truncated pixel data
    }
    CHECK_THROWS(load_pgm(path));
    fs::remove(path);
}

TEST_CASE("rect text report round trips") {
    std::vector<Rect> rects{{1, 2, 3, 4}, {10, 20, 30, 40}};
    CHECK(rects_from_text(rects_to_text(rects)) == rects);
    CHECK(rects_to_text({{1, 2, 3, 4}}) == "1 2 3 4\n");
}

TEST_CASE("rect JSON report round trips") {
    std::vector<Rect> rects{{0, 0, 7, 9}, {100, 5, 120, 25}};
    CHECK(rects_from_json(rects_to_json(rects)) == rects);
    CHECK(rects_to_json({}) == "[]");
}

TEST_CASE("annotate draws black borders without touching the interior") {
    GrayImage img(30, 30, 200);
    GrayImage out = annotate(img, {{5, 5, 15, 15}}, 2);
    CHECK(out.raw(5, 5) == 0);
    CHECK(out.raw(14, 14) == 0);
    CHECK(out.raw(6, 6) == 0);       // second border ring
    CHECK(out.raw(10, 10) == 200);   // interior untouched
    CHECK(out.raw(20, 20) == 200);   // outside untouched
}
