#include <doctest.h>

#include <random>

#include "docauth/image.hpp"
#include "oracle.hpp"

using namespace docauth;

TEST_CASE("absolute_difference: identity gives an all-zero map") {
    std::mt19937_64 rng(1);
    GrayImage img = oracle::random_image(12, 9, rng);
    DifferenceMap m = absolute_difference(img, img);
    for (auto v : m.pixels()) CHECK(v == 0);
}

TEST_CASE("absolute_difference: extremal 1x1 pixels") {
    GrayImage a(1, 1, 0), b(1, 1, 255);
    CHECK(absolute_difference(a, b).raw(0, 0) == 255);
    CHECK(absolute_difference(b, a).raw(0, 0) == 255);
}

TEST_CASE("absolute_difference matches the per-pixel loop oracle") {
    std::mt19937_64 rng(7);
    GrayImage a = oracle::random_image(8, 8, rng);
    GrayImage b = oracle::random_image(8, 8, rng);
    CHECK(absolute_difference(a, b) == oracle::pixel_diff(a, b));
}

TEST_CASE("absolute_difference is symmetric") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        GrayImage a = oracle::random_image(17, 13, rng);
        GrayImage b = oracle::random_image(17, 13, rng);
        CHECK(absolute_difference(a, b) == absolute_difference(b, a));
    }
}

TEST_CASE("absolute_difference rejects shape mismatch") {
    GrayImage a(4, 4), b(4, 5);
    CHECK_THROWS_WITH_AS(absolute_difference(a, b), "shape mismatch",
                         std::invalid_argument);
}

TEST_CASE("threshold_components: all-zero map yields nothing") {
    DifferenceMap m(10, 10, 0);
    CHECK(threshold_components(m, 0.5, 0).empty());
    CHECK(threshold_components(m, GrayImage::kQuantum, 0).empty());
}

TEST_CASE("threshold_components: diagonal blob and strict size cut") {
    DifferenceMap m(10, 10, 0);
    // 5-pixel 8-connected diagonal at intensity 0.9.
    for (int i = 0; i < 5; ++i) m.set(2 + i, 3 + i, 0.9);

    auto rects = threshold_components(m, 0.5, 4);
    REQUIRE(rects.size() == 1);
    CHECK(rects[0] == Rect{2, 3, 7, 8});

    CHECK(threshold_components(m, 0.5, 5).empty());  // strict k > tau
}

TEST_CASE("threshold_components filters sub-tau specks, keeps the blob") {
    // Difference-map analogue of a thresholded print scan: faint noise, a
    // few strong specks, one real 6x5 region.
    DifferenceMap m(40, 40, 0);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 60; ++i)
        m.set_raw(std::uniform_int_distribution<int>(0, 39)(rng),
                  std::uniform_int_distribution<int>(0, 19)(rng), 20);
    m.set(5, 30, 0.6);
    m.set(35, 31, 0.75);
    for (int y = 25; y < 30; ++y)
        for (int x = 14; x < 20; ++x) m.set(x, y, 0.8);

    auto rects = threshold_components(m, 0.15, 10);
    REQUIRE(rects.size() == 1);
    CHECK(rects[0] == Rect{14, 25, 20, 30});
}

TEST_CASE("threshold_components agrees with the flood-fill oracle") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        DifferenceMap m(20, 16, 0);
        // Sparse salt so components vary in shape and count.
        int n = std::uniform_int_distribution<int>(5, 60)(rng);
        for (int i = 0; i < n; ++i)
            m.set_raw(std::uniform_int_distribution<int>(0, 19)(rng),
                      std::uniform_int_distribution<int>(0, 15)(rng), 200);

        int tau = std::uniform_int_distribution<int>(0, 3)(rng);
        auto rects = threshold_components(m, 0.5, tau);

        std::vector<std::vector<bool>> mask(16, std::vector<bool>(20, false));
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 20; ++x) mask[y][x] = m.raw(x, y) >= 128;
        std::vector<Rect> expected;
        for (const auto& comp : oracle::flood_components(mask))
            if (static_cast<int>(comp.size()) > tau)
                expected.push_back(oracle::bounding_of(comp));
        std::sort(expected.begin(), expected.end());
        std::sort(rects.begin(), rects.end());
        CHECK(rects == expected);
    }
}

TEST_CASE("threshold rects are minimal bounding boxes") {
    std::mt19937_64 rng(31);
    DifferenceMap m(30, 30, 0);
    for (int i = 0; i < 90; ++i)
        m.set_raw(std::uniform_int_distribution<int>(0, 29)(rng),
                  std::uniform_int_distribution<int>(0, 29)(rng), 255);
    auto comps = threshold_component_sets(m, 0.5, 2);
    CHECK(!comps.empty());
    for (const auto& comp : comps) {
        Rect r = comp.bounding();
        bool touch_left = false, touch_right = false, touch_top = false,
             touch_bottom = false;
        for (const auto& [x, y] : comp.positions) {
            touch_left |= x == r.x1;
            touch_right |= x == r.x2 - 1;
            touch_top |= y == r.y1;
            touch_bottom |= y == r.y2 - 1;
        }
        CHECK(touch_left);
        CHECK(touch_right);
        CHECK(touch_top);
        CHECK(touch_bottom);
    }
}

TEST_CASE("locate_forgeries_ideal: identical images") {
    std::mt19937_64 rng(5);
    GrayImage img = oracle::random_image(10, 10, rng);
    CHECK(locate_forgeries_ideal(img, img).empty());
}

TEST_CASE("locate_forgeries_ideal: single differing pixel") {
    GrayImage a(8, 8, 255), b(8, 8, 255);
    b.set_raw(3, 4, 254);  // one quantum is already a forgery
    auto rects = locate_forgeries_ideal(a, b);
    REQUIRE(rects.size() == 1);
    CHECK(rects[0] == Rect{3, 4, 4, 5});
}

TEST_CASE("locate_forgeries_ideal: two separated blobs") {
    GrayImage a(20, 20, 255), b = a;
    for (int i = 0; i < 3; ++i) {
        b.set_raw(2 + i, 2, 0);
        b.set_raw(14 + i, 15, 0);
    }
    auto rects = locate_forgeries_ideal(a, b);
    REQUIRE(rects.size() == 2);
    std::sort(rects.begin(), rects.end());
    CHECK(rects[0] == Rect{2, 2, 5, 3});
    CHECK(rects[1] == Rect{14, 15, 17, 16});
}

TEST_CASE("ideal locator agrees with the flood-fill oracle on random pairs") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 40; ++trial) {
        GrayImage a = oracle::random_image(14, 14, rng);
        GrayImage b = a;
        int flips = std::uniform_int_distribution<int>(0, 25)(rng);
        for (int i = 0; i < flips; ++i) {
            int x = std::uniform_int_distribution<int>(0, 13)(rng);
            int y = std::uniform_int_distribution<int>(0, 13)(rng);
            b.set_raw(x, y, static_cast<std::uint8_t>(b.raw(x, y) ^ 0x40));
        }
        auto rects = locate_forgeries_ideal(a, b);
        std::vector<Rect> expected;
        for (const auto& comp :
             oracle::flood_components(oracle::diff_mask(a, b, 1)))
            expected.push_back(oracle::bounding_of(comp));
        std::sort(rects.begin(), rects.end());
        std::sort(expected.begin(), expected.end());
        CHECK(rects == expected);
    }
}

TEST_CASE("strict-limit equivalence of the two locators") {
    // threshold_components at (delta = 1/255, tau = 0) covers exactly the
    // differing-pixel components of the ideal locator.
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 25; ++trial) {
        GrayImage a = oracle::random_image(12, 12, rng);
        GrayImage b = oracle::random_image(12, 12, rng);
        auto strict = threshold_components(absolute_difference(a, b),
                                           GrayImage::kQuantum, 0);
        auto ideal = locate_forgeries_ideal(a, b);
        std::sort(strict.begin(), strict.end());
        std::sort(ideal.begin(), ideal.end());
        CHECK(strict == ideal);
    }
}

TEST_CASE("merge_nearby_rects basic geometry") {
    Rect a{10, 10, 20, 20};
    CHECK(merge_nearby_rects({a}, 5) == std::vector<Rect>{a});

    // 5 px gap, merge at 10.
    Rect b{25, 10, 35, 20};
    CHECK(merge_nearby_rects({a, b}, 10) ==
          std::vector<Rect>{Rect{10, 10, 35, 20}});

    // 50 px gap stays apart at 10.
    Rect c{70, 10, 80, 20};
    auto kept = merge_nearby_rects({a, c}, 10);
    CHECK(kept == std::vector<Rect>{a, c});
}

TEST_CASE("merge_nearby_rects is idempotent and pairwise separated") {
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<Rect> rects;
        int n = std::uniform_int_distribution<int>(1, 12)(rng);
        for (int i = 0; i < n; ++i) {
            int x = std::uniform_int_distribution<int>(0, 90)(rng);
            int y = std::uniform_int_distribution<int>(0, 90)(rng);
            rects.push_back(
                {x, y, x + std::uniform_int_distribution<int>(1, 15)(rng),
                 y + std::uniform_int_distribution<int>(1, 15)(rng)});
        }
        int gap = std::uniform_int_distribution<int>(0, 12)(rng);
        auto once = merge_nearby_rects(rects, gap);
        CHECK(merge_nearby_rects(once, gap) == once);
        for (std::size_t i = 0; i < once.size(); ++i)
            for (std::size_t j = i + 1; j < once.size(); ++j)
                CHECK(rect_gap(once[i], once[j]) > gap);
    }
}

TEST_CASE("PixelSet connectivity check") {
    PixelSet diag{{{0, 0}, {1, 1}, {2, 2}}};
    CHECK(diag.connected8());
    PixelSet split{{{0, 0}, {5, 5}}};
    CHECK(!split.connected8());
}

TEST_CASE("rect gap and IoU") {
    CHECK(rect_gap({0, 0, 10, 10}, {15, 0, 25, 10}) == 5);
    CHECK(rect_gap({0, 0, 10, 10}, {5, 5, 25, 25}) == 0);
    CHECK(rect_iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
    CHECK(rect_iou({0, 0, 10, 10}, {5, 0, 15, 10}) ==
          doctest::Approx(1.0 / 3.0));
    CHECK(rect_iou({0, 0, 2, 2}, {10, 10, 12, 12}) == 0.0);
}
