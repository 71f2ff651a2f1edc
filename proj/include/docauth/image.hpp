#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace docauth {

// Row-major 8-bit grayscale raster. Intensities live on the fixed-point grid
// {0, 1/255, ..., 1}; 0 is black, 1 is white.
class GrayImage {
public:
    static constexpr double kQuantum = 1.0 / 255.0;

    GrayImage() = default;
    GrayImage(int width, int height, std::uint8_t fill = 255);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return pixels_.empty(); }
    bool same_shape(const GrayImage& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    std::uint8_t raw(int x, int y) const { return pixels_[idx(x, y)]; }
    void set_raw(int x, int y, std::uint8_t v) { pixels_[idx(x, y)] = v; }

    // Intensity in [0,1].
    double at(int x, int y) const { return raw(x, y) * kQuantum; }
    void set(int x, int y, double v) { set_raw(x, y, quantize(v)); }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width_ && y >= 0 && y < height_;
    }

    // Clamps to [0,1] and rounds to the nearest quantum.
    static std::uint8_t quantize(double v);

    bool operator==(const GrayImage&) const = default;

private:
    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + x;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

// A difference map is shaped like its source pair and holds |d - d'|.
using DifferenceMap = GrayImage;

// Half-open pixel rectangle [x1,x2) x [y1,y2). A 1x1 rect covering pixel
// (3,4) is {3,4,4,5}.
struct Rect {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    long long area() const {
        return static_cast<long long>(width()) * height();
    }
    bool valid() const { return x1 < x2 && y1 < y2; }
    bool contains(int x, int y) const {
        return x >= x1 && x < x2 && y >= y1 && y < y2;
    }
    bool contains(const Rect& r) const {
        return r.x1 >= x1 && r.x2 <= x2 && r.y1 >= y1 && r.y2 <= y2;
    }

    Rect expanded(int pad) const {
        return {x1 - pad, y1 - pad, x2 + pad, y2 + pad};
    }
    Rect clipped(int width, int height) const;

    bool operator==(const Rect&) const = default;
    auto operator<=>(const Rect&) const = default;
};

Rect rect_union(const Rect& a, const Rect& b);

// Chebyshev distance between rect boundaries; 0 when they touch or overlap.
int rect_gap(const Rect& a, const Rect& b);

// Intersection area over union area; 0 when disjoint.
double rect_iou(const Rect& a, const Rect& b);

long long rect_intersection_area(const Rect& a, const Rect& b);

// A set of pixel positions, with its 8-connectivity testable. Two positions
// are neighbours when max(|x-x'|, |y-y'|) <= 1.
struct PixelSet {
    std::vector<std::pair<int, int>> positions;

    std::size_t size() const { return positions.size(); }
    Rect bounding() const;
    bool connected8() const;
};

// Per-pixel |d - d'|. Throws std::invalid_argument("shape mismatch") when the
// two images disagree on dimensions.
DifferenceMap absolute_difference(const GrayImage& d, const GrayImage& dp);

// 8-connected components of {p : M(p) >= delta} whose pixel count is
// strictly greater than tau, in raster order of their first pixel.
std::vector<PixelSet> threshold_component_sets(const DifferenceMap& m,
                                               double delta, int tau);

// Minimal bounding rectangles of the surviving components.
std::vector<Rect> threshold_components(const DifferenceMap& m, double delta,
                                       int tau);

// Exact locator: bounding rectangles of each maximal 8-connected set of
// positions where d and d' differ at all. Empty iff the images are identical.
std::vector<Rect> locate_forgeries_ideal(const GrayImage& d,
                                         const GrayImage& dp);

// Iteratively replaces any two rects whose boundary gap is <= gap with their
// bounding union until no such pair remains.
std::vector<Rect> merge_nearby_rects(std::vector<Rect> rects, int gap);

// Copy of the pixels under r, which must lie within the image.
GrayImage crop(const GrayImage& img, const Rect& r);

// Separable Gaussian blur with clamped borders; sigma <= 0.05 is a no-op.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

}  // namespace docauth
