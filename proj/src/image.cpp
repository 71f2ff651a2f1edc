#include "docauth/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace docauth {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

std::uint8_t GrayImage::quantize(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

Rect Rect::clipped(int width, int height) const {
    return {std::max(x1, 0), std::max(y1, 0), std::min(x2, width),
            std::min(y2, height)};
}

Rect rect_union(const Rect& a, const Rect& b) {
    return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
            std::max(a.y2, b.y2)};
}

int rect_gap(const Rect& a, const Rect& b) {
    int dx = std::max({a.x1 - b.x2, b.x1 - a.x2, 0});
    int dy = std::max({a.y1 - b.y2, b.y1 - a.y2, 0});
    return std::max(dx, dy);
}

long long rect_intersection_area(const Rect& a, const Rect& b) {
    long long w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    long long h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0 || h <= 0) return 0;
    return w * h;
}

double rect_iou(const Rect& a, const Rect& b) {
    long long inter = rect_intersection_area(a, b);
    if (inter == 0) return 0.0;
    long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Rect PixelSet::bounding() const {
    Rect r{positions.front().first, positions.front().second,
           positions.front().first + 1, positions.front().second + 1};
    for (const auto& [x, y] : positions) {
        r.x1 = std::min(r.x1, x);
        r.y1 = std::min(r.y1, y);
        r.x2 = std::max(r.x2, x + 1);
        r.y2 = std::max(r.y2, y + 1);
    }
    return r;
}

bool PixelSet::connected8() const {
    if (positions.empty()) return false;
    if (positions.size() == 1) return true;
    // BFS over membership.
    std::vector<std::pair<int, int>> sorted = positions;
    std::sort(sorted.begin(), sorted.end());
    auto member = [&](int x, int y) {
        return std::binary_search(sorted.begin(), sorted.end(),
                                  std::make_pair(x, y));
    };
    std::vector<std::pair<int, int>> stack{sorted.front()};
    std::vector<std::pair<int, int>> seen{sorted.front()};
    while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                std::pair<int, int> n{x + dx, y + dy};
                if (!member(n.first, n.second)) continue;
                auto it = std::lower_bound(seen.begin(), seen.end(), n);
                if (it != seen.end() && *it == n) continue;
                seen.insert(it, n);
                stack.push_back(n);
            }
        }
    }
    return seen.size() == sorted.size();
}

DifferenceMap absolute_difference(const GrayImage& d, const GrayImage& dp) {
    if (!d.same_shape(dp)) throw std::invalid_argument("shape mismatch");
    DifferenceMap m(d.width(), d.height(), 0);
    auto a = d.pixels();
    auto b = dp.pixels();
    auto out = m.pixels();
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::abs(int(a[i]) - int(b[i])));
    return m;
}

namespace {

// BFS component extraction over an arbitrary pixel mask.
std::vector<PixelSet> mask_components(const std::vector<std::uint8_t>& mask,
                                      int w, int h, int tau) {
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<PixelSet> out;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (!mask[i] || seen[i]) continue;
            PixelSet comp;
            stack.assign(1, {x, y});
            seen[i] = 1;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                comp.positions.emplace_back(cx, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (!mask[ni] || seen[ni]) continue;
                        seen[ni] = 1;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
            if (static_cast<int>(comp.positions.size()) > tau)
                out.push_back(std::move(comp));
        }
    }
    return out;
}

}  // namespace

std::vector<PixelSet> threshold_component_sets(const DifferenceMap& m,
                                               double delta, int tau) {
    if (delta <= 0.0 || delta > 1.0)
        throw std::invalid_argument("delta must be in (0,1]");
    if (tau < 0) throw std::invalid_argument("tau must be >= 0");
    // Keep pixels with intensity >= delta, computed on the raw grid so the
    // strict limit delta = 1/255 keeps exactly the nonzero pixels.
    int min_raw = static_cast<int>(std::ceil(delta * 255.0 - 1e-9));
    min_raw = std::clamp(min_raw, 1, 255);
    std::vector<std::uint8_t> mask(m.pixels().size());
    auto px = m.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) mask[i] = px[i] >= min_raw;
    return mask_components(mask, m.width(), m.height(), tau);
}

std::vector<Rect> threshold_components(const DifferenceMap& m, double delta,
                                       int tau) {
    std::vector<Rect> rects;
    for (const auto& comp : threshold_component_sets(m, delta, tau))
        rects.push_back(comp.bounding());
    return rects;
}

std::vector<Rect> locate_forgeries_ideal(const GrayImage& d,
                                         const GrayImage& dp) {
    if (!d.same_shape(dp)) throw std::invalid_argument("shape mismatch");
    const int w = d.width(), h = d.height();
    auto a = d.pixels();
    auto b = dp.pixels();

    // Two-pass union-find labeling; deliberately a different algorithm from
    // the BFS used by threshold_component_sets.
    std::vector<int> label(a.size(), -1);
    std::vector<int> parent;
    auto find_root = [&](int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    auto unite = [&](int i, int j) {
        i = find_root(i);
        j = find_root(j);
        if (i != j) parent[std::max(i, j)] = std::min(i, j);
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (a[i] == b[i]) continue;
            int best = -1;
            // Previously visited neighbours: W, NW, N, NE.
            const int nxs[4] = {x - 1, x - 1, x, x + 1};
            const int nys[4] = {y, y - 1, y - 1, y - 1};
            for (int k = 0; k < 4; ++k) {
                if (nxs[k] < 0 || nys[k] < 0 || nxs[k] >= w) continue;
                int nl = label[static_cast<std::size_t>(nys[k]) * w + nxs[k]];
                if (nl < 0) continue;
                if (best < 0)
                    best = nl;
                else
                    unite(best, nl);
            }
            if (best < 0) {
                best = static_cast<int>(parent.size());
                parent.push_back(best);
            }
            label[i] = best;
        }
    }

    std::vector<Rect> by_root(parent.size(), Rect{0, 0, -1, -1});
    std::vector<int> order(parent.size(), -1);
    std::vector<Rect> rects;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int l = label[static_cast<std::size_t>(y) * w + x];
            if (l < 0) continue;
            int r = find_root(l);
            if (order[r] < 0) {
                order[r] = static_cast<int>(rects.size());
                rects.push_back({x, y, x + 1, y + 1});
            } else {
                Rect& bb = rects[order[r]];
                bb.x1 = std::min(bb.x1, x);
                bb.y1 = std::min(bb.y1, y);
                bb.x2 = std::max(bb.x2, x + 1);
                bb.y2 = std::max(bb.y2, y + 1);
            }
        }
    }
    return rects;
}

std::vector<Rect> merge_nearby_rects(std::vector<Rect> rects, int gap) {
    if (gap < 0) throw std::invalid_argument("gap must be >= 0");
    std::sort(rects.begin(), rects.end());
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < rects.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < rects.size() && !changed; ++j) {
                if (rect_gap(rects[i], rects[j]) <= gap) {
                    rects[i] = rect_union(rects[i], rects[j]);
                    rects.erase(rects.begin() + j);
                    changed = true;
                }
            }
        }
    }
    std::sort(rects.begin(), rects.end());
    return rects;
}

GrayImage crop(const GrayImage& img, const Rect& r) {
    if (!r.valid() || r.x1 < 0 || r.y1 < 0 || r.x2 > img.width() ||
        r.y2 > img.height())
        throw std::invalid_argument("crop rect out of bounds");
    GrayImage out(r.width(), r.height());
    for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x)
            out.set_raw(x, y, img.raw(r.x1 + x, r.y1 + y));
    return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma <= 0.05) return img;
    int radius = std::max(1, static_cast<int>(std::ceil(sigma * 3)));
    std::vector<float> kernel(2 * radius + 1);
    float sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] =
            static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
        sum += kernel[i + radius];
    }
    for (float& k : kernel) k /= sum;

    const int w = img.width(), h = img.height();
    std::vector<float> tmp(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row =
            img.pixels().data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            float acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * row[std::clamp(x + i, 0, w - 1)];
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] *
                       tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) *
                               w +
                           x];
            out.set_raw(x, y, static_cast<std::uint8_t>(std::lround(acc)));
        }
    }
    return out;
}

}  // namespace docauth
