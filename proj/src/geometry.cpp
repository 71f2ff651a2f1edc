#include "docauth/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace docauth {

namespace {

constexpr int kMinImageSide = 32;
constexpr int kPatchRadius = 15;
constexpr int kPatternRadius = 13;
constexpr int kBorder = 18;
constexpr int kPyramidLevels = 4;
constexpr double kPyramidFactor = 1.25;
constexpr double kSuppressionRadius = 5.0;
constexpr double kQualityRatio = 0.01;
constexpr double kResponseFloor = 1e-7;

Eigen::Matrix3d to_eigen(const Homography& h) {
    Eigen::Matrix3d m;
    m << h.m[0], h.m[1], h.m[2], h.m[3], h.m[4], h.m[5], h.m[6], h.m[7],
        h.m[8];
    return m;
}

Homography from_eigen(const Eigen::Matrix3d& m) {
    Homography h;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h.m[r * 3 + c] = m(r, c);
    if (std::abs(h.m[8]) > 1e-12) {
        for (double& v : h.m) v /= m(2, 2);
        h.m[8] = 1.0;
    }
    return h;
}

}  // namespace

Homography Homography::translation(double dx, double dy) {
    Homography h;
    h.m = {1, 0, dx, 0, 1, dy, 0, 0, 1};
    return h;
}

Homography Homography::from_array(const std::array<double, 9>& values) {
    Homography h;
    h.m = values;
    if (std::abs(h.m[8]) > 1e-12) {
        double s = h.m[8];
        for (double& v : h.m) v /= s;
    }
    return h;
}

bool Homography::apply(double x, double y, double& ox, double& oy) const {
    double w = m[6] * x + m[7] * y + m[8];
    if (std::abs(w) < 1e-12) return false;
    ox = (m[0] * x + m[1] * y + m[2]) / w;
    oy = (m[3] * x + m[4] * y + m[5]) / w;
    return true;
}

Homography Homography::inverse() const {
    Eigen::Matrix3d m = to_eigen(*this);
    if (std::abs(m.determinant()) < 1e-12)
        throw std::invalid_argument("homography not invertible");
    return from_eigen(Eigen::Matrix3d(m.inverse()));
}

Homography Homography::compose(const Homography& rhs) const {
    return from_eigen(Eigen::Matrix3d(to_eigen(*this) * to_eigen(rhs)));
}

double Homography::det() const { return to_eigen(*this).determinant(); }

bool Homography::invertible() const { return std::abs(det()) > 1e-10; }

// ---------------------------------------------------------------------------
// Feature detection
// ---------------------------------------------------------------------------

namespace {

struct PatternPoint {
    std::int8_t x1, y1, x2, y2;
};

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Fixed comparison pattern inside the patch, generated once from a pinned
// seed so descriptors are stable across runs and platforms.
const std::array<PatternPoint, 256>& brief_pattern() {
    static const std::array<PatternPoint, 256> pattern = [] {
        std::array<PatternPoint, 256> p{};
        std::uint64_t state = 0x0D0CA0711234ABCDULL;
        auto draw_point = [&](std::int8_t& x, std::int8_t& y) {
            for (;;) {
                int cx = static_cast<int>(splitmix64(state) % 27) - 13;
                int cy = static_cast<int>(splitmix64(state) % 27) - 13;
                if (cx * cx + cy * cy <= kPatternRadius * kPatternRadius) {
                    x = static_cast<std::int8_t>(cx);
                    y = static_cast<std::int8_t>(cy);
                    return;
                }
            }
        };
        for (auto& pp : p) {
            do {
                draw_point(pp.x1, pp.y1);
                draw_point(pp.x2, pp.y2);
            } while (pp.x1 == pp.x2 && pp.y1 == pp.y2);
        }
        return p;
    }();
    return pattern;
}

struct Level {
    GrayImage image;
    GrayImage smooth;  // 5x5 box blur, used for descriptor sampling
    double scale = 1.0;
};

GrayImage downsample(const GrayImage& src, double factor) {
    int w = std::max(1, static_cast<int>(std::lround(src.width() / factor)));
    int h = std::max(1, static_cast<int>(std::lround(src.height() / factor)));
    GrayImage out(w, h);
    double fx = static_cast<double>(src.width()) / w;
    double fy = static_cast<double>(src.height()) / h;
    for (int y = 0; y < h; ++y) {
        double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0,
                               static_cast<double>(src.height() - 1));
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, src.height() - 1);
        double wy = sy - y0;
        for (int x = 0; x < w; ++x) {
            double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0,
                                   static_cast<double>(src.width() - 1));
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, src.width() - 1);
            double wx = sx - x0;
            double v = (1 - wy) * ((1 - wx) * src.raw(x0, y0) +
                                   wx * src.raw(x1, y0)) +
                       wy * ((1 - wx) * src.raw(x0, y1) +
                             wx * src.raw(x1, y1));
            out.set_raw(x, y, static_cast<std::uint8_t>(std::lround(v)));
        }
    }
    return out;
}

// 5x5 box mean with clamped borders, via separable sliding sums.
GrayImage box_blur5(const GrayImage& src) {
    const int w = src.width(), h = src.height();
    auto cx = [&](int x) { return std::clamp(x, 0, w - 1); };
    auto cy = [&](int y) { return std::clamp(y, 0, h - 1); };

    std::vector<std::uint16_t> horiz(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row =
            src.pixels().data() + static_cast<std::size_t>(y) * w;
        std::uint16_t acc = 0;
        for (int k = -2; k <= 2; ++k) acc += row[cx(k)];
        std::uint16_t* out = horiz.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            out[x] = acc;
            acc = static_cast<std::uint16_t>(acc + row[cx(x + 3)] -
                                             row[cx(x - 2)]);
        }
    }
    GrayImage out(w, h);
    std::vector<std::uint32_t> acc(w, 0);
    for (int k = -2; k <= 2; ++k) {
        const std::uint16_t* row =
            horiz.data() + static_cast<std::size_t>(cy(k)) * w;
        for (int x = 0; x < w; ++x) acc[x] += row[x];
    }
    for (int y = 0; y < h; ++y) {
        std::uint8_t* dst =
            out.pixels().data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x)
            dst[x] = static_cast<std::uint8_t>((acc[x] + 12) / 25);
        const std::uint16_t* add =
            horiz.data() + static_cast<std::size_t>(cy(y + 3)) * w;
        const std::uint16_t* sub =
            horiz.data() + static_cast<std::size_t>(cy(y - 2)) * w;
        for (int x = 0; x < w; ++x) acc[x] += add[x] - sub[x];
    }
    return out;
}

std::vector<Level> build_pyramid(const GrayImage& img) {
    std::vector<Level> levels;
    levels.push_back({img, box_blur5(img), 1.0});
    for (int i = 1; i < kPyramidLevels; ++i) {
        const GrayImage& prev = levels.back().image;
        if (std::min(prev.width(), prev.height()) < 2 * kMinImageSide) break;
        GrayImage next = downsample(prev, kPyramidFactor);
        double scale = levels.back().scale * kPyramidFactor;
        GrayImage smooth = box_blur5(next);
        levels.push_back({std::move(next), std::move(smooth), scale});
    }
    return levels;
}

// Shi-Tomasi minimum-eigenvalue response over a 5x5 window, computed with
// separable sliding sums of the gradient products.
std::vector<float> corner_response(const GrayImage& img) {
    const int w = img.width(), h = img.height();
    std::vector<float> resp(static_cast<std::size_t>(w) * h, 0.f);
    if (w < 5 || h < 5) return resp;

    // Horizontal 5-sums of ixx/iyy/ixy per row.
    std::vector<float> hxx(resp.size(), 0.f), hyy(resp.size(), 0.f),
        hxy(resp.size(), 0.f);
    std::vector<float> gx(w), gy(w);
    for (int y = 1; y < h - 1; ++y) {
        const std::uint8_t* above =
            img.pixels().data() + static_cast<std::size_t>(y - 1) * w;
        const std::uint8_t* row =
            img.pixels().data() + static_cast<std::size_t>(y) * w;
        const std::uint8_t* below =
            img.pixels().data() + static_cast<std::size_t>(y + 1) * w;
        for (int x = 1; x < w - 1; ++x) {
            gx[x] = (row[x + 1] - row[x - 1]) * (0.5f / 255.f);
            gy[x] = (below[x] - above[x]) * (0.5f / 255.f);
        }
        gx[0] = gx[w - 1] = gy[0] = gy[w - 1] = 0.f;
        float axx = 0, ayy = 0, axy = 0;
        for (int k = 0; k < 4; ++k) {
            axx += gx[k] * gx[k];
            ayy += gy[k] * gy[k];
            axy += gx[k] * gy[k];
        }
        std::size_t base = static_cast<std::size_t>(y) * w;
        for (int x = 2; x < w - 2; ++x) {
            axx += gx[x + 2] * gx[x + 2];
            ayy += gy[x + 2] * gy[x + 2];
            axy += gx[x + 2] * gy[x + 2];
            hxx[base + x] = axx;
            hyy[base + x] = ayy;
            hxy[base + x] = axy;
            axx -= gx[x - 2] * gx[x - 2];
            ayy -= gy[x - 2] * gy[x - 2];
            axy -= gx[x - 2] * gy[x - 2];
        }
    }

    // Vertical 5-sums and the min-eigenvalue response.
    std::vector<float> vxx(w, 0.f), vyy(w, 0.f), vxy(w, 0.f);
    for (int yy = 0; yy < 5 && yy < h; ++yy) {
        std::size_t base = static_cast<std::size_t>(yy) * w;
        for (int x = 0; x < w; ++x) {
            vxx[x] += hxx[base + x];
            vyy[x] += hyy[base + x];
            vxy[x] += hxy[base + x];
        }
    }
    for (int y = 2; y < h - 2; ++y) {
        std::size_t base = static_cast<std::size_t>(y) * w;
        for (int x = 2; x < w - 2; ++x) {
            float a = vxx[x], b = vyy[x], c = vxy[x];
            float d = std::sqrt((a - b) * (a - b) + 4.0f * c * c);
            resp[base + x] = 0.5f * (a + b - d);
        }
        if (y + 3 < h) {
            std::size_t add = static_cast<std::size_t>(y + 3) * w;
            std::size_t sub = static_cast<std::size_t>(y - 2) * w;
            for (int x = 0; x < w; ++x) {
                vxx[x] += hxx[add + x] - hxx[sub + x];
                vyy[x] += hyy[add + x] - hyy[sub + x];
                vxy[x] += hxy[add + x] - hxy[sub + x];
            }
        }
    }
    return resp;
}

struct Candidate {
    int x, y, level;
    float response;
};

// Orientation from the ink-weighted centroid of the patch; documents are
// dark content on a light background, so weight by darkness.
double patch_orientation(const GrayImage& img, int cx, int cy) {
    double m10 = 0.0, m01 = 0.0;
    for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy) {
        for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
            if (dx * dx + dy * dy > kPatchRadius * kPatchRadius) continue;
            double wgt = (255 - img.raw(cx + dx, cy + dy)) / 255.0;
            m10 += dx * wgt;
            m01 += dy * wgt;
        }
    }
    if (std::abs(m10) < 1e-9 && std::abs(m01) < 1e-9) return 0.0;
    return std::atan2(m01, m10);
}

std::array<std::uint64_t, 4> describe(const GrayImage& smooth, int cx, int cy,
                                      double angle) {
    const auto& pattern = brief_pattern();
    double cs = std::cos(angle), sn = std::sin(angle);
    std::array<std::uint64_t, 4> desc{};
    for (int i = 0; i < 256; ++i) {
        const auto& pp = pattern[i];
        int ax = cx + static_cast<int>(std::lround(cs * pp.x1 - sn * pp.y1));
        int ay = cy + static_cast<int>(std::lround(sn * pp.x1 + cs * pp.y1));
        int bx = cx + static_cast<int>(std::lround(cs * pp.x2 - sn * pp.y2));
        int by = cy + static_cast<int>(std::lround(sn * pp.x2 + cs * pp.y2));
        if (smooth.raw(ax, ay) < smooth.raw(bx, by))
            desc[i >> 6] |= std::uint64_t{1} << (i & 63);
    }
    return desc;
}

}  // namespace

std::vector<Keypoint> detect_features(const GrayImage& img, int max_count) {
    if (std::min(img.width(), img.height()) < kMinImageSide)
        throw std::invalid_argument("insufficient content");
    if (max_count <= 0) throw std::invalid_argument("max_count must be > 0");

    std::vector<Level> levels = build_pyramid(img);
    std::vector<Candidate> candidates;

    for (int li = 0; li < static_cast<int>(levels.size()); ++li) {
        const GrayImage& im = levels[li].image;
        const int w = im.width(), h = im.height();
        std::vector<float> resp = corner_response(im);
        float max_resp = 0.f;
        for (float r : resp) max_resp = std::max(max_resp, r);
        float floor = std::max(static_cast<float>(kQualityRatio) * max_resp,
                               static_cast<float>(kResponseFloor));
        for (int y = kBorder; y < h - kBorder; ++y) {
            for (int x = kBorder; x < w - kBorder; ++x) {
                float r = resp[static_cast<std::size_t>(y) * w + x];
                if (r < floor) continue;
                bool peak = true;
                for (int dy = -1; dy <= 1 && peak; ++dy)
                    for (int dx = -1; dx <= 1 && peak; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        float n =
                            resp[static_cast<std::size_t>(y + dy) * w + x + dx];
                        // Strict on later pixels, non-strict on earlier ones,
                        // so plateau points keep exactly one representative.
                        if (dy > 0 || (dy == 0 && dx > 0))
                            peak = r > n;
                        else
                            peak = r >= n;
                    }
                if (peak) candidates.push_back({x, y, li, r});
            }
        }
    }

    auto stronger = [](const Candidate& a, const Candidate& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.level != b.level) return a.level < b.level;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    };
    // Only the strongest few multiples of max_count can survive suppression.
    std::size_t cap = static_cast<std::size_t>(max_count) * 4;
    if (candidates.size() > cap) {
        std::nth_element(candidates.begin(), candidates.begin() + cap,
                         candidates.end(), stronger);
        candidates.resize(cap);
    }
    std::sort(candidates.begin(), candidates.end(), stronger);

    // Greedy spatial suppression in level-0 coordinates over a bucket grid.
    struct Accepted {
        double x, y;
        int cand;
    };
    std::vector<Accepted> accepted;
    const double cell = kSuppressionRadius;
    const int grid_w =
        static_cast<int>(img.width() / cell) + 2;
    const int grid_h = static_cast<int>(img.height() / cell) + 2;
    std::vector<std::vector<int>> grid(
        static_cast<std::size_t>(grid_w) * grid_h);
    auto too_close = [&](double x, double y) {
        int cx = static_cast<int>(x / cell), cy = static_cast<int>(y / cell);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int gx = cx + dx, gy = cy + dy;
                if (gx < 0 || gy < 0 || gx >= grid_w || gy >= grid_h)
                    continue;
                for (int ai : grid[static_cast<std::size_t>(gy) * grid_w + gx]) {
                    double ddx = accepted[ai].x - x, ddy = accepted[ai].y - y;
                    if (ddx * ddx + ddy * ddy <
                        kSuppressionRadius * kSuppressionRadius)
                        return true;
                }
            }
        }
        return false;
    };
    for (int ci = 0; ci < static_cast<int>(candidates.size()) &&
                     static_cast<int>(accepted.size()) < max_count;
         ++ci) {
        const Candidate& c = candidates[ci];
        // Pixel-center mapping between pyramid levels.
        double x0 = (c.x + 0.5) * levels[c.level].scale - 0.5;
        double y0 = (c.y + 0.5) * levels[c.level].scale - 0.5;
        if (too_close(x0, y0)) continue;
        int gx = static_cast<int>(x0 / cell), gy = static_cast<int>(y0 / cell);
        grid[static_cast<std::size_t>(gy) * grid_w + gx].push_back(
            static_cast<int>(accepted.size()));
        accepted.push_back({x0, y0, ci});
    }

    std::vector<Keypoint> keypoints;
    keypoints.reserve(accepted.size());
    for (const auto& a : accepted) {
        const Candidate& c = candidates[a.cand];
        const Level& lv = levels[c.level];
        Keypoint kp;
        kp.x = a.x;
        kp.y = a.y;
        kp.scale = lv.scale;
        kp.response = c.response;
        kp.angle = patch_orientation(lv.image, c.x, c.y);
        kp.descriptor = describe(lv.smooth, c.x, c.y, kp.angle);
        keypoints.push_back(kp);
    }
    return keypoints;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

namespace {

int hamming(const std::array<std::uint64_t, 4>& a,
            const std::array<std::uint64_t, 4>& b) {
    int d = 0;
    for (int i = 0; i < 4; ++i)
        d += __builtin_popcountll(a[i] ^ b[i]);
    return d;
}

}  // namespace

MatchSet match_features(const std::vector<Keypoint>& a,
                        const std::vector<Keypoint>& b, double ratio) {
    if (a.empty() || b.empty()) throw std::invalid_argument("no features");
    if (ratio <= 0.0 || ratio >= 1.0)
        throw std::invalid_argument("ratio must be in (0,1)");

    // Backward nearest neighbours for the cross-check.
    std::vector<int> backward(b.size(), -1);
    for (std::size_t j = 0; j < b.size(); ++j) {
        int best = 256 + 1, best_i = -1;
        for (std::size_t i = 0; i < a.size(); ++i) {
            int d = hamming(a[i].descriptor, b[j].descriptor);
            if (d < best) {
                best = d;
                best_i = static_cast<int>(i);
            }
        }
        backward[j] = best_i;
    }

    MatchSet matches;
    for (std::size_t i = 0; i < a.size(); ++i) {
        int best = 256 + 1, second = 256 + 1, best_j = -1;
        for (std::size_t j = 0; j < b.size(); ++j) {
            int d = hamming(a[i].descriptor, b[j].descriptor);
            if (d < best) {
                second = best;
                best = d;
                best_j = static_cast<int>(j);
            } else if (d < second) {
                second = d;
            }
        }
        if (best_j < 0) continue;
        if (second <= 256 && !(best < ratio * second)) continue;
        if (backward[best_j] != static_cast<int>(i)) continue;
        matches.push_back({static_cast<int>(i), best_j, best});
    }
    return matches;
}

// ---------------------------------------------------------------------------
// Homography estimation
// ---------------------------------------------------------------------------

namespace {

struct Normalization {
    double cx = 0, cy = 0, scale = 1;
    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d t;
        t << scale, 0, -scale * cx, 0, scale, -scale * cy, 0, 0, 1;
        return t;
    }
};

Normalization normalize_points(const std::vector<Eigen::Vector2d>& pts) {
    Normalization n;
    for (const auto& p : pts) {
        n.cx += p.x();
        n.cy += p.y();
    }
    n.cx /= pts.size();
    n.cy /= pts.size();
    double mean_dist = 0;
    for (const auto& p : pts)
        mean_dist += std::hypot(p.x() - n.cx, p.y() - n.cy);
    mean_dist /= pts.size();
    n.scale = mean_dist > 1e-12 ? std::numbers::sqrt2 / mean_dist : 1.0;
    return n;
}

std::optional<Eigen::Matrix3d> dlt(const std::vector<PointPair>& pairs,
                                   const std::vector<int>& idx) {
    std::vector<Eigen::Vector2d> src, dst;
    src.reserve(idx.size());
    dst.reserve(idx.size());
    for (int i : idx) {
        src.emplace_back(pairs[i].src_x, pairs[i].src_y);
        dst.emplace_back(pairs[i].dst_x, pairs[i].dst_y);
    }
    Normalization ns = normalize_points(src), nd = normalize_points(dst);

    Eigen::MatrixXd A(2 * idx.size(), 9);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        double x = ns.scale * (src[k].x() - ns.cx);
        double y = ns.scale * (src[k].y() - ns.cy);
        double u = nd.scale * (dst[k].x() - nd.cx);
        double v = nd.scale * (dst[k].y() - nd.cy);
        A.row(2 * k) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        A.row(2 * k + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    Eigen::VectorXd hvec = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6),
        hvec(7), hvec(8);
    Eigen::Matrix3d h = nd.matrix().inverse() * hn * ns.matrix();
    if (!h.allFinite() || std::abs(h.determinant()) < 1e-12)
        return std::nullopt;
    return h;
}

bool degenerate_sample(const std::vector<PointPair>& pairs,
                       const std::vector<int>& idx) {
    auto area2 = [](double ax, double ay, double bx, double by, double cx,
                    double cy) {
        return std::abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax));
    };
    for (int skip = 0; skip < 4; ++skip) {
        double sx[3], sy[3], dx[3], dy[3];
        int k = 0;
        for (int i = 0; i < 4; ++i) {
            if (i == skip) continue;
            sx[k] = pairs[idx[i]].src_x;
            sy[k] = pairs[idx[i]].src_y;
            dx[k] = pairs[idx[i]].dst_x;
            dy[k] = pairs[idx[i]].dst_y;
            ++k;
        }
        if (area2(sx[0], sy[0], sx[1], sy[1], sx[2], sy[2]) < 1.0) return true;
        if (area2(dx[0], dy[0], dx[1], dy[1], dx[2], dy[2]) < 1.0) return true;
    }
    return false;
}

int count_inliers(const Eigen::Matrix3d& h, const std::vector<PointPair>& pairs,
                  double tol, std::vector<int>* inliers, double* total_err) {
    int count = 0;
    double err_sum = 0;
    double tol2 = tol * tol;
    if (inliers) inliers->clear();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Eigen::Vector3d p = h * Eigen::Vector3d(pairs[i].src_x, pairs[i].src_y,
                                                1.0);
        if (std::abs(p.z()) < 1e-12) continue;
        double dx = p.x() / p.z() - pairs[i].dst_x;
        double dy = p.y() / p.z() - pairs[i].dst_y;
        double e2 = dx * dx + dy * dy;
        if (e2 <= tol2) {
            ++count;
            err_sum += e2;
            if (inliers) inliers->push_back(static_cast<int>(i));
        }
    }
    if (total_err) *total_err = err_sum;
    return count;
}

}  // namespace

std::optional<Homography> fit_homography(
    const std::vector<PointPair>& correspondences) {
    if (correspondences.size() < 4) return std::nullopt;
    std::vector<int> idx(correspondences.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    auto h = dlt(correspondences, idx);
    if (!h) return std::nullopt;
    Homography out = from_eigen(*h);
    if (!out.invertible()) return std::nullopt;
    return out;
}

std::optional<Homography> estimate_homography(
    const std::vector<PointPair>& correspondences, double reproj_tol,
    int min_inliers, int max_iters, std::mt19937_64& rng) {
    const int n = static_cast<int>(correspondences.size());
    if (n < 4 || min_inliers < 4) return std::nullopt;

    Eigen::Matrix3d best_h = Eigen::Matrix3d::Identity();
    int best_count = 0;
    double best_err = 0;
    bool have_best = false;

    std::uniform_int_distribution<int> pick(0, n - 1);
    int needed = max_iters;
    for (int iter = 0; iter < needed && iter < max_iters; ++iter) {
        std::vector<int> idx;
        while (static_cast<int>(idx.size()) < 4) {
            int c = pick(rng);
            if (std::find(idx.begin(), idx.end(), c) == idx.end())
                idx.push_back(c);
        }
        if (degenerate_sample(correspondences, idx)) continue;
        auto h = dlt(correspondences, idx);
        if (!h) continue;
        double err = 0;
        int count = count_inliers(*h, correspondences, reproj_tol, nullptr,
                                  &err);
        if (count > best_count || (count == best_count && err < best_err)) {
            best_count = count;
            best_err = err;
            best_h = *h;
            have_best = true;
            // Adaptive stopping: enough iterations for 99.9% confidence.
            double w = static_cast<double>(count) / n;
            double denom = std::log(std::max(1e-12, 1.0 - w * w * w * w));
            if (denom < 0) {
                double est = std::ceil(std::log(1e-3) / denom);
                if (est >= max_iters)
                    needed = max_iters;
                else
                    needed = std::clamp(static_cast<int>(est), iter + 1,
                                        max_iters);
            }
        }
    }
    if (!have_best || best_count < min_inliers) return std::nullopt;

    // Refit on the inlier set, twice.
    std::vector<int> inliers;
    count_inliers(best_h, correspondences, reproj_tol, &inliers, nullptr);
    for (int round = 0; round < 2; ++round) {
        if (static_cast<int>(inliers.size()) < 4) break;
        auto h = dlt(correspondences, inliers);
        if (!h) break;
        std::vector<int> next;
        double err = 0;
        int count = count_inliers(*h, correspondences, reproj_tol, &next,
                                  &err);
        if (count < best_count) break;
        best_h = *h;
        best_count = count;
        inliers = std::move(next);
    }
    if (best_count < min_inliers) return std::nullopt;

    Homography h = from_eigen(best_h);
    if (!h.invertible()) return std::nullopt;
    return h;
}

double rotation_angle(const Homography& h) {
    double a = h.m[0], b = h.m[1], c = h.m[3], d = h.m[4];
    if (std::abs(h.m[8]) > 1e-12 && h.m[8] != 1.0) {
        a /= h.m[8];
        b /= h.m[8];
        c /= h.m[8];
        d /= h.m[8];
    }
    double det = a * d - b * c;
    if (!(det > 1e-12)) throw std::invalid_argument("degenerate transform");
    // Polar factor of [[a,b],[c,d]]: exact for det > 0.
    double theta = std::atan2(c - b, a + d);
    double deg = theta * 180.0 / std::numbers::pi;
    if (deg <= -180.0) deg += 360.0;
    return deg;
}

GrayImage warp(const GrayImage& img, const Homography& h, int out_width,
               int out_height) {
    if (!h.invertible())
        throw std::invalid_argument("homography not invertible");
    Homography hinv = h.inverse();
    GrayImage out(out_width, out_height, 255);
    const int w = img.width(), hgt = img.height();
    const std::uint8_t* src = img.pixels().data();
    const auto& m = hinv.m;
    for (int y = 0; y < out_height; ++y) {
        // The source coordinates are rational linear in x along a row.
        double nx = m[1] * y + m[2];
        double ny = m[4] * y + m[5];
        double nd = m[7] * y + m[8];
        std::uint8_t* dst =
            out.pixels().data() + static_cast<std::size_t>(y) * out_width;
        for (int x = 0; x < out_width;
             ++x, nx += m[0], ny += m[3], nd += m[6]) {
            if (std::abs(nd) < 1e-12) continue;  // stays white
            double sx = nx / nd, sy = ny / nd;
            if (sx < 0.0 || sy < 0.0 || sx > w - 1.0 || sy > hgt - 1.0)
                continue;
            int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, hgt - 1);
            double fx = sx - x0, fy = sy - y0;
            const std::uint8_t* r0 = src + static_cast<std::size_t>(y0) * w;
            const std::uint8_t* r1 = src + static_cast<std::size_t>(y1) * w;
            double v = (1 - fy) * ((1 - fx) * r0[x0] + fx * r0[x1]) +
                       fy * ((1 - fx) * r1[x0] + fx * r1[x1]);
            dst[x] = static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return out;
}

std::optional<Homography> find_homography_against(
    const std::vector<Keypoint>& ref_kps, const GrayImage& scene,
    double phi_deg, const GeometryConfig& cfg, int min_inliers) {
    if (std::min(scene.width(), scene.height()) < kMinImageSide)
        return std::nullopt;
    std::vector<Keypoint> scene_kps = detect_features(scene,
                                                      cfg.max_features);
    if (ref_kps.size() < 4 || scene_kps.size() < 4) return std::nullopt;

    MatchSet matches = match_features(scene_kps, ref_kps, cfg.ratio);
    if (static_cast<int>(matches.size()) < 4) return std::nullopt;

    std::vector<PointPair> pairs;
    pairs.reserve(matches.size());
    for (const Match& m : matches)
        pairs.push_back({scene_kps[m.src_index].x, scene_kps[m.src_index].y,
                         ref_kps[m.dst_index].x, ref_kps[m.dst_index].y});

    std::mt19937_64 rng(cfg.seed);
    auto h = estimate_homography(pairs, cfg.reproj_tol, min_inliers,
                                 cfg.ransac_iters, rng);
    if (!h) return std::nullopt;

    try {
        if (std::abs(rotation_angle(*h)) > phi_deg) return std::nullopt;
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    return h;
}

std::optional<Homography> find_homography(const GrayImage& reference,
                                          const GrayImage& scene,
                                          double phi_deg,
                                          const GeometryConfig& cfg,
                                          int min_inliers) {
    if (std::min(reference.width(), reference.height()) < kMinImageSide ||
        std::min(scene.width(), scene.height()) < kMinImageSide)
        return std::nullopt;
    return find_homography_against(detect_features(reference,
                                                   cfg.max_features),
                                   scene, phi_deg, cfg, min_inliers);
}

std::optional<GrayImage> find(const GrayImage& reference,
                              const GrayImage& scene, double phi_deg,
                              const GeometryConfig& cfg) {
    auto h = find_homography(reference, scene, phi_deg, cfg, cfg.min_inliers);
    if (!h) return std::nullopt;
    return warp(scene, *h, reference.width(), reference.height());
}

}  // namespace docauth
