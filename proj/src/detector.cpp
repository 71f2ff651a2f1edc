#include "docauth/detector.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace docauth {

void DetectionParams::validate() const {
    if (tau < 0) throw std::invalid_argument("tau must be >= 0");
    if (delta <= 0.0 || delta > 1.0)
        throw std::invalid_argument("delta must be in (0,1]");
    if (phi_deg <= 0.0 || phi_deg > 180.0)
        throw std::invalid_argument("phi must be in (0,180]");
    if (sigma_w <= 0 || sigma_h <= 0)
        throw std::invalid_argument("sigma dims must be positive");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
}

FrameStream frame_stream_from(std::vector<GrayImage> frames) {
    auto shared = std::make_shared<std::vector<GrayImage>>(std::move(frames));
    auto index = std::make_shared<std::size_t>(0);
    return [shared, index]() -> std::optional<GrayImage> {
        if (*index >= shared->size()) return std::nullopt;
        return (*shared)[(*index)++];
    };
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

namespace {

// 1D sliding maximum (van Herk), window = 2*radius + 1, borders clamped.
void max_filter_line(const std::uint8_t* in, std::uint8_t* out, int n,
                     int stride, int radius) {
    const int k = 2 * radius + 1;
    std::vector<std::uint8_t> block_max_fwd(n), block_max_bwd(n);
    for (int i = 0; i < n; ++i) {
        block_max_fwd[i] = (i % k == 0)
                               ? in[i * stride]
                               : std::max(block_max_fwd[i - 1], in[i * stride]);
    }
    for (int i = n - 1; i >= 0; --i) {
        bool block_end = (i % k == k - 1) || i == n - 1;
        block_max_bwd[i] = block_end
                               ? in[i * stride]
                               : std::max(block_max_bwd[i + 1], in[i * stride]);
    }
    for (int i = 0; i < n; ++i) {
        int lo = std::max(i - radius, 0);
        int hi = std::min(i + radius, n - 1);
        out[i * stride] = std::max(block_max_bwd[lo], block_max_fwd[hi]);
    }
}

GrayImage max_filter(const GrayImage& img, int radius) {
    const int w = img.width(), h = img.height();
    GrayImage tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        max_filter_line(img.pixels().data() + static_cast<std::size_t>(y) * w,
                        tmp.pixels().data() + static_cast<std::size_t>(y) * w,
                        w, 1, radius);
    for (int x = 0; x < w; ++x)
        max_filter_line(tmp.pixels().data() + x, out.pixels().data() + x, h, w,
                        radius);
    return out;
}

GrayImage box_blur(const GrayImage& img, int radius) {
    const int w = img.width(), h = img.height();
    std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1),
                                 0.0);
    for (int y = 0; y < h; ++y) {
        double row = 0;
        for (int x = 0; x < w; ++x) {
            row += img.raw(x, y);
            integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
                integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
        }
    }
    auto at = [&](int x, int y) {
        return integral[static_cast<std::size_t>(y) * (w + 1) + x];
    };
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        int y1 = std::max(y - radius, 0), y2 = std::min(y + radius, h - 1);
        for (int x = 0; x < w; ++x) {
            int x1 = std::max(x - radius, 0), x2 = std::min(x + radius, w - 1);
            double sum = at(x2 + 1, y2 + 1) - at(x1, y2 + 1) - at(x2 + 1, y1) +
                         at(x1, y1);
            double avg = sum / ((x2 - x1 + 1) * (y2 - y1 + 1));
            out.set_raw(x, y, static_cast<std::uint8_t>(std::lround(avg)));
        }
    }
    return out;
}

}  // namespace

GrayImage preprocess(const GrayImage& img) {
    const int w = img.width(), h = img.height();
    // The estimation window must out-span any solid dark structure on the
    // page, or its interior would be normalized away.
    int radius = std::max(24, std::min(w, h) / 20);

    // Background estimate: dark content removed by a max filter, then
    // smoothed. Dividing by it flattens illumination.
    GrayImage background = box_blur(max_filter(img, radius), radius);

    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double bg = background.at(x, y);
            double v = bg > GrayImage::kQuantum / 2 ? img.at(x, y) / bg : 0.0;
            // Mild fixed stretch; saturates near-white to exactly white.
            v = (std::min(v, 1.0) - 0.05) / 0.95;
            out.set(x, y, v);
        }
    }
    return out;
}

std::vector<Rect> get_differences(const GrayImage& d, const GrayImage& dp,
                                  const DetectionParams& params,
                                  int merge_gap) {
    DifferenceMap m = absolute_difference(d, dp);
    return merge_nearby_rects(threshold_components(m, params.delta,
                                                   params.tau),
                              merge_gap);
}

Rect sigma_neighborhood(const Rect& r, int sigma_w, int sigma_h, int width,
                        int height) {
    int w = std::max(r.width(), sigma_w);
    int h = std::max(r.height(), sigma_h);
    int cx = (r.x1 + r.x2) / 2;
    int cy = (r.y1 + r.y2) / 2;
    Rect out{cx - w / 2, cy - h / 2, cx - w / 2 + w, cy - h / 2 + h};
    return out.clipped(width, height);
}

// ---------------------------------------------------------------------------
// Per-frame comparison (the iterative forgery locator)
// ---------------------------------------------------------------------------

namespace {

constexpr int kMinLocalSide = 32;
// Context carried into each refinement neighborhood: candidate rects hug the
// differing pixels, but re-alignment needs surrounding structure.
constexpr int kLocalContextMargin = 36;
// Feature detection discards an 18 px descriptor border, so small crops are
// detected on a further-expanded window.
constexpr int kLocalDetectMargin = 24;

double region_mad(const GrayImage& a, const GrayImage& b, const Rect& r,
                  int dx, int dy) {
    double sum = 0;
    long long n = 0;
    for (int y = r.y1; y < r.y2; ++y) {
        for (int x = r.x1; x < r.x2; ++x) {
            int sx = x + dx, sy = y + dy;
            if (!b.in_bounds(sx, sy)) continue;
            sum += std::abs(a.at(x, y) - b.at(sx, sy));
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 1.0;
}

// Integer translation minimizing the mean absolute difference of b against a
// over rect r. Returns true when some content supports the estimate.
bool best_translation(const GrayImage& a, const GrayImage& b, const Rect& r,
                      int radius, int& out_dx, int& out_dy,
                      double& out_mad, double& zero_mad) {
    // Reject flat regions: translation against blank paper is meaningless.
    double lo = 1.0, hi = 0.0;
    for (int y = r.y1; y < r.y2; y += 2) {
        for (int x = r.x1; x < r.x2; x += 2) {
            lo = std::min(lo, a.at(x, y));
            hi = std::max(hi, a.at(x, y));
        }
    }
    if (hi - lo < 0.15) return false;

    zero_mad = region_mad(a, b, r, 0, 0);
    double best = zero_mad;
    out_dx = 0;
    out_dy = 0;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx == 0 && dy == 0) continue;
            double mad = region_mad(a, b, r, dx, dy);
            if (mad < best) {
                best = mad;
                out_dx = dx;
                out_dy = dy;
            }
        }
    }
    out_mad = best;
    return true;
}

// Subpixel offset from a 1D parabola through the cost at d-1, d, d+1.
double parabolic_offset(double before, double at, double after) {
    double denom = before - 2 * at + after;
    if (denom <= 1e-12) return 0.0;
    return std::clamp(0.5 * (before - after) / denom, -0.5, 0.5);
}

// One photometric polish pass after feature alignment: measure local
// translations of a patch grid, robust-fit a corrective homography. Catches
// the small content-dependent bias feature localization leaves behind.
std::optional<Homography> grid_refine_homography(const GrayImage& ref_cmp,
                                                 const GrayImage& aligned_cmp) {
    const int w = ref_cmp.width(), h = ref_cmp.height();
    const int patch = 64, radius = 5;
    const int cols = std::max(3, w / 220), rows = std::max(3, h / 220);
    std::vector<PointPair> pairs;
    double max_shift = 0;
    for (int gy = 0; gy < rows; ++gy) {
        for (int gx = 0; gx < cols; ++gx) {
            int cx = (w - patch) * (2 * gx + 1) / (2 * cols);
            int cy = (h - patch) * (2 * gy + 1) / (2 * rows);
            Rect r{cx, cy, cx + patch, cy + patch};
            int dx, dy;
            double mad, zero;
            if (!best_translation(ref_cmp, aligned_cmp, r, radius, dx, dy,
                                  mad, zero))
                continue;
            if (std::max(std::abs(dx), std::abs(dy)) == radius)
                continue;  // railed against the search border
            if (mad > 0.9 * zero && (dx != 0 || dy != 0)) continue;
            double sx = dx + parabolic_offset(
                                 region_mad(ref_cmp, aligned_cmp, r, dx - 1, dy),
                                 mad,
                                 region_mad(ref_cmp, aligned_cmp, r, dx + 1, dy));
            double sy = dy + parabolic_offset(
                                 region_mad(ref_cmp, aligned_cmp, r, dx, dy - 1),
                                 mad,
                                 region_mad(ref_cmp, aligned_cmp, r, dx, dy + 1));
            double px = cx + patch / 2.0, py = cy + patch / 2.0;
            pairs.push_back({px + sx, py + sy, px, py});
            max_shift = std::max(max_shift, std::hypot(sx, sy));
        }
    }
    if (pairs.size() < 10 || max_shift < 0.4) return std::nullopt;

    // Trim measurement outliers against the fit, twice.
    std::optional<Homography> fit;
    for (int round = 0; round < 3; ++round) {
        fit = fit_homography(pairs);
        if (!fit) return std::nullopt;
        std::vector<PointPair> kept;
        for (const auto& p : pairs) {
            double mx, my;
            if (!fit->apply(p.src_x, p.src_y, mx, my)) continue;
            if (std::hypot(mx - p.dst_x, my - p.dst_y) <= 1.2)
                kept.push_back(p);
        }
        if (kept.size() == pairs.size() || kept.size() < 10) break;
        pairs = std::move(kept);
    }
    return fit;
}

// Both comparison sides are pre-blurred; local re-alignment samples from the
// full aligned frame so content can be pulled in from outside the region.
std::vector<Rect> refine_regions(const GrayImage& ref_cmp,
                                 const GrayImage& aligned_cmp,
                                 const std::vector<Rect>& delta,
                                 const DetectionParams& params,
                                 const DetectorConfig& cfg) {
    const int w = ref_cmp.width(), h = ref_cmp.height();
    std::vector<Rect> next;
    for (const Rect& r : delta) {
        Rect region = sigma_neighborhood(r.expanded(kLocalContextMargin),
                                         params.sigma_w, params.sigma_h, w, h);
        if (!region.valid()) continue;
        GrayImage ref_region = crop(ref_cmp, region);

        // Candidate re-alignments: the direct crop, a feature-based local
        // homography, and a correlation translation. The photometrically
        // best one wins; a genuine forgery stays different under all three,
        // so the choice cannot hide it.
        GrayImage realigned = crop(aligned_cmp, region);
        Rect whole_region{0, 0, region.width(), region.height()};
        double best_mad = region_mad(ref_region, realigned, whole_region, 0, 0);

        Rect detect_region =
            region.expanded(kLocalDetectMargin).clipped(w, h);
        if (std::min(detect_region.width(), detect_region.height()) >=
            kMinLocalSide) {
            auto local_h = find_homography(
                crop(ref_cmp, detect_region), crop(aligned_cmp, detect_region),
                params.phi_deg, cfg.geometry, cfg.geometry.min_inliers_local);
            if (local_h) {
                Homography sampler =
                    Homography::translation(-region.x1, -region.y1)
                        .compose(Homography::translation(detect_region.x1,
                                                         detect_region.y1))
                        .compose(*local_h)
                        .compose(Homography::translation(-detect_region.x1,
                                                         -detect_region.y1));
                GrayImage candidate = warp(aligned_cmp, sampler,
                                           region.width(), region.height());
                double mad = region_mad(ref_region, candidate, whole_region,
                                        0, 0);
                if (mad < best_mad) {
                    best_mad = mad;
                    realigned = std::move(candidate);
                }
            }
        }
        {
            int dx, dy;
            double mad, zero;
            if (best_translation(ref_cmp, aligned_cmp, detect_region, 7, dx,
                                 dy, mad, zero)) {
                double sx = dx + parabolic_offset(
                                     region_mad(ref_cmp, aligned_cmp,
                                                detect_region, dx - 1, dy),
                                     mad,
                                     region_mad(ref_cmp, aligned_cmp,
                                                detect_region, dx + 1, dy));
                double sy = dy + parabolic_offset(
                                     region_mad(ref_cmp, aligned_cmp,
                                                detect_region, dx, dy - 1),
                                     mad,
                                     region_mad(ref_cmp, aligned_cmp,
                                                detect_region, dx, dy + 1));
                Homography sampler =
                    Homography::translation(-region.x1, -region.y1)
                        .compose(Homography::translation(-sx, -sy));
                GrayImage candidate = warp(aligned_cmp, sampler,
                                           region.width(), region.height());
                double cand_mad = region_mad(ref_region, candidate,
                                             whole_region, 0, 0);
                if (cand_mad < best_mad) {
                    best_mad = cand_mad;
                    realigned = std::move(candidate);
                }
            }
        }

        for (const Rect& lr :
             get_differences(ref_region, realigned, params, cfg.merge_gap)) {
            next.push_back({lr.x1 + region.x1, lr.y1 + region.y1,
                            lr.x2 + region.x1, lr.y2 + region.y1});
        }
    }
    return merge_nearby_rects(std::move(next), cfg.merge_gap);
}

}  // namespace

PreparedReference::PreparedReference(const GrayImage& reference,
                                     const DetectionParams& params,
                                     const DetectorConfig& cfg)
    : image(reference),
      comparison(gaussian_blur(reference, cfg.comparison_blur_sigma)) {
    params.validate();
    // Detect on the band-limited copy: camera frames are blurred, and
    // matching blur levels keeps corner localization consistent between the
    // two sides.
    keypoints = detect_features(comparison, cfg.geometry.max_features);
}

FrameVerdict compare_frame(const GrayImage& reference, const GrayImage& frame,
                           const DetectionParams& params,
                           const DetectorConfig& cfg) {
    return compare_frame(PreparedReference(reference, params, cfg), frame,
                         params, cfg);
}

FrameVerdict compare_frame(const PreparedReference& reference,
                           const GrayImage& frame,
                           const DetectionParams& params,
                           const DetectorConfig& cfg) {
    params.validate();
    const int ref_w = reference.image.width();
    const int ref_h = reference.image.height();
    const Rect whole{0, 0, ref_w, ref_h};

    std::optional<Homography> h;
    if (std::min(frame.width(), frame.height()) >= kMinLocalSide)
        h = find_homography_against(reference.keypoints, frame,
                                    params.phi_deg, cfg.geometry,
                                    cfg.geometry.min_inliers);
    if (!h) return {FrameStatus::NotFound, {whole}, 0};

    GrayImage aligned_cmp = gaussian_blur(
        preprocess(warp(frame, *h, ref_w, ref_h)), cfg.comparison_blur_sigma);

    // Photometric polish of the global alignment, re-warped once from the
    // original frame. Folds are not homographies, so the polish can also
    // move the compromise around; keep it only when it shrinks the
    // thresholded disagreement.
    if (auto g = grid_refine_homography(reference.comparison, aligned_cmp)) {
        Homography refined = g->compose(*h);
        if (refined.invertible()) {
            GrayImage polished = gaussian_blur(
                preprocess(warp(frame, refined, ref_w, ref_h)),
                cfg.comparison_blur_sigma);
            auto over_count = [&](const GrayImage& img) {
                long long n = 0;
                auto a = reference.comparison.pixels();
                auto b = img.pixels();
                int min_raw = static_cast<int>(
                    std::ceil(params.delta * 255.0 - 1e-9));
                for (std::size_t i = 0; i < a.size(); ++i)
                    if (std::abs(int(a[i]) - int(b[i])) >= min_raw) ++n;
                return n;
            };
            if (over_count(polished) < over_count(aligned_cmp))
                aligned_cmp = std::move(polished);
        }
    }

    std::vector<Rect> delta;
    std::vector<Rect> delta_next = get_differences(
        reference.comparison, aligned_cmp, params, cfg.merge_gap);

    int rounds = 0;
    while (delta != delta_next &&
           (cfg.fixed_point || rounds < params.max_rounds)) {
        delta = std::move(delta_next);
        delta_next = refine_regions(reference.comparison, aligned_cmp, delta,
                                    params, cfg);
        ++rounds;
    }

    FrameVerdict verdict;
    verdict.rounds_used = rounds;
    if (delta_next.empty()) {
        verdict.status = FrameStatus::Authentic;
    } else {
        verdict.status = FrameStatus::Forged;
        std::vector<Rect> reported;
        for (const Rect& r : delta_next)
            reported.push_back(
                r.expanded(cfg.report_padding).clipped(ref_w, ref_h));
        verdict.differences = merge_nearby_rects(std::move(reported), 0);
    }
    return verdict;
}

bool rect_results_equal(const std::vector<Rect>& a,
                        const std::vector<Rect>& b) {
    if (a.size() != b.size()) return false;
    if (a.empty()) return true;
    const int n = static_cast<int>(a.size());

    // Bipartite matching (Kuhn) on the IoU >= 0.5 graph.
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (rect_iou(a[i], b[j]) >= 0.5) adj[i].push_back(j);

    std::vector<int> match_b(n, -1);
    std::vector<char> used;
    std::function<bool(int)> try_match = [&](int i) {
        for (int j : adj[i]) {
            if (used[j]) continue;
            used[j] = 1;
            if (match_b[j] < 0 || try_match(match_b[j])) {
                match_b[j] = i;
                return true;
            }
        }
        return false;
    };
    int matched = 0;
    for (int i = 0; i < n; ++i) {
        used.assign(n, 0);
        if (try_match(i)) ++matched;
    }
    return matched == n;
}

bool verdicts_equal(const FrameVerdict& a, const FrameVerdict& b) {
    return a.status == b.status &&
           rect_results_equal(a.differences, b.differences);
}

VideoVerdict analyze_video(const GrayImage& reference, FrameStream frames,
                           const DetectionParams& params,
                           const DetectorConfig& cfg) {
    params.validate();
    PreparedReference prepared(reference, params, cfg);
    std::vector<FrameVerdict> window;
    int analyzed = 0;

    while (auto frame = frames()) {
        FrameVerdict v = compare_frame(prepared, *frame, params, cfg);
        ++analyzed;
        window.push_back(std::move(v));
        if (static_cast<int>(window.size()) > params.k)
            window.erase(window.begin());
        if (static_cast<int>(window.size()) == params.k) {
            bool coherent = true;
            for (std::size_t i = 1; i < window.size() && coherent; ++i)
                coherent = verdicts_equal(window[0], window[i]);
            if (coherent) return {window.back(), analyzed, true};
        }
    }
    if (analyzed == 0) throw std::invalid_argument("empty frame stream");

    // No coherence: report the modal verdict of the trailing window.
    int best = 0, best_count = -1;
    for (std::size_t i = 0; i < window.size(); ++i) {
        int count = 0;
        for (const auto& other : window)
            if (verdicts_equal(window[i], other)) ++count;
        if (count >= best_count) {
            best_count = count;
            best = static_cast<int>(i);
        }
    }
    return {window[best], analyzed, false};
}

}  // namespace docauth
