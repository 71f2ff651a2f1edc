#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "docauth/image.hpp"

namespace docauth {

// Oriented binary descriptor keypoint. Position is in level-0 (input image)
// coordinates; scale is the pyramid level's downsampling factor.
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double angle = 0.0;  // radians
    double scale = 1.0;
    double response = 0.0;
    std::array<std::uint64_t, 4> descriptor{};  // 256 bits
};

// 3x3 projective transform, row-major, normalized so m[8] == 1 when nonzero.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    static Homography translation(double dx, double dy);
    static Homography from_array(const std::array<double, 9>& values);

    // Maps (x, y); returns false when the point goes to infinity.
    bool apply(double x, double y, double& ox, double& oy) const;
    Homography inverse() const;
    Homography compose(const Homography& rhs) const;  // this ∘ rhs
    double det() const;
    bool invertible() const;
};

struct Match {
    int src_index = 0;
    int dst_index = 0;
    int distance = 0;  // Hamming
};
using MatchSet = std::vector<Match>;

struct PointPair {
    double src_x = 0.0;
    double src_y = 0.0;
    double dst_x = 0.0;
    double dst_y = 0.0;
};

struct GeometryConfig {
    int max_features = 2500;
    double ratio = 0.75;
    double reproj_tol = 3.0;
    int min_inliers = 10;
    int min_inliers_local = 6;
    int ransac_iters = 2000;
    std::uint64_t seed = 7;
};

// Corner detection over a small image pyramid, strongest responses first.
// Deterministic for a fixed input. Throws std::invalid_argument
// ("insufficient content") when the shorter side is below 32 px.
std::vector<Keypoint> detect_features(const GrayImage& img, int max_count);

// Nearest-neighbour Hamming matching with a ratio test and symmetric
// cross-check; resulting matches are one-to-one. Throws
// std::invalid_argument("no features") when either side is empty.
MatchSet match_features(const std::vector<Keypoint>& a,
                        const std::vector<Keypoint>& b, double ratio);

// Normalized DLT least-squares fit over all given correspondences (>= 4).
std::optional<Homography> fit_homography(
    const std::vector<PointPair>& correspondences);

// RANSAC + normalized DLT. Returns nullopt when fewer than min_inliers
// correspondences fit within reproj_tol.
std::optional<Homography> estimate_homography(
    const std::vector<PointPair>& correspondences, double reproj_tol,
    int min_inliers, int max_iters, std::mt19937_64& rng);

// In-plane rotation of the polar factor of the upper-left 2x2 block, in
// degrees within (-180, 180]. Throws std::invalid_argument
// ("degenerate transform") when that block is singular or reflecting.
double rotation_angle(const Homography& h);

// Inverse-mapped resampling with bilinear interpolation. H maps source
// coordinates to output coordinates; pixels that map outside the source are
// white (1.0). Throws std::invalid_argument on a non-invertible H.
GrayImage warp(const GrayImage& img, const Homography& h, int out_width,
               int out_height);

// Homography mapping scene coordinates onto reference coordinates, or
// nullopt when no homography reaches min_inliers or its rotation exceeds
// phi_deg.
std::optional<Homography> find_homography(const GrayImage& reference,
                                          const GrayImage& scene,
                                          double phi_deg,
                                          const GeometryConfig& cfg,
                                          int min_inliers);

// Same, against precomputed reference keypoints (a video stream reuses the
// reference side across frames).
std::optional<Homography> find_homography_against(
    const std::vector<Keypoint>& ref_kps, const GrayImage& scene,
    double phi_deg, const GeometryConfig& cfg, int min_inliers);

// The `find` primitive: aligns scene onto the reference's frame, or nullopt
// when no acceptable homography exists.
std::optional<GrayImage> find(const GrayImage& reference,
                              const GrayImage& scene, double phi_deg,
                              const GeometryConfig& cfg);

}  // namespace docauth
