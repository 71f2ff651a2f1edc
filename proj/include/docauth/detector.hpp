#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "docauth/geometry.hpp"
#include "docauth/image.hpp"

namespace docauth {

// Tolerance contract carried in the QR payload and consumed per frame.
struct DetectionParams {
    int tau = 15;           // component-size threshold, pixels
    double delta = 0.35;    // intensity threshold in (0,1]
    double phi_deg = 30.0;  // rotation bound, degrees
    int sigma_w = 80;       // refinement neighborhood, pixels
    int sigma_h = 80;
    int k = 3;              // coherence frame count
    int max_rounds = 2;     // refinement round cap

    void validate() const;  // throws std::invalid_argument
};

// Verifier-side knobs that are not part of the payload contract.
struct DetectorConfig {
    int merge_gap = 10;      // rect merge distance at reference resolution
    int report_padding = 8;  // grow reported rects for visibility
    // Matched band-limiting of both comparison sides; the born-digital
    // reference is crisper than any camera frame, so both images are blurred
    // identically before differencing.
    double comparison_blur_sigma = 1.2;
    bool fixed_point = false;  // iterate refinement to a fixed point
    GeometryConfig geometry;
};

enum class FrameStatus { Authentic, Forged, NotFound };

struct FrameVerdict {
    FrameStatus status = FrameStatus::Authentic;
    std::vector<Rect> differences;  // reference coordinates
    int rounds_used = 0;
};

struct VideoVerdict {
    FrameVerdict final;
    int frames_analyzed = 0;
    bool converged = false;
};

// Pull-based ordered frame source; returns nullopt when exhausted.
using FrameStream = std::function<std::optional<GrayImage>()>;

FrameStream frame_stream_from(std::vector<GrayImage> frames);

// Illumination normalization: divides by a large-kernel background estimate,
// then applies a mild contrast stretch. Idempotent within a small tolerance.
GrayImage preprocess(const GrayImage& img);

// absolute_difference -> threshold_components(delta, tau) -> merge.
std::vector<Rect> get_differences(const GrayImage& d, const GrayImage& dp,
                                  const DetectionParams& params,
                                  int merge_gap = 10);

// The sigma-neighborhood of a candidate rect: the rect grown to at least
// sigma_w x sigma_h, centered, clipped to the image bounds.
Rect sigma_neighborhood(const Rect& r, int sigma_w, int sigma_h, int width,
                        int height);

// Reference-side state reused across the frames of one video: keypoints for
// global alignment and the band-limited comparison copy.
struct PreparedReference {
    PreparedReference(const GrayImage& reference, const DetectionParams& params,
                      const DetectorConfig& cfg);
    GrayImage image;
    GrayImage comparison;  // blurred by comparison_blur_sigma
    std::vector<Keypoint> keypoints;
};

// Single-frame iterative comparison: global alignment, preprocessing, and
// per-rect local re-alignment until a fixed point or max_rounds.
FrameVerdict compare_frame(const GrayImage& reference, const GrayImage& frame,
                           const DetectionParams& params,
                           const DetectorConfig& cfg = {});
FrameVerdict compare_frame(const PreparedReference& reference,
                           const GrayImage& frame,
                           const DetectionParams& params,
                           const DetectorConfig& cfg = {});

// True iff the lists have equal size and admit a perfect matching with
// pairwise IoU >= 0.5.
bool rect_results_equal(const std::vector<Rect>& a,
                        const std::vector<Rect>& b);

bool verdicts_equal(const FrameVerdict& a, const FrameVerdict& b);

// Runs compare_frame over the stream and stops at the first window of k
// consecutive equal verdicts. Without coherence, reports the modal verdict
// of the last k frames with converged = false. Throws on an empty stream.
VideoVerdict analyze_video(const GrayImage& reference, FrameStream frames,
                           const DetectionParams& params,
                           const DetectorConfig& cfg = {});

}  // namespace docauth
