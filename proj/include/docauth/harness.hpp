#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "docauth/detector.hpp"
#include "docauth/image.hpp"

namespace docauth::bench {

constexpr int kDocWidth = 1700;
constexpr int kDocHeight = 2200;
constexpr int kDocMargin = 100;

enum class PrimitiveKind {
    Glyph,       // pseudo-text glyph cell
    DigitGlyph,  // number-like glyph cell
    SignBar,     // minus-like bar before a digit run
    SignBarSlot, // empty space reserved for a sign bar
    Stroke,      // signature or chart polyline
    Box,         // filled or outlined rectangle
};

struct Primitive {
    PrimitiveKind kind;
    Rect rect;
};

// Deterministic procedural document raster plus the layout bookkeeping the
// forgery injector needs.
struct SyntheticDoc {
    GrayImage image;
    std::vector<Primitive> primitives;
    std::uint64_t seed = 0;
    int template_id = 1;
};

// Four template families: business letter, quarterly results (tables and
// charts), dense column-glyph letter, prescription-style form.
SyntheticDoc generate_document(std::uint64_t seed, int template_id);

enum class ForgeryKind {
    AddGlyph,
    RemoveGlyph,
    MutateDigit,
    FlipSign,
    AlterStroke,
};

std::string to_string(ForgeryKind kind);

struct ForgerySpec {
    ForgeryKind kind;
    Rect ground_truth;  // minimal bounding box of every changed pixel
    int magnitude = 0;  // changed pixel count
};

struct ForgedDoc {
    GrayImage image;
    ForgerySpec spec;
};

// Applies a single semantic change whose connected changed-pixel set exceeds
// tau. requested_magnitude <= tau (when nonzero) is refused since the result
// would be undetectable by contract. Throws std::runtime_error
// ("no compatible primitive") when the document lacks a target for the kind.
ForgedDoc inject_forgery(const SyntheticDoc& doc, ForgeryKind kind,
                         std::mt19937_64& rng, int tau = 15,
                         int requested_magnitude = 0);

enum class FoldMode { None, Half, Thirds };

struct DistortionProfile {
    std::string name = "flat";
    double perspective = 0.02;   // base corner jitter, fraction of width
    FoldMode fold = FoldMode::None;
    double lighting = 0.2;       // max multiplicative darkening
    double blur_sigma = 1.0;     // pixels
    double noise = 0.015;        // additive noise amplitude
    double jitter = 0.005;       // per-frame corner jitter fraction
};

// The four evaluation presets (standing in for the four capture devices).
std::vector<DistortionProfile> standard_profiles();

// Deterministic distorted frame source. Every frame is
// warp(fold(light(blur(noise(doc))))) with per-frame pose jitter; the
// reference->frame mapping is retained for diagnostics.
class DistortedVideo {
public:
    DistortedVideo(GrayImage document, DistortionProfile profile,
                   std::uint64_t seed);

    GrayImage frame(int index) const;
    FrameStream stream(int max_frames) const;
    Rect map_rect_to_frame(const Rect& r, int index) const;
    const DistortionProfile& profile() const { return profile_; }

private:
    GrayImage document_;
    DistortionProfile profile_;
    std::uint64_t seed_ = 0;
    // Per-video draws (fold geometry, base perspective, light direction).
    // The fold is a continuous piecewise-linear map: each band between
    // creases is vertically foreshortened (scale) and slightly sheared,
    // anchored so the sheet never tears.
    std::vector<int> creases_;
    std::vector<double> band_scales_;
    std::vector<double> band_shears_;
    std::array<double, 8> base_corners_{};
    double light_gx_ = 0, light_gy_ = 0;

    Homography frame_homography(int index) const;
    void fold_point(double x, double y, double& ox, double& oy) const;
    double fold_y_inverse(double y_out) const;
    double fold_shear_at(double y_in) const;
};

std::vector<GrayImage> distort(const GrayImage& d,
                               const DistortionProfile& profile, int n_frames,
                               std::uint64_t seed);

// Transient bright disc, for frame-coherence experiments.
GrayImage add_glare(const GrayImage& frame, double cx_frac, double cy_frac,
                    double radius_frac, double strength);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct CorpusSpec {
    int docs_per_template = 4;  // 4 templates -> 16 base documents
    std::uint64_t master_seed = 2024;
    int max_frames = 12;
};

struct EvalRow {
    int doc_index = 0;
    int template_id = 0;
    bool forged = false;
    std::string forgery_kind;  // empty for authentic rows
    std::string profile;
    std::string verdict;  // authentic | forged | not-found | rejected:<r>
    bool correct = false;
    int frames_analyzed = 0;
    bool converged = false;
    double gt_coverage = 0.0;        // forged rows
    double detected_fraction = 0.0;  // of page area
    double gt_fraction = 0.0;
    int spurious_rects = 0;  // detected rects not touching ground truth
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double recall = 0.0;
    int false_alarms = 0;
    double mean_coverage = 0.0;
    double mean_detected_fraction = 0.0;
    double mean_gt_fraction = 0.0;
    double mean_frames = 0.0;
    double sd_frames = 0.0;
    int spurious_total = 0;
    double runtime_seconds = 0.0;  // informational; not part of the JSON
};

// Full issue -> distort -> verify pipeline over the corpus: every document
// (16 authentic + 16 forged) under every distortion profile. jobs = 0 uses
// the hardware concurrency.
EvalReport evaluate(const CorpusSpec& corpus, const DetectionParams& params,
                    const DetectorConfig& detector, int jobs = 0);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace docauth::bench
