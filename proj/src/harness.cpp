#include "docauth/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "docauth/geometry.hpp"
#include "docauth/protocol.hpp"
#include "docauth/services.hpp"

namespace docauth::bench {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform(std::mt19937_64& rng, double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
}

int uniform_int(std::mt19937_64& rng, int a, int b) {
    return std::uniform_int_distribution<int>(a, b)(rng);
}

// ---------------------------------------------------------------------------
// Drawing
// ---------------------------------------------------------------------------

struct Canvas {
    int w, h;
    std::vector<float> px;

    Canvas(int w_, int h_) : w(w_), h(h_) {
        px.assign(static_cast<std::size_t>(w) * h, 1.0f);
    }
    explicit Canvas(const GrayImage& img) : w(img.width()), h(img.height()) {
        px.resize(static_cast<std::size_t>(w) * h);
        for (std::size_t i = 0; i < px.size(); ++i)
            px[i] = img.pixels()[i] / 255.0f;
    }

    float at(int x, int y) const {
        return px[static_cast<std::size_t>(y) * w + x];
    }
    void ink(int x, int y, float coverage, float value) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        float& f = px[static_cast<std::size_t>(y) * w + x];
        f += (value - f) * coverage;
    }
    GrayImage to_image() const {
        GrayImage out(w, h);
        for (std::size_t i = 0; i < px.size(); ++i)
            out.pixels()[i] = GrayImage::quantize(px[i]);
        return out;
    }
};

double segment_distance(double px_, double py, double ax, double ay, double bx,
                        double by) {
    double dx = bx - ax, dy = by - ay;
    double len2 = dx * dx + dy * dy;
    double t = len2 > 1e-12
                   ? std::clamp(((px_ - ax) * dx + (py - ay) * dy) / len2, 0.0,
                                1.0)
                   : 0.0;
    double cx = ax + t * dx, cy = ay + t * dy;
    return std::hypot(px_ - cx, py - cy);
}

void draw_segment(Canvas& c, double ax, double ay, double bx, double by,
                  double thickness, float value) {
    double r = thickness * 0.5;
    int x1 = static_cast<int>(std::floor(std::min(ax, bx) - r - 1));
    int y1 = static_cast<int>(std::floor(std::min(ay, by) - r - 1));
    int x2 = static_cast<int>(std::ceil(std::max(ax, bx) + r + 1));
    int y2 = static_cast<int>(std::ceil(std::max(ay, by) + r + 1));
    for (int y = y1; y <= y2; ++y) {
        for (int x = x1; x <= x2; ++x) {
            double d = segment_distance(x, y, ax, ay, bx, by);
            double cov = std::clamp(r + 0.5 - d, 0.0, 1.0);
            if (cov > 0) c.ink(x, y, static_cast<float>(cov), value);
        }
    }
}

void fill_rect(Canvas& c, const Rect& r, float value) {
    for (int y = r.y1; y < r.y2; ++y)
        for (int x = r.x1; x < r.x2; ++x) c.ink(x, y, 1.0f, value);
}

void outline_rect(Canvas& c, const Rect& r, double thickness, float value) {
    draw_segment(c, r.x1, r.y1, r.x2 - 1, r.y1, thickness, value);
    draw_segment(c, r.x2 - 1, r.y1, r.x2 - 1, r.y2 - 1, thickness, value);
    draw_segment(c, r.x2 - 1, r.y2 - 1, r.x1, r.y2 - 1, thickness, value);
    draw_segment(c, r.x1, r.y2 - 1, r.x1, r.y1, thickness, value);
}

void draw_circle(Canvas& c, double cx, double cy, double radius,
                 double thickness, float value) {
    int steps = std::max(24, static_cast<int>(radius));
    double prev_x = cx + radius, prev_y = cy;
    for (int i = 1; i <= steps; ++i) {
        double a = 2.0 * std::numbers::pi * i / steps;
        double x = cx + radius * std::cos(a), y = cy + radius * std::sin(a);
        draw_segment(c, prev_x, prev_y, x, y, thickness, value);
        prev_x = x;
        prev_y = y;
    }
}

// Connected pseudo-glyph: a stroke path through jittered anchor points of
// the cell. Box-style glyphs get an outline plus inner strokes.
void draw_glyph(Canvas& c, std::mt19937_64& rng, const Rect& cell, float ink,
                bool boxy) {
    double t = uniform(rng, 3.6, 5.0);
    if (boxy) {
        Rect inner{cell.x1 + 2, cell.y1 + 2, cell.x2 - 2, cell.y2 - 2};
        outline_rect(c, inner, t * 0.8, ink);
        int extra = uniform_int(rng, 1, 2);
        for (int i = 0; i < extra; ++i) {
            // Inner stroke anchored on the outline so the glyph stays
            // connected.
            double x0 = inner.x1 + 1;
            double y0 = uniform(rng, inner.y1 + 3, inner.y2 - 4);
            double x1 = inner.x2 - 2;
            double y1 = uniform(rng, inner.y1 + 3, inner.y2 - 4);
            draw_segment(c, x0, y0, x1, y1, t * 0.8, ink);
        }
        return;
    }
    auto anchor = [&](int gx, int gy, double& x, double& y) {
        x = cell.x1 + 2 + (cell.width() - 5) * gx / 2.0 + uniform(rng, -1, 1);
        y = cell.y1 + 2 + (cell.height() - 5) * gy / 2.0 + uniform(rng, -1, 1);
    };
    int n_strokes = uniform_int(rng, 2, 4);
    double x0, y0;
    anchor(uniform_int(rng, 0, 2), uniform_int(rng, 0, 2), x0, y0);
    for (int i = 0; i < n_strokes; ++i) {
        double x1, y1;
        anchor(uniform_int(rng, 0, 2), uniform_int(rng, 0, 2), x1, y1);
        if (std::abs(x1 - x0) + std::abs(y1 - y0) < 4) {
            x1 = cell.x2 - 3;
            y1 = cell.y2 - 3;
        }
        draw_segment(c, x0, y0, x1, y1, t, ink);
        x0 = x1;
        y0 = y1;
    }
}

struct RunOptions {
    int cell_w = 22;
    int cell_h = 32;
    int spacing = 5;
    double space_prob = 0.16;
    float ink = 0.12f;
    PrimitiveKind kind = PrimitiveKind::Glyph;
};

// A line of glyph cells; stops at x_end. Records one primitive per glyph.
int glyph_run(Canvas& c, std::vector<Primitive>& prims, std::mt19937_64& rng,
              int x, int y, int x_end, const RunOptions& opt) {
    while (x + opt.cell_w <= x_end) {
        if (uniform(rng, 0, 1) < opt.space_prob) {
            x += opt.cell_w;  // word gap
            continue;
        }
        Rect cell{x, y, x + opt.cell_w, y + opt.cell_h};
        draw_glyph(c, rng, cell, opt.ink, false);
        prims.push_back({opt.kind, cell});
        x += opt.cell_w + opt.spacing;
    }
    return x;
}

// Digit-like run with an optional leading sign bar; always records the slot.
void digit_run(Canvas& c, std::vector<Primitive>& prims, std::mt19937_64& rng,
               int x, int y, int n_digits, bool with_sign) {
    RunOptions opt;
    opt.cell_w = 16;
    opt.cell_h = 26;
    opt.spacing = 4;
    opt.space_prob = 0.0;
    Rect bar{x, y + opt.cell_h / 2 - 2, x + 12, y + opt.cell_h / 2 + 2};
    if (with_sign) {
        fill_rect(c, bar, 0.12f);
        prims.push_back({PrimitiveKind::SignBar, bar});
    } else {
        prims.push_back({PrimitiveKind::SignBarSlot, bar});
    }
    x += 16;
    for (int i = 0; i < n_digits; ++i) {
        Rect cell{x, y, x + opt.cell_w, y + opt.cell_h};
        draw_glyph(c, rng, cell, opt.ink, false);
        prims.push_back({PrimitiveKind::DigitGlyph, cell});
        x += opt.cell_w + opt.spacing;
    }
}

void paragraph(Canvas& c, std::vector<Primitive>& prims, std::mt19937_64& rng,
               int x, int& y, int x_end, int n_lines, int line_height = 44) {
    RunOptions opt;
    for (int i = 0; i < n_lines; ++i) {
        int end = x_end;
        if (i == n_lines - 1) end = x + (x_end - x) * uniform_int(rng, 4, 9) / 10;
        glyph_run(c, prims, rng, x, y, end, opt);
        y += line_height;
    }
}

// Long smooth scrawl built from a smoothed random walk.
void signature_stroke(Canvas& c, std::vector<Primitive>& prims,
                      std::mt19937_64& rng, Rect area) {
    double x = area.x1 + 5, y = (area.y1 + area.y2) / 2.0;
    double vx = uniform(rng, 8, 14), vy = uniform(rng, -6, 6);
    double min_x = x, min_y = y, max_x = x, max_y = y;
    double t = uniform(rng, 3.6, 4.6);
    while (x < area.x2 - 8) {
        double nx = x + vx, ny = y + vy;
        ny = std::clamp(ny, static_cast<double>(area.y1 + 4),
                        static_cast<double>(area.y2 - 5));
        draw_segment(c, x, y, nx, ny, t, 0.1f);
        min_x = std::min(min_x, nx);
        max_x = std::max(max_x, nx);
        min_y = std::min(min_y, ny);
        max_y = std::max(max_y, ny);
        x = nx;
        y = ny;
        vx = std::clamp(vx + uniform(rng, -3, 3), 6.0, 16.0);
        vy = std::clamp(vy + uniform(rng, -5, 5), -12.0, 12.0);
    }
    prims.push_back({PrimitiveKind::Stroke,
                     Rect{static_cast<int>(min_x) - 3,
                          static_cast<int>(min_y) - 3,
                          static_cast<int>(max_x) + 4,
                          static_cast<int>(max_y) + 4}});
}

void polyline_chart(Canvas& c, std::vector<Primitive>& prims,
                    std::mt19937_64& rng, Rect area) {
    // Axes.
    draw_segment(c, area.x1, area.y2 - 1, area.x2 - 1, area.y2 - 1, 3.6,
                 0.15f);
    draw_segment(c, area.x1, area.y1, area.x1, area.y2 - 1, 3.6, 0.15f);
    int n = uniform_int(rng, 6, 9);
    double step = (area.width() - 30.0) / n;
    double x = area.x1 + 15, y = uniform(rng, area.y1 + 20, area.y2 - 20);
    double min_y = y, max_y = y, x0 = x;
    for (int i = 0; i < n; ++i) {
        double nx = x + step;
        double ny = uniform(rng, area.y1 + 15, area.y2 - 15);
        draw_segment(c, x, y, nx, ny, 4.2, 0.1f);
        min_y = std::min(min_y, ny);
        max_y = std::max(max_y, ny);
        x = nx;
        y = ny;
    }
    prims.push_back({PrimitiveKind::Stroke,
                     Rect{static_cast<int>(x0) - 3, static_cast<int>(min_y) - 3,
                          static_cast<int>(x) + 4,
                          static_cast<int>(max_y) + 4}});
}

void bar_chart(Canvas& c, std::vector<Primitive>& prims, std::mt19937_64& rng,
               Rect area) {
    draw_segment(c, area.x1, area.y2 - 1, area.x2 - 1, area.y2 - 1, 3.6,
                 0.15f);
    draw_segment(c, area.x1, area.y1, area.x1, area.y2 - 1, 3.6, 0.15f);
    int n = uniform_int(rng, 5, 7);
    int bar_w = 40;
    int gap = (area.width() - 30 - n * bar_w) / std::max(1, n - 1);
    int x = area.x1 + 20;
    for (int i = 0; i < n; ++i) {
        int bh = uniform_int(rng, 40, area.height() - 40);
        Rect bar{x, area.y2 - 4 - bh, x + bar_w, area.y2 - 4};
        fill_rect(c, bar, 0.45f);
        prims.push_back({PrimitiveKind::Box, bar});
        x += bar_w + gap;
    }
}

void table_grid(Canvas& c, std::vector<Primitive>& prims, std::mt19937_64& rng,
                Rect area, int cols, int rows) {
    for (int i = 0; i <= cols; ++i) {
        double x = area.x1 + area.width() * static_cast<double>(i) / cols;
        draw_segment(c, x, area.y1, x, area.y2 - 1, 3.4, 0.25f);
    }
    for (int j = 0; j <= rows; ++j) {
        double y = area.y1 + area.height() * static_cast<double>(j) / rows;
        draw_segment(c, area.x1, y, area.x2 - 1, y, 3.4, 0.25f);
    }
    prims.push_back({PrimitiveKind::Box, area});
    int cell_w = area.width() / cols, cell_h = area.height() / rows;
    for (int j = 0; j < rows; ++j) {
        for (int i = 0; i < cols; ++i) {
            int cx = area.x1 + i * cell_w + 14;
            int cy = area.y1 + j * cell_h + (cell_h - 26) / 2;
            digit_run(c, prims, rng, cx, cy, uniform_int(rng, 2, 4),
                      uniform(rng, 0, 1) < 0.3);
        }
    }
}

}  // namespace

std::string to_string(ForgeryKind kind) {
    switch (kind) {
        case ForgeryKind::AddGlyph: return "add-glyph";
        case ForgeryKind::RemoveGlyph: return "remove-glyph";
        case ForgeryKind::MutateDigit: return "mutate-digit";
        case ForgeryKind::FlipSign: return "flip-sign";
        case ForgeryKind::AlterStroke: return "alter-stroke";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

namespace {

void template_business_letter(Canvas& c, std::vector<Primitive>& prims,
                              std::mt19937_64& rng) {
    fill_rect(c, {kDocMargin, 100, kDocWidth - kDocMargin, 150}, 0.3f);
    outline_rect(c, {1420, 196, 1600, 306}, 4.2, 0.15f);
    prims.push_back({PrimitiveKind::Box, {1420, 196, 1600, 306}});
    // Logo mark inside the box; bare outlines carry too few distinctive
    // corners for local re-alignment.
    for (int i = 0; i < 3; ++i) {
        Rect cell{1438 + i * 52, 226, 1438 + i * 52 + 40, 276};
        draw_glyph(c, rng, cell, 0.15f, false);
        prims.push_back({PrimitiveKind::Glyph, cell});
    }
    // Strapline right under the header bar keeps its long edge inside a
    // feature-rich neighborhood.
    RunOptions strap;
    strap.cell_w = 16;
    strap.cell_h = 24;
    glyph_run(c, prims, rng, kDocMargin, 162, 1560, strap);

    RunOptions opt;
    int y = 220;
    for (int i = 0; i < 4; ++i) {
        glyph_run(c, prims, rng, kDocMargin, y,
                  kDocMargin + uniform_int(rng, 360, 560), opt);
        y += 44;
    }
    digit_run(c, prims, rng, 1150, 430, 8, false);

    y = 540;
    for (int block = 0; block < 3; ++block) {
        paragraph(c, prims, rng, kDocMargin, y, kDocWidth - kDocMargin,
                  uniform_int(rng, 5, 8));
        y += 60;
    }
    signature_stroke(c, prims, rng, {150, 1860, 720, 2040});
    draw_segment(c, kDocMargin, 2050, kDocWidth - kDocMargin, 2050, 3.6,
                 0.25f);
    RunOptions footer;
    footer.cell_w = 17;
    footer.cell_h = 26;
    glyph_run(c, prims, rng, kDocMargin + 200, 2062, 1400, footer);
}

void template_quarterly(Canvas& c, std::vector<Primitive>& prims,
                        std::mt19937_64& rng) {
    RunOptions title;
    title.cell_w = 30;
    title.cell_h = 44;
    title.space_prob = 0.1;
    glyph_run(c, prims, rng, 400, 130, 1300, title);

    int y = 250;
    paragraph(c, prims, rng, kDocMargin, y, kDocWidth - kDocMargin, 4);

    table_grid(c, prims, rng, {150, 500, 1550, 880}, 5, 5);

    bar_chart(c, prims, rng, {150, 980, 780, 1460});
    polyline_chart(c, prims, rng, {920, 980, 1550, 1460});
    RunOptions caption;
    caption.cell_w = 16;
    caption.cell_h = 24;
    glyph_run(c, prims, rng, 200, 1478, 700, caption);
    glyph_run(c, prims, rng, 960, 1478, 1480, caption);

    y = 1600;
    paragraph(c, prims, rng, kDocMargin, y, kDocWidth - kDocMargin,
              uniform_int(rng, 5, 7));
    signature_stroke(c, prims, rng, {950, 1950, 1500, 2090});
}

void template_dense_columns(Canvas& c, std::vector<Primitive>& prims,
                            std::mt19937_64& rng) {
    // Column-glyph page. Glyph shapes, sizes, and weights vary cell to cell;
    // uniform box glyphs would make descriptors ambiguous page-wide.
    int x = 320;
    while (x + 40 <= 1380) {
        Rect cell{x, 130, x + 40, 174};
        draw_glyph(c, rng, cell, 0.1f, uniform(rng, 0, 1) < 0.5);
        prims.push_back({PrimitiveKind::Glyph, cell});
        x += 50;
    }
    for (int row = 0; row < 34; ++row) {
        int y = 240 + row * 50;
        if (y + 40 > 1960) break;
        for (int col = 0; col < 30; ++col) {
            int cx = 120 + col * 50;
            if (uniform(rng, 0, 1) < 0.2) continue;  // gaps
            int size = uniform_int(rng, 28, 40);
            Rect cell{cx, y, cx + size, y + size};
            bool boxy = uniform(rng, 0, 1) < 0.4;
            draw_glyph(c, rng, cell,
                       static_cast<float>(uniform(rng, 0.08, 0.2)), boxy);
            prims.push_back({PrimitiveKind::Glyph, cell});
        }
    }
    draw_circle(c, 1430, 2030, 55, 4.2, 0.2f);
    signature_stroke(c, prims, rng, {200, 1990, 900, 2090});
    // Serial and page-number rows.
    digit_run(c, prims, rng, 980, 2010, uniform_int(rng, 5, 8),
              uniform(rng, 0, 1) < 0.5);
    digit_run(c, prims, rng, 980, 2060, uniform_int(rng, 3, 5), false);
}

void template_prescription(Canvas& c, std::vector<Primitive>& prims,
                           std::mt19937_64& rng) {
    RunOptions head;
    head.cell_w = 26;
    head.cell_h = 38;
    glyph_run(c, prims, rng, 300, 110, 1400, head);
    RunOptions sub;
    sub.cell_w = 16;
    sub.cell_h = 24;
    glyph_run(c, prims, rng, 420, 170, 1280, sub);
    draw_segment(c, kDocMargin, 222, kDocWidth - kDocMargin, 222, 4.2, 0.2f);

    RunOptions opt;
    int y = 260;
    for (int i = 0; i < 3; ++i) {
        int end = glyph_run(c, prims, rng, kDocMargin, y,
                            kDocMargin + 420, opt);
        digit_run(c, prims, rng, end + 60, y + 3, uniform_int(rng, 4, 8),
                  false);
        y += 52;
    }
    draw_segment(c, kDocMargin, y - 6, kDocWidth - kDocMargin, y - 6, 3.4,
                 0.3f);

    y += 36;
    for (int item = 0; item < 6; ++item) {
        int end = glyph_run(c, prims, rng, kDocMargin + 40, y,
                            kDocMargin + uniform_int(rng, 700, 1050), opt);
        digit_run(c, prims, rng, end + 70, y + 3, uniform_int(rng, 2, 4),
                  uniform(rng, 0, 1) < 0.5);
        y += 64;
    }

    signature_stroke(c, prims, rng, {850, 1560, 1550, 1800});
    outline_rect(c, {kDocMargin, 1540, 1650, 1840}, 3.4, 0.3f);
    prims.push_back({PrimitiveKind::Box, {kDocMargin, 1540, 1650, 1840}});

    RunOptions fine;
    fine.cell_w = 16;
    fine.cell_h = 24;
    y = 1950;
    for (int i = 0; i < 4; ++i) {
        glyph_run(c, prims, rng, kDocMargin, y, kDocWidth - kDocMargin, fine);
        y += 36;
    }
}

}  // namespace

SyntheticDoc generate_document(std::uint64_t seed, int template_id) {
    if (template_id < 1 || template_id > 4)
        throw std::invalid_argument("template_id must be 1..4");
    SyntheticDoc doc;
    doc.seed = seed;
    doc.template_id = template_id;
    std::mt19937_64 rng(mix_seed(seed, template_id));
    Canvas canvas(kDocWidth, kDocHeight);
    switch (template_id) {
        case 1: template_business_letter(canvas, doc.primitives, rng); break;
        case 2: template_quarterly(canvas, doc.primitives, rng); break;
        case 3: template_dense_columns(canvas, doc.primitives, rng); break;
        case 4: template_prescription(canvas, doc.primitives, rng); break;
    }
    doc.image = canvas.to_image();
    return doc;
}

// ---------------------------------------------------------------------------
// Forgery injection
// ---------------------------------------------------------------------------

namespace {

struct ChangeCheck {
    bool ok = false;
    Rect bounding{};
    int magnitude = 0;
};

// The changed-pixel set must be a single 8-connected component larger than
// tau with at least one strong intensity change.
ChangeCheck check_change(const GrayImage& original, const GrayImage& forged,
                         int tau, int min_size, int max_size) {
    ChangeCheck out;
    auto rects = locate_forgeries_ideal(original, forged);
    if (rects.size() != 1) return out;
    DifferenceMap diff = absolute_difference(original, forged);
    int changed = 0;
    int strongest = 0;
    for (std::size_t i = 0; i < diff.pixels().size(); ++i) {
        if (diff.pixels()[i] > 0) ++changed;
        strongest = std::max(strongest, static_cast<int>(diff.pixels()[i]));
    }
    if (changed <= tau) return out;
    if (changed < min_size || (max_size > 0 && changed > max_size)) return out;
    if (strongest < 89) return out;  // needs a change >= 0.35 somewhere
    out.ok = true;
    out.bounding = rects.front();
    out.magnitude = changed;
    return out;
}

std::vector<const Primitive*> primitives_of(const SyntheticDoc& doc,
                                            PrimitiveKind kind) {
    std::vector<const Primitive*> out;
    for (const auto& p : doc.primitives)
        if (p.kind == kind) out.push_back(&p);
    return out;
}

bool region_is_blank(const GrayImage& img, const Rect& r) {
    Rect c = r.clipped(img.width(), img.height());
    if (c != r || !c.valid()) return false;
    for (int y = c.y1; y < c.y2; ++y)
        for (int x = c.x1; x < c.x2; ++x)
            if (img.raw(x, y) < 240) return false;
    return true;
}

std::optional<std::pair<int, int>> find_ink_pixel(const GrayImage& img,
                                                  const Rect& r,
                                                  std::mt19937_64& rng) {
    Rect c = r.clipped(img.width(), img.height());
    if (!c.valid()) return std::nullopt;
    for (int attempt = 0; attempt < 60; ++attempt) {
        int x = uniform_int(rng, c.x1, c.x2 - 1);
        int y = uniform_int(rng, c.y1, c.y2 - 1);
        if (img.raw(x, y) < 120) return std::make_pair(x, y);
    }
    return std::nullopt;
}

void erase_disc(Canvas& c, double cx, double cy, double radius) {
    int x1 = static_cast<int>(cx - radius - 1), x2 = static_cast<int>(cx + radius + 1);
    int y1 = static_cast<int>(cy - radius - 1), y2 = static_cast<int>(cy + radius + 1);
    for (int y = y1; y <= y2; ++y)
        for (int x = x1; x <= x2; ++x) {
            double cov = std::clamp(radius + 0.5 - std::hypot(x - cx, y - cy),
                                    0.0, 1.0);
            if (cov > 0) c.ink(x, y, static_cast<float>(cov), 1.0f);
        }
}

}  // namespace

ForgedDoc inject_forgery(const SyntheticDoc& doc, ForgeryKind kind,
                         std::mt19937_64& rng, int tau,
                         int requested_magnitude) {
    if (requested_magnitude > 0 && requested_magnitude <= tau)
        throw std::invalid_argument(
            "requested magnitude below tau would be undetectable");

    const GrayImage& original = doc.image;
    for (int attempt = 0; attempt < 40; ++attempt) {
        Canvas canvas(original);
        bool drawn = false;
        int min_size = tau + 1, max_size = 0;

        switch (kind) {
            case ForgeryKind::AddGlyph: {
                auto glyphs = primitives_of(doc, PrimitiveKind::Glyph);
                if (glyphs.empty()) break;
                const Primitive& g =
                    *glyphs[uniform_int(rng, 0,
                                        static_cast<int>(glyphs.size()) - 1)];
                Rect spot = g.rect;
                int shift = g.rect.width() + 6;
                spot.x1 += shift;
                spot.x2 += shift;
                if (!region_is_blank(original, spot.expanded(3))) break;
                draw_glyph(canvas, rng, spot, 0.12f, doc.template_id == 3);
                drawn = true;
                break;
            }
            case ForgeryKind::RemoveGlyph: {
                auto glyphs = primitives_of(doc, PrimitiveKind::Glyph);
                if (glyphs.empty()) break;
                const Primitive& g =
                    *glyphs[uniform_int(rng, 0,
                                        static_cast<int>(glyphs.size()) - 1)];
                fill_rect(canvas, g.rect.expanded(1), 1.0f);
                drawn = true;
                break;
            }
            case ForgeryKind::MutateDigit: {
                auto digits = primitives_of(doc, PrimitiveKind::DigitGlyph);
                if (digits.empty()) break;
                const Primitive& g =
                    *digits[uniform_int(rng, 0,
                                        static_cast<int>(digits.size()) - 1)];
                auto ink_px = find_ink_pixel(original, g.rect, rng);
                if (!ink_px) break;
                int target = requested_magnitude > 0 ? requested_magnitude
                                                     : uniform_int(rng, tau + 6,
                                                                   4 * tau - 6);
                double radius = std::sqrt(target / std::numbers::pi) + 0.5;
                erase_disc(canvas, ink_px->first, ink_px->second, radius);
                min_size = tau + 1;
                max_size = 4 * tau;
                drawn = true;
                break;
            }
            case ForgeryKind::FlipSign: {
                auto bars = primitives_of(doc, PrimitiveKind::SignBar);
                auto slots = primitives_of(doc, PrimitiveKind::SignBarSlot);
                bool remove = !bars.empty() &&
                              (slots.empty() || uniform(rng, 0, 1) < 0.5);
                if (remove) {
                    const Primitive& b =
                        *bars[uniform_int(rng, 0,
                                          static_cast<int>(bars.size()) - 1)];
                    fill_rect(canvas, b.rect.expanded(1), 1.0f);
                    drawn = true;
                } else if (!slots.empty()) {
                    const Primitive& s =
                        *slots[uniform_int(rng, 0,
                                           static_cast<int>(slots.size()) - 1)];
                    if (!region_is_blank(original, s.rect.expanded(2))) break;
                    fill_rect(canvas, s.rect, 0.12f);
                    drawn = true;
                }
                break;
            }
            case ForgeryKind::AlterStroke: {
                auto strokes = primitives_of(doc, PrimitiveKind::Stroke);
                if (strokes.empty()) break;
                const Primitive& s =
                    *strokes[uniform_int(rng, 0,
                                         static_cast<int>(strokes.size()) - 1)];
                auto ink_px = find_ink_pixel(original, s.rect, rng);
                if (!ink_px) break;
                if (uniform(rng, 0, 1) < 0.5) {
                    erase_disc(canvas, ink_px->first, ink_px->second,
                               uniform(rng, 7, 11));
                } else {
                    // Branch stroke rooted on the existing ink.
                    double a = uniform(rng, 0, 2 * std::numbers::pi);
                    double len = uniform(rng, 24, 48);
                    draw_segment(canvas, ink_px->first, ink_px->second,
                                 ink_px->first + len * std::cos(a),
                                 ink_px->second + len * std::sin(a),
                                 uniform(rng, 3.6, 4.6), 0.1f);
                }
                drawn = true;
                break;
            }
        }
        if (!drawn) continue;

        GrayImage forged = canvas.to_image();
        ChangeCheck check = check_change(original, forged, tau, min_size,
                                         max_size);
        if (!check.ok) continue;

        ForgedDoc out;
        out.image = std::move(forged);
        out.spec.kind = kind;
        out.spec.ground_truth = check.bounding;
        out.spec.magnitude = check.magnitude;
        return out;
    }
    throw std::runtime_error("no compatible primitive");
}

// ---------------------------------------------------------------------------
// Distortion
// ---------------------------------------------------------------------------

namespace {

GrayImage add_noise(const GrayImage& img, double amplitude,
                    std::mt19937_64& rng) {
    if (amplitude <= 0) return img;
    GrayImage out(img.width(), img.height());
    std::normal_distribution<double> n(0.0, amplitude);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.set(x, y, img.at(x, y) + n(rng));
    return out;
}

GrayImage apply_lighting(const GrayImage& img, double amplitude, double gx,
                         double gy) {
    if (amplitude <= 0) return img;
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double u = gx * (static_cast<double>(x) / img.width() - 0.5) +
                       gy * (static_cast<double>(y) / img.height() - 0.5);
            double field = std::clamp(0.5 + u, 0.0, 1.0);
            out.set(x, y, img.at(x, y) * (1.0 - amplitude * field));
        }
    }
    return out;
}

}  // namespace

std::vector<DistortionProfile> standard_profiles() {
    return {
        {"flat-clean", 0.012, FoldMode::None, 0.15, 0.8, 0.010, 0.004},
        {"tilted-warm", 0.030, FoldMode::None, 0.28, 1.2, 0.020, 0.006},
        {"folded-half", 0.020, FoldMode::Half, 0.22, 1.0, 0.015, 0.005},
        {"folded-thirds", 0.025, FoldMode::Thirds, 0.30, 1.4, 0.022, 0.006},
    };
}

DistortedVideo::DistortedVideo(GrayImage document, DistortionProfile profile,
                               std::uint64_t seed)
    : document_(std::move(document)), profile_(std::move(profile)),
      seed_(seed) {
    std::mt19937_64 rng(mix_seed(seed_, 0xD15707));
    const int h = document_.height();
    switch (profile_.fold) {
        case FoldMode::None:
            break;
        case FoldMode::Half:
            creases_ = {h / 2 + uniform_int(rng, -20, 20)};
            break;
        case FoldMode::Thirds:
            creases_ = {h / 3 + uniform_int(rng, -15, 15),
                        2 * h / 3 + uniform_int(rng, -15, 15)};
            break;
    }
    for (std::size_t band = 0; band <= creases_.size() && !creases_.empty();
         ++band) {
        band_scales_.push_back(1.0 - uniform(rng, 0.004, 0.012));
        band_shears_.push_back(uniform(rng, -0.004, 0.004));
    }
    for (double& corner : base_corners_)
        corner = uniform(rng, -1, 1) * profile_.perspective *
                 document_.width();
    double angle = uniform(rng, 0, 2 * std::numbers::pi);
    light_gx_ = std::cos(angle);
    light_gy_ = std::sin(angle);
}

namespace {

// Integral of a per-band slope over [anchor, y] (signed), with band
// boundaries at the creases. Bands: band 0 below creases[0], band i between
// creases[i-1] and creases[i], last band above the last crease.
double integrate_bands(double y, double anchor,
                       const std::vector<int>& creases,
                       const std::vector<double>& slopes) {
    auto slope_at = [&](double t) {
        std::size_t band = 0;
        while (band < creases.size() && t >= creases[band]) ++band;
        return slopes[band];
    };
    double lo = std::min(anchor, y), hi = std::max(anchor, y);
    double acc = 0, prev = lo;
    for (int c : creases) {
        if (c <= lo) continue;
        if (c >= hi) break;
        acc += (c - prev) * slope_at((prev + c) / 2);
        prev = c;
    }
    acc += (hi - prev) * slope_at((prev + hi) / 2);
    return y >= anchor ? acc : -acc;
}

}  // namespace

double DistortedVideo::fold_shear_at(double y_in) const {
    if (creases_.empty()) return 0.0;
    return integrate_bands(y_in, creases_.front(), creases_, band_shears_);
}

void DistortedVideo::fold_point(double x, double y, double& ox,
                                double& oy) const {
    if (creases_.empty()) {
        ox = x;
        oy = y;
        return;
    }
    double anchor = creases_.front();
    oy = anchor + integrate_bands(y, anchor, creases_, band_scales_);
    ox = x + fold_shear_at(y);
}

double DistortedVideo::fold_y_inverse(double y_out) const {
    // Invert the monotone piecewise-linear y map by walking the bands.
    double anchor = creases_.front();
    auto y_forward = [&](double y) {
        return anchor + integrate_bands(y, anchor, creases_, band_scales_);
    };
    // Locate the band of y_out among the images of the creases.
    std::size_t band = 0;
    while (band < creases_.size() && y_out >= y_forward(creases_[band]))
        ++band;
    double base_in =
        band == 0 ? creases_.front() : static_cast<double>(creases_[band - 1]);
    double base_out = y_forward(base_in);
    return base_in + (y_out - base_out) / band_scales_[band];
}

Homography DistortedVideo::frame_homography(int index) const {
    std::mt19937_64 rng(mix_seed(seed_, 0xC04E + index));
    const double w = document_.width(), h = document_.height();
    // The page shrinks into the camera canvas along with the perspective
    // magnitude; an all-zero profile maps frames onto the document exactly.
    const double scale = std::clamp(1.0 - 3.5 * profile_.perspective, 0.85,
                                    1.0);
    const double ox = w * (1 - scale) / 2, oy = h * (1 - scale) / 2;
    double corners[8] = {0, 0, w, 0, w, h, 0, h};
    std::vector<PointPair> pairs(4);
    for (int i = 0; i < 4; ++i) {
        double jitter_x = uniform(rng, -1, 1) * profile_.jitter * w;
        double jitter_y = uniform(rng, -1, 1) * profile_.jitter * w;
        pairs[i].src_x = corners[2 * i];
        pairs[i].src_y = corners[2 * i + 1];
        pairs[i].dst_x = ox + corners[2 * i] * scale + base_corners_[2 * i] +
                         jitter_x;
        pairs[i].dst_y = oy + corners[2 * i + 1] * scale +
                         base_corners_[2 * i + 1] + jitter_y;
    }
    auto h_opt = fit_homography(pairs);
    if (!h_opt) return Homography::identity();
    return *h_opt;
}

GrayImage DistortedVideo::frame(int index) const {
    std::mt19937_64 rng(mix_seed(seed_, 0xF00D + index));
    GrayImage img = add_noise(document_, profile_.noise, rng);
    img = gaussian_blur(img, profile_.blur_sigma);
    double wobble = 1.0 + uniform(rng, -0.08, 0.08);
    img = apply_lighting(img, profile_.lighting * wobble, light_gx_,
                         light_gy_);

    if (!creases_.empty()) {
        // Inverse-map through the continuous fold (y compression + shear).
        GrayImage folded(img.width(), img.height(), 255);
        for (int y = 0; y < img.height(); ++y) {
            double sy = fold_y_inverse(y);
            if (sy < 0 || sy > img.height() - 1.0) continue;
            double shear = fold_shear_at(sy);
            for (int x = 0; x < img.width(); ++x) {
                double sx = x - shear;
                if (sx < 0 || sx > img.width() - 1.0) continue;
                int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
                int x1 = std::min(x0 + 1, img.width() - 1);
                int y1 = std::min(y0 + 1, img.height() - 1);
                double fx = sx - x0, fy = sy - y0;
                double v = (1 - fy) * ((1 - fx) * img.raw(x0, y0) +
                                       fx * img.raw(x1, y0)) +
                           fy * ((1 - fx) * img.raw(x0, y1) +
                                 fx * img.raw(x1, y1));
                folded.set_raw(x, y,
                               static_cast<std::uint8_t>(std::lround(v)));
            }
        }
        // Crease shading bands.
        for (int crease : creases_) {
            double strength = 0.05 + 0.03 * ((seed_ >> 4) % 2);
            for (int y = std::max(0, crease - 24);
                 y < std::min(img.height(), crease + 24); ++y) {
                double fall =
                    std::exp(-0.5 * (y - crease) * (y - crease) / 64.0);
                for (int x = 0; x < img.width(); ++x) {
                    double v = folded.at(x, y) * (1.0 - strength * fall);
                    folded.set(x, y, v);
                }
            }
        }
        img = std::move(folded);
    }

    // Composite the page onto a light desk backdrop. A constant backdrop
    // gives the page a visible boundary without adding fake texture.
    const double backdrop = 0.80;
    Homography pose = frame_homography(index);
    double identity_defect = 0;
    for (int i = 0; i < 9; ++i)
        identity_defect += std::abs(pose.m[i] - Homography::identity().m[i]);
    if (identity_defect < 1e-9) return img;  // fronto-parallel, bit exact
    Homography hinv = pose.inverse();
    GrayImage out(img.width(), img.height(),
                  GrayImage::quantize(backdrop));
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double sx, sy;
            if (!hinv.apply(x, y, sx, sy)) continue;
            if (sx < 0 || sy < 0 || sx > img.width() - 1.0 ||
                sy > img.height() - 1.0)
                continue;
            int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            int x1 = std::min(x0 + 1, img.width() - 1);
            int y1 = std::min(y0 + 1, img.height() - 1);
            double fx = sx - x0, fy = sy - y0;
            double v = (1 - fy) * ((1 - fx) * img.raw(x0, y0) +
                                   fx * img.raw(x1, y0)) +
                       fy * ((1 - fx) * img.raw(x0, y1) +
                             fx * img.raw(x1, y1));
            out.set_raw(x, y, static_cast<std::uint8_t>(std::lround(v)));
        }
    }
    return out;
}

FrameStream DistortedVideo::stream(int max_frames) const {
    auto self = std::make_shared<DistortedVideo>(*this);
    auto index = std::make_shared<int>(0);
    return [self, index, max_frames]() -> std::optional<GrayImage> {
        if (*index >= max_frames) return std::nullopt;
        return self->frame((*index)++);
    };
}

Rect DistortedVideo::map_rect_to_frame(const Rect& r, int index) const {
    Homography h = frame_homography(index);
    double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
    const double xs[4] = {static_cast<double>(r.x1),
                          static_cast<double>(r.x2),
                          static_cast<double>(r.x1),
                          static_cast<double>(r.x2)};
    const double ys[4] = {static_cast<double>(r.y1),
                          static_cast<double>(r.y1),
                          static_cast<double>(r.y2),
                          static_cast<double>(r.y2)};
    for (int i = 0; i < 4; ++i) {
        double fx, fy, ox, oy;
        fold_point(xs[i], ys[i], fx, fy);
        if (!h.apply(fx, fy, ox, oy)) continue;
        min_x = std::min(min_x, ox);
        max_x = std::max(max_x, ox);
        min_y = std::min(min_y, oy);
        max_y = std::max(max_y, oy);
    }
    return Rect{static_cast<int>(std::floor(min_x)),
                static_cast<int>(std::floor(min_y)),
                static_cast<int>(std::ceil(max_x)),
                static_cast<int>(std::ceil(max_y))};
}

std::vector<GrayImage> distort(const GrayImage& d,
                               const DistortionProfile& profile, int n_frames,
                               std::uint64_t seed) {
    DistortedVideo video(d, profile, seed);
    std::vector<GrayImage> frames;
    frames.reserve(n_frames);
    for (int i = 0; i < n_frames; ++i) frames.push_back(video.frame(i));
    return frames;
}

GrayImage add_glare(const GrayImage& frame, double cx_frac, double cy_frac,
                    double radius_frac, double strength) {
    GrayImage out = frame;
    double cx = cx_frac * frame.width(), cy = cy_frac * frame.height();
    double radius = radius_frac * frame.width();
    int x1 = std::max(0, static_cast<int>(cx - 3 * radius));
    int x2 = std::min(frame.width(), static_cast<int>(cx + 3 * radius));
    int y1 = std::max(0, static_cast<int>(cy - 3 * radius));
    int y2 = std::min(frame.height(), static_cast<int>(cy + 3 * radius));
    for (int y = y1; y < y2; ++y) {
        for (int x = x1; x < x2; ++x) {
            double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            double fall = std::exp(-0.5 * d2 / (radius * radius));
            double v = out.at(x, y);
            out.set(x, y, v + strength * fall * (1.0 - v));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

double coverage_fraction(const Rect& gt, const std::vector<Rect>& detected) {
    if (!gt.valid()) return 0.0;
    // Exact union coverage over a bitmap of the (small) ground-truth rect.
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(gt.area()), 0);
    for (const Rect& r : detected) {
        int x1 = std::max(r.x1, gt.x1), y1 = std::max(r.y1, gt.y1);
        int x2 = std::min(r.x2, gt.x2), y2 = std::min(r.y2, gt.y2);
        for (int y = y1; y < y2; ++y)
            for (int x = x1; x < x2; ++x)
                hit[static_cast<std::size_t>(y - gt.y1) * gt.width() +
                    (x - gt.x1)] = 1;
    }
    long long covered = 0;
    for (auto v : hit) covered += v;
    return static_cast<double>(covered) / static_cast<double>(gt.area());
}

struct EvalTask {
    int row_index;
    int doc_index;
    int template_id;
    bool forged;
    std::string forgery_kind;
    const GrayImage* capture;  // what the camera films
    const ForgerySpec* spec;   // null for authentic rows
    std::vector<std::uint8_t> payload;
    DistortionProfile profile;
    std::uint64_t video_seed;
};

}  // namespace

EvalReport evaluate(const CorpusSpec& corpus, const DetectionParams& params,
                    const DetectorConfig& detector, int jobs) {
    auto t0 = std::chrono::steady_clock::now();

    // Corpus generation.
    struct DocBundle {
        SyntheticDoc doc;
        ForgedDoc forged;
        std::vector<std::uint8_t> payload;
    };
    const int n_templates = 4;
    const int n_docs = n_templates * corpus.docs_per_template;
    std::vector<DocBundle> docs;
    docs.reserve(n_docs);
    const ForgeryKind kinds[5] = {ForgeryKind::AddGlyph,
                                  ForgeryKind::RemoveGlyph,
                                  ForgeryKind::MutateDigit,
                                  ForgeryKind::FlipSign,
                                  ForgeryKind::AlterStroke};
    for (int i = 0; i < n_docs; ++i) {
        int template_id = i / corpus.docs_per_template + 1;
        DocBundle bundle;
        bundle.doc = generate_document(mix_seed(corpus.master_seed, i),
                                       template_id);
        std::mt19937_64 forge_rng(mix_seed(corpus.master_seed, 1000 + i));
        // Not every template carries every primitive kind; fall back along
        // the kind list until one applies.
        for (int attempt = 0; attempt < 5; ++attempt) {
            ForgeryKind kind = kinds[(i + attempt) % 5];
            try {
                bundle.forged = inject_forgery(bundle.doc, kind, forge_rng,
                                               params.tau);
                break;
            } catch (const std::runtime_error&) {
                if (attempt == 4) throw;
            }
        }
        docs.push_back(std::move(bundle));
    }

    // Issue every document against in-process services.
    auto eval_root = std::filesystem::temp_directory_path() /
                     ("docauth-eval-" + std::to_string(::getpid()) + "-" +
                      std::to_string(mix_seed(corpus.master_seed, 0xE7A1)));
    crypto::EcdsaKeyPair issuer_key = crypto::EcdsaKeyPair::generate();
    crypto::EcdsaKeyPair storage_key = crypto::EcdsaKeyPair::generate();
    crypto::EcdsaKeyPair tsa_key = crypto::EcdsaKeyPair::generate();
    proto::IssuerContext issuer{issuer_key, {}};
    std::copy_n(crypto::random_bytes(32).begin(), 32,
                issuer.auth_key.begin());

    net::LocalStorageService storage(eval_root / "storage",
                                     {issuer.auth_key}, storage_key);
    net::LocalTsaClient tsa(tsa_key);
    net::LocalStorageClient issue_client(storage, storage_key.public_key());

    proto::TrustStore trust;
    trust.add_issuer(issuer_key.public_key());
    trust.tsa_key = tsa_key.public_key();
    trust.storage_key = storage_key.public_key();
    proto::Crl crl;

    for (auto& bundle : docs)
        bundle.payload = proto::issue(bundle.doc.image, issuer, params,
                                      issue_client, tsa)
                             .payload_bytes;

    // Build the 2 x 4 x n_docs row grid.
    std::vector<DistortionProfile> profiles = standard_profiles();
    std::vector<EvalTask> tasks;
    int row = 0;
    for (int i = 0; i < n_docs; ++i) {
        for (bool forged : {false, true}) {
            for (const auto& profile : profiles) {
                EvalTask task;
                task.row_index = row;
                task.doc_index = i;
                task.template_id = docs[i].doc.template_id;
                task.forged = forged;
                task.forgery_kind =
                    forged ? to_string(docs[i].forged.spec.kind) : "";
                task.capture = forged ? &docs[i].forged.image
                                      : &docs[i].doc.image;
                task.spec = forged ? &docs[i].forged.spec : nullptr;
                task.payload = docs[i].payload;
                task.profile = profile;
                task.video_seed = mix_seed(corpus.master_seed, 2000 + row);
                tasks.push_back(std::move(task));
                ++row;
            }
        }
    }

    proto::VerifierOptions options;
    options.k = params.k;
    options.max_rounds = params.max_rounds;
    options.detector = detector;

    const double page_area =
        static_cast<double>(kDocWidth) * static_cast<double>(kDocHeight);
    std::vector<EvalRow> rows(tasks.size());
    std::atomic<std::size_t> next_task{0};

    auto worker = [&] {
        net::LocalStorageClient client(storage, storage_key.public_key());
        for (;;) {
            std::size_t t = next_task.fetch_add(1);
            if (t >= tasks.size()) break;
            const EvalTask& task = tasks[t];

            DistortedVideo video(*task.capture, task.profile,
                                 task.video_seed);
            proto::AuthResult result =
                proto::verify(video.stream(corpus.max_frames), task.payload,
                              trust, crl, client, options);

            EvalRow r;
            r.doc_index = task.doc_index;
            r.template_id = task.template_id;
            r.forged = task.forged;
            r.forgery_kind = task.forgery_kind;
            r.profile = task.profile.name;
            if (result.video) {
                r.frames_analyzed = result.video->frames_analyzed;
                r.converged = result.video->converged;
            }
            switch (result.status) {
                case proto::AuthResult::Status::Authentic:
                    r.verdict = "authentic";
                    break;
                case proto::AuthResult::Status::Forged:
                    r.verdict = result.video && result.video->final.status ==
                                                    FrameStatus::NotFound
                                    ? "not-found"
                                    : "forged";
                    break;
                case proto::AuthResult::Status::Rejected:
                    r.verdict = "rejected:" +
                                proto::to_string(result.reason.value_or(
                                    proto::RejectReason::MalformedPayload));
                    break;
            }
            if (task.forged) {
                const Rect& gt = task.spec->ground_truth;
                r.gt_fraction = static_cast<double>(gt.area()) / page_area;
                if (result.status == proto::AuthResult::Status::Forged) {
                    r.gt_coverage = coverage_fraction(gt, result.rects);
                    double detected_area = 0;
                    for (const Rect& rect : result.rects) {
                        detected_area += static_cast<double>(rect.area());
                        if (rect_intersection_area(rect, gt) == 0)
                            ++r.spurious_rects;
                    }
                    r.detected_fraction = detected_area / page_area;
                }
                r.correct = result.status == proto::AuthResult::Status::Forged &&
                            r.gt_coverage > 0;
            } else {
                r.correct =
                    result.status == proto::AuthResult::Status::Authentic;
            }
            rows[task.row_index] = std::move(r);
        }
    };

    int n_workers = jobs > 0 ? jobs
                             : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::error_code ec;
    std::filesystem::remove_all(eval_root, ec);

    // Aggregates.
    EvalReport report;
    report.rows = std::move(rows);
    int forged_rows = 0, forged_found = 0;
    double cov_sum = 0, det_sum = 0, gt_sum = 0, frames_sum = 0;
    for (const EvalRow& r : report.rows) {
        frames_sum += r.frames_analyzed;
        if (r.forged) {
            ++forged_rows;
            if (r.correct) ++forged_found;
            cov_sum += r.gt_coverage;
            det_sum += r.detected_fraction;
            gt_sum += r.gt_fraction;
            report.spurious_total += r.spurious_rects;
        } else if (!r.correct) {
            ++report.false_alarms;
        }
    }
    report.recall =
        forged_rows > 0 ? static_cast<double>(forged_found) / forged_rows
                        : 0.0;
    report.mean_coverage = forged_rows > 0 ? cov_sum / forged_rows : 0.0;
    report.mean_detected_fraction =
        forged_rows > 0 ? det_sum / forged_rows : 0.0;
    report.mean_gt_fraction = forged_rows > 0 ? gt_sum / forged_rows : 0.0;
    report.mean_frames = report.rows.empty()
                             ? 0.0
                             : frames_sum / report.rows.size();
    double var = 0;
    for (const EvalRow& r : report.rows) {
        double d = r.frames_analyzed - report.mean_frames;
        var += d * d;
    }
    report.sd_frames =
        report.rows.size() > 1 ? std::sqrt(var / (report.rows.size() - 1))
                               : 0.0;
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const EvalRow& r : report.rows) {
        rows.push_back({{"doc", r.doc_index},
                        {"template", r.template_id},
                        {"forged", r.forged},
                        {"kind", r.forgery_kind},
                        {"profile", r.profile},
                        {"verdict", r.verdict},
                        {"correct", r.correct},
                        {"frames", r.frames_analyzed},
                        {"converged", r.converged},
                        {"gt_coverage", r.gt_coverage},
                        {"detected_fraction", r.detected_fraction},
                        {"gt_fraction", r.gt_fraction},
                        {"spurious_rects", r.spurious_rects}});
    }
    nlohmann::json j{{"rows", rows},
                     {"recall", report.recall},
                     {"false_alarms", report.false_alarms},
                     {"mean_coverage", report.mean_coverage},
                     {"mean_detected_fraction", report.mean_detected_fraction},
                     {"mean_gt_fraction", report.mean_gt_fraction},
                     {"mean_frames", report.mean_frames},
                     {"sd_frames", report.sd_frames},
                     {"spurious_total", report.spurious_total}};
    return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-4s %-4s %-8s %-13s %-14s %-18s %6s %9s\n",
                  "doc", "tmpl", "forged", "kind", "profile", "verdict",
                  "frames", "coverage");
    out << line;
    for (const EvalRow& r : report.rows) {
        std::snprintf(line, sizeof line,
                      "%-4d %-4d %-8s %-13s %-14s %-18s %6d %9.3f\n",
                      r.doc_index, r.template_id, r.forged ? "yes" : "no",
                      r.forgery_kind.c_str(), r.profile.c_str(),
                      r.verdict.c_str(), r.frames_analyzed, r.gt_coverage);
        out << line;
    }
    std::snprintf(line, sizeof line,
                  "recall %.3f  false_alarms %d  mean_coverage %.3f\n",
                  report.recall, report.false_alarms, report.mean_coverage);
    out << line;
    std::snprintf(
        line, sizeof line,
        "detected/gt area %.4f%% / %.4f%%  frames %.2f (sd %.2f)  spurious %d\n",
        report.mean_detected_fraction * 100, report.mean_gt_fraction * 100,
        report.mean_frames, report.sd_frames, report.spurious_total);
    out << line;
    std::snprintf(line, sizeof line, "runtime %.1fs\n",
                  report.runtime_seconds);
    out << line;
    return out.str();
}

}  // namespace docauth::bench
