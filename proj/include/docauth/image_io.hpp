#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "docauth/image.hpp"

namespace docauth {

// 8-bit binary PGM (P5). Rejects other maxvals.
GrayImage load_pgm(const std::filesystem::path& path);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

// 8-bit PNG. Color inputs are converted with luma weights
// (0.299, 0.587, 0.114); 16-bit inputs are reduced to 8 bits.
GrayImage load_png(const std::filesystem::path& path);
void save_png(const GrayImage& img, const std::filesystem::path& path);

// Dispatches on file extension (.png / .pgm).
GrayImage load_image(const std::filesystem::path& path);
void save_image(const GrayImage& img, const std::filesystem::path& path);

// Line-oriented rect report: one "x1 y1 x2 y2" per line.
std::string rects_to_text(const std::vector<Rect>& rects);
std::vector<Rect> rects_from_text(const std::string& text);

// JSON array of {x1,y1,x2,y2} objects.
std::string rects_to_json(const std::vector<Rect>& rects);
std::vector<Rect> rects_from_json(const std::string& json_text);

// Draws rect borders (black, `thickness` px) on a copy of the image.
GrayImage annotate(const GrayImage& img, const std::vector<Rect>& rects,
                   int thickness = 3);

}  // namespace docauth
