#pragma once

#include <filesystem>
#include <string>

#include "docauth/detector.hpp"
#include "docauth/protocol.hpp"

namespace docauth {

// CLI-facing configuration: the payload parameter defaults plus the
// verifier-side detector knobs.
struct Config {
    DetectionParams params;
    DetectorConfig detector;
};

std::string config_to_json(const Config& cfg);
Config config_from_json(const std::string& json_text);
Config load_config(const std::filesystem::path& path);
void save_config(const Config& cfg, const std::filesystem::path& path);

std::string frame_verdict_to_json(const FrameVerdict& v);
std::string video_verdict_to_json(const VideoVerdict& v);
std::string auth_result_to_json(const proto::AuthResult& r);

}  // namespace docauth
