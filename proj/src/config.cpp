#include "docauth/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace docauth {

namespace {

using nlohmann::json;

json rects_json(const std::vector<Rect>& rects) {
    json arr = json::array();
    for (const Rect& r : rects)
        arr.push_back({{"x1", r.x1}, {"y1", r.y1}, {"x2", r.x2}, {"y2", r.y2}});
    return arr;
}

const char* status_name(FrameStatus s) {
    switch (s) {
        case FrameStatus::Authentic: return "authentic";
        case FrameStatus::Forged: return "forged";
        case FrameStatus::NotFound: return "not-found";
    }
    return "unknown";
}

json frame_verdict_json(const FrameVerdict& v) {
    return {{"status", status_name(v.status)},
            {"differences", rects_json(v.differences)},
            {"rounds_used", v.rounds_used}};
}

}  // namespace

std::string config_to_json(const Config& cfg) {
    json j{
        {"tau", cfg.params.tau},
        {"delta", cfg.params.delta},
        {"phi", cfg.params.phi_deg},
        {"sigma", {cfg.params.sigma_w, cfg.params.sigma_h}},
        {"k", cfg.params.k},
        {"max_rounds", cfg.params.max_rounds},
        {"merge_gap", cfg.detector.merge_gap},
        {"report_padding", cfg.detector.report_padding},
        {"fixed_point", cfg.detector.fixed_point},
        {"geometry",
         {{"max_features", cfg.detector.geometry.max_features},
          {"ratio", cfg.detector.geometry.ratio},
          {"reproj_tol", cfg.detector.geometry.reproj_tol},
          {"min_inliers", cfg.detector.geometry.min_inliers},
          {"min_inliers_local", cfg.detector.geometry.min_inliers_local},
          {"ransac_iters", cfg.detector.geometry.ransac_iters},
          {"seed", cfg.detector.geometry.seed}}},
    };
    return j.dump(2);
}

Config config_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    Config cfg;
    cfg.params.tau = j.value("tau", cfg.params.tau);
    cfg.params.delta = j.value("delta", cfg.params.delta);
    cfg.params.phi_deg = j.value("phi", cfg.params.phi_deg);
    if (j.contains("sigma")) {
        cfg.params.sigma_w = j["sigma"].at(0).get<int>();
        cfg.params.sigma_h = j["sigma"].at(1).get<int>();
    }
    cfg.params.k = j.value("k", cfg.params.k);
    cfg.params.max_rounds = j.value("max_rounds", cfg.params.max_rounds);
    cfg.detector.merge_gap = j.value("merge_gap", cfg.detector.merge_gap);
    cfg.detector.report_padding =
        j.value("report_padding", cfg.detector.report_padding);
    cfg.detector.fixed_point =
        j.value("fixed_point", cfg.detector.fixed_point);
    if (j.contains("geometry")) {
        const json& g = j["geometry"];
        GeometryConfig& gc = cfg.detector.geometry;
        gc.max_features = g.value("max_features", gc.max_features);
        gc.ratio = g.value("ratio", gc.ratio);
        gc.reproj_tol = g.value("reproj_tol", gc.reproj_tol);
        gc.min_inliers = g.value("min_inliers", gc.min_inliers);
        gc.min_inliers_local =
            g.value("min_inliers_local", gc.min_inliers_local);
        gc.ransac_iters = g.value("ransac_iters", gc.ransac_iters);
        gc.seed = g.value("seed", gc.seed);
    }
    cfg.params.validate();
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const Config& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open");
    out << config_to_json(cfg) << "\n";
}

std::string frame_verdict_to_json(const FrameVerdict& v) {
    return frame_verdict_json(v).dump(2);
}

std::string video_verdict_to_json(const VideoVerdict& v) {
    json j{{"final", frame_verdict_json(v.final)},
           {"frames_analyzed", v.frames_analyzed},
           {"converged", v.converged}};
    return j.dump(2);
}

std::string auth_result_to_json(const proto::AuthResult& r) {
    json j;
    switch (r.status) {
        case proto::AuthResult::Status::Authentic:
            j["status"] = "authentic";
            break;
        case proto::AuthResult::Status::Forged:
            j["status"] = "forged";
            j["rects"] = rects_json(r.rects);
            break;
        case proto::AuthResult::Status::Rejected:
            j["status"] = "rejected";
            j["reason"] = r.reason ? proto::to_string(*r.reason) : "unknown";
            break;
    }
    if (r.video) {
        j["frames_analyzed"] = r.video->frames_analyzed;
        j["converged"] = r.video->converged;
    }
    return j.dump(2);
}

}  // namespace docauth
