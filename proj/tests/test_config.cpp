#include <doctest.h>

#include <filesystem>

#include "docauth/config.hpp"

using namespace docauth;

TEST_CASE("config JSON round trips every field") {
    Config cfg;
    cfg.params.tau = 18;
    cfg.params.delta = 0.4;
    cfg.params.phi_deg = 25;
    cfg.params.sigma_w = 96;
    cfg.params.sigma_h = 64;
    cfg.params.k = 4;
    cfg.params.max_rounds = 3;
    cfg.detector.merge_gap = 12;
    cfg.detector.report_padding = 5;
    cfg.detector.fixed_point = true;
    cfg.detector.geometry.max_features = 1800;
    cfg.detector.geometry.ratio = 0.8;
    cfg.detector.geometry.reproj_tol = 2.5;
    cfg.detector.geometry.min_inliers = 12;
    cfg.detector.geometry.min_inliers_local = 5;
    cfg.detector.geometry.ransac_iters = 1500;
    cfg.detector.geometry.seed = 99;

    Config back = config_from_json(config_to_json(cfg));
    CHECK(back.params.tau == 18);
    CHECK(back.params.delta == doctest::Approx(0.4));
    CHECK(back.params.phi_deg == doctest::Approx(25));
    CHECK(back.params.sigma_w == 96);
    CHECK(back.params.sigma_h == 64);
    CHECK(back.params.k == 4);
    CHECK(back.params.max_rounds == 3);
    CHECK(back.detector.merge_gap == 12);
    CHECK(back.detector.report_padding == 5);
    CHECK(back.detector.fixed_point);
    CHECK(back.detector.geometry.max_features == 1800);
    CHECK(back.detector.geometry.ratio == doctest::Approx(0.8));
    CHECK(back.detector.geometry.reproj_tol == doctest::Approx(2.5));
    CHECK(back.detector.geometry.min_inliers == 12);
    CHECK(back.detector.geometry.min_inliers_local == 5);
    CHECK(back.detector.geometry.ransac_iters == 1500);
    CHECK(back.detector.geometry.seed == 99);
}

TEST_CASE("defaults carry the published parameters") {
    Config cfg;  // tau 15, delta 0.35, phi 30, sigma 80x80, k 3, 2 rounds
    CHECK(cfg.params.tau == 15);
    CHECK(cfg.params.delta == doctest::Approx(0.35));
    CHECK(cfg.params.phi_deg == doctest::Approx(30));
    CHECK(cfg.params.sigma_w == 80);
    CHECK(cfg.params.sigma_h == 80);
    CHECK(cfg.params.k == 3);
    CHECK(cfg.params.max_rounds == 2);
}

TEST_CASE("partial configs keep defaults for missing keys") {
    Config cfg = config_from_json(R"({"tau": 20})");
    CHECK(cfg.params.tau == 20);
    CHECK(cfg.params.delta == doctest::Approx(0.35));
    CHECK(cfg.detector.merge_gap == 10);
}

TEST_CASE("invalid configs are rejected on load") {
    CHECK_THROWS(config_from_json(R"({"delta": 0})"));
    CHECK_THROWS(config_from_json("not json"));
}

TEST_CASE("config file save/load") {
    auto path = std::filesystem::temp_directory_path() / "docauth_cfg.json";
    Config cfg;
    cfg.params.tau = 17;
    save_config(cfg, path);
    CHECK(load_config(path).params.tau == 17);
    std::filesystem::remove(path);
    CHECK_THROWS(load_config(path));
}

TEST_CASE("verdict JSON names statuses") {
    FrameVerdict v;
    v.status = FrameStatus::Forged;
    v.differences = {{1, 2, 3, 4}};
    v.rounds_used = 2;
    std::string json = frame_verdict_to_json(v);
    CHECK(json.find("\"forged\"") != std::string::npos);
    CHECK(json.find("\"rounds_used\": 2") != std::string::npos);

    proto::AuthResult r;
    r.status = proto::AuthResult::Status::Rejected;
    r.reason = proto::RejectReason::RevokedAfter;
    CHECK(auth_result_to_json(r).find("revoked-after") != std::string::npos);
}
