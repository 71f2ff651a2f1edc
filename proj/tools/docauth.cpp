// docauth: paper-document authentication toolkit.
//
// Issues signed QR payloads for document images, runs the storage and
// time-stamping services, and verifies camera frame sequences against the
// encrypted reference documents.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "docauth/config.hpp"
#include "docauth/harness.hpp"
#include "docauth/image_io.hpp"
#include "docauth/protocol.hpp"
#include "docauth/services.hpp"

namespace fs = std::filesystem;
using namespace docauth;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open");
    out << body;
}

proto::AuthKey auth_key_from_hex(const std::string& hex) {
    auto bytes = crypto::hex_decode(hex);
    if (bytes.size() != 32)
        throw std::runtime_error("auth key must be 32 hex-encoded bytes");
    proto::AuthKey key{};
    std::copy(bytes.begin(), bytes.end(), key.begin());
    return key;
}

// Image files in a directory, in lexicographic order.
std::vector<fs::path> frame_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        auto ext = entry.path().extension();
        if (ext == ".png" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error(dir.string() + ": no .png/.pgm frames");
    return files;
}

FrameStream stream_from_dir(const fs::path& dir) {
    auto files = std::make_shared<std::vector<fs::path>>(frame_files(dir));
    auto index = std::make_shared<std::size_t>(0);
    return [files, index]() -> std::optional<GrayImage> {
        if (*index >= files->size()) return std::nullopt;
        return load_image((*files)[(*index)++]);
    };
}

struct ServiceEndpoint {
    std::string host;
    int port = 0;
};

ServiceEndpoint parse_endpoint(const std::string& url) {
    // Accepts host:port or http://host:port.
    std::string rest = url;
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    auto slash = rest.find('/');
    if (slash != std::string::npos) rest = rest.substr(0, slash);
    auto colon = rest.find(':');
    if (colon == std::string::npos)
        throw std::runtime_error("endpoint must be host:port");
    return {rest.substr(0, colon), std::stoi(rest.substr(colon + 1))};
}

int run_issue(const fs::path& doc_path, const fs::path& key_path,
              const std::string& auth_key_hex, const std::string& storage_url,
              const std::string& tsa_url, const fs::path& trust_dir,
              const fs::path& config_path, const fs::path& out_path) {
    Config cfg = config_path.empty() ? Config{} : load_config(config_path);
    GrayImage doc = load_image(doc_path);

    proto::IssuerContext issuer;
    issuer.key = crypto::EcdsaKeyPair::from_private_pem(read_file(key_path));
    issuer.auth_key = auth_key_from_hex(auth_key_hex);

    proto::TrustStore trust = proto::TrustStore::load(trust_dir);
    auto storage_ep = parse_endpoint(storage_url);
    auto tsa_ep = parse_endpoint(tsa_url);
    net::HttpStorageClient storage(storage_ep.host, storage_ep.port,
                                   trust.storage_key);
    net::HttpTsaClient tsa(tsa_ep.host, tsa_ep.port, trust.tsa_key);

    proto::IssueResult result =
        proto::issue(doc, issuer, cfg.params, storage, tsa);
    write_file(out_path, crypto::hex_encode(result.payload_bytes) + "\n");
    std::cout << "stored: " << result.url << "\n"
              << "payload: " << out_path.string() << " ("
              << result.payload_bytes.size() << " bytes)\n";
    return 0;
}

int run_verify(const fs::path& dqr_path, const fs::path& frames_dir,
               const fs::path& trust_dir, const fs::path& crl_path,
               const fs::path& config_path, const fs::path& json_out) {
    Config cfg = config_path.empty() ? Config{} : load_config(config_path);
    proto::TrustStore trust = proto::TrustStore::load(trust_dir);
    proto::Crl crl;
    if (!crl_path.empty() && fs::exists(crl_path))
        crl = proto::Crl::from_text(read_file(crl_path));

    auto payload = proto::payload_from_hex(read_file(dqr_path));
    auto payload_bytes = proto::encode_payload(payload);

    auto storage_ep = parse_endpoint(payload.url);
    net::HttpStorageClient storage(storage_ep.host, storage_ep.port,
                                   trust.storage_key);

    proto::VerifierOptions options;
    options.k = cfg.params.k;
    options.max_rounds = cfg.params.max_rounds;
    options.detector = cfg.detector;

    proto::AuthResult result = proto::verify(
        stream_from_dir(frames_dir), payload_bytes, trust, crl, storage,
        options);

    std::string json = auth_result_to_json(result);
    if (!json_out.empty()) write_file(json_out, json + "\n");
    std::cout << json << "\n";
    return result.status == proto::AuthResult::Status::Authentic ? 0 : 1;
}

int run_compare(const fs::path& reference_path, const fs::path& frames_dir,
                const fs::path& config_path, const fs::path& out_dir) {
    Config cfg = config_path.empty() ? Config{} : load_config(config_path);
    GrayImage reference = load_image(reference_path);

    if (!out_dir.empty()) fs::create_directories(out_dir);
    auto files = frame_files(frames_dir);
    std::vector<FrameVerdict> verdicts;
    int index = 0;
    FrameStream stream = [&]() -> std::optional<GrayImage> {
        if (index >= static_cast<int>(files.size())) return std::nullopt;
        return load_image(files[index++]);
    };

    // analyze_video drives the comparison; annotate analyzed frames after.
    VideoVerdict video =
        analyze_video(reference, stream, cfg.params, cfg.detector);

    if (!out_dir.empty()) {
        for (int i = 0; i < video.frames_analyzed; ++i) {
            GrayImage frame = load_image(files[i]);
            FrameVerdict v = compare_frame(reference, frame, cfg.params,
                                           cfg.detector);
            // Rects live in reference coordinates; annotate the aligned view.
            auto h = find_homography(reference, frame, cfg.params.phi_deg,
                                     cfg.detector.geometry,
                                     cfg.detector.geometry.min_inliers);
            GrayImage view = h ? warp(frame, *h, reference.width(),
                                      reference.height())
                               : frame;
            save_png(annotate(view, v.differences),
                     out_dir / ("frame_" + std::to_string(i) + ".png"));
        }
        write_file(out_dir / "verdict.json", video_verdict_to_json(video) + "\n");
    }
    std::cout << video_verdict_to_json(video) << "\n";
    return video.final.status == FrameStatus::Authentic ? 0 : 1;
}

int run_gen_corpus(const fs::path& out_dir, std::uint64_t seed,
                   int docs_per_template) {
    fs::create_directories(out_dir);
    std::ostringstream manifest;
    manifest << "[\n";
    bool first = true;
    for (int i = 0; i < 4 * docs_per_template; ++i) {
        int template_id = i / docs_per_template + 1;
        auto doc = bench::generate_document(seed * 131 + i, template_id);
        std::mt19937_64 rng(seed * 977 + i);
        auto forged = bench::inject_forgery(
            doc, static_cast<bench::ForgeryKind>(i % 5), rng);
        char name[64];
        std::snprintf(name, sizeof name, "doc%02d", i);
        save_png(doc.image, out_dir / (std::string(name) + ".png"));
        save_png(forged.image, out_dir / (std::string(name) + "_forged.png"));
        if (!first) manifest << ",\n";
        first = false;
        manifest << "  {\"doc\": \"" << name << "\", \"template\": "
                 << template_id << ", \"forgery\": \""
                 << bench::to_string(forged.spec.kind)
                 << "\", \"ground_truth\": [" << forged.spec.ground_truth.x1
                 << ", " << forged.spec.ground_truth.y1 << ", "
                 << forged.spec.ground_truth.x2 << ", "
                 << forged.spec.ground_truth.y2 << "], \"magnitude\": "
                 << forged.spec.magnitude << "}";
    }
    manifest << "\n]\n";
    write_file(out_dir / "corpus.json", manifest.str());
    std::cout << "wrote " << 4 * docs_per_template << " documents to "
              << out_dir.string() << "\n";
    return 0;
}

int run_eval(const fs::path& report_path, std::uint64_t seed, int jobs,
             const fs::path& config_path) {
    Config cfg = config_path.empty() ? Config{} : load_config(config_path);
    bench::CorpusSpec corpus;
    corpus.master_seed = seed;
    bench::EvalReport report =
        bench::evaluate(corpus, cfg.params, cfg.detector, jobs);
    std::cout << bench::report_to_table(report);
    if (!report_path.empty())
        write_file(report_path, bench::report_to_json(report) + "\n");
    bool pass = report.recall == 1.0 && report.false_alarms == 0;
    return pass ? 0 : 1;
}

int run_serve_storage(const fs::path& root, int port,
                      const fs::path& keys_path, const fs::path& key_path,
                      bool compromised) {
    net::StorageServerConfig cfg;
    cfg.root = root;
    cfg.compromised_mode = compromised;
    cfg.service_key =
        key_path.empty()
            ? crypto::EcdsaKeyPair::generate()
            : crypto::EcdsaKeyPair::from_private_pem(read_file(key_path));
    if (!keys_path.empty()) {
        std::istringstream in(read_file(keys_path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            cfg.auth_keys.push_back(auth_key_from_hex(line));
        }
    }
    std::cout << "storage service public key:\n"
              << cfg.service_key.public_key().pem();
    net::StorageServer server(std::move(cfg));
    int bound = server.start(port);
    std::cout << "storage listening on 127.0.0.1:" << bound << "\n";
    pause();
    return 0;
}

int run_serve_tsa(const fs::path& key_path, int port) {
    net::TsaServerConfig cfg;
    cfg.key = key_path.empty()
                  ? crypto::EcdsaKeyPair::generate()
                  : crypto::EcdsaKeyPair::from_private_pem(read_file(key_path));
    std::cout << "time-stamping public key:\n" << cfg.key.public_key().pem();
    net::TsaServer server(std::move(cfg));
    int bound = server.start(port);
    std::cout << "tsa listening on 127.0.0.1:" << bound << "\n";
    pause();
    return 0;
}

int run_revoke(const fs::path& crl_path, const std::string& fingerprint_hex,
               std::uint32_t time) {
    proto::Crl crl;
    if (fs::exists(crl_path)) crl = proto::Crl::from_text(read_file(crl_path));
    auto bytes = crypto::hex_decode(fingerprint_hex);
    if (bytes.size() != 32)
        throw std::runtime_error("fingerprint must be 32 hex-encoded bytes");
    crypto::Digest fp{};
    std::copy(bytes.begin(), bytes.end(), fp.begin());
    crl.revoke(fp, time);
    write_file(crl_path, crl.to_text());
    std::cout << "revoked " << fingerprint_hex << " at " << time << "\n";
    return 0;
}

int run_keygen(const fs::path& out_path, const fs::path& pub_path) {
    auto key = crypto::EcdsaKeyPair::generate();
    write_file(out_path, key.private_pem());
    if (!pub_path.empty()) write_file(pub_path, key.public_key().pem());
    std::cout << "fingerprint: "
              << crypto::hex_encode(key.public_key().fingerprint()) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"docauth: cryptographic paper-document authentication"};
    app.require_subcommand(1);

    // issue
    fs::path doc_path, key_path, out_path = "payload.dqr", trust_dir;
    fs::path config_path;
    std::string auth_key_hex, storage_url, tsa_url;
    auto* issue = app.add_subcommand("issue", "sign and publish a document");
    issue->add_option("--doc", doc_path, "reference image (.png/.pgm)")
        ->required();
    issue->add_option("--key", key_path, "issuer private key PEM")->required();
    issue->add_option("--auth-key", auth_key_hex, "storage credential (hex)")
        ->required();
    issue->add_option("--storage", storage_url, "storage host:port")
        ->required();
    issue->add_option("--tsa", tsa_url, "time-stamping host:port")->required();
    issue->add_option("--trust", trust_dir, "trust store directory")
        ->required();
    issue->add_option("--params", config_path, "config JSON");
    issue->add_option("--out", out_path, "payload sidecar output (.dqr)");

    // verify
    fs::path dqr_path, frames_dir, crl_path, json_out;
    auto* verify = app.add_subcommand("verify",
                                      "verify a frame directory end to end");
    verify->add_option("--dqr", dqr_path, "payload sidecar (.dqr)")
        ->required();
    verify->add_option("--frames", frames_dir, "directory of frames")
        ->required();
    verify->add_option("--trust", trust_dir, "trust store directory")
        ->required();
    verify->add_option("--crl", crl_path, "CRL file");
    verify->add_option("--params", config_path, "config JSON");
    verify->add_option("--json", json_out, "write the result JSON here");

    // compare
    fs::path reference_path, out_dir;
    auto* compare = app.add_subcommand(
        "compare", "image comparison only, no cryptographic checks");
    compare->add_option("--reference", reference_path, "reference image")
        ->required();
    compare->add_option("--frames", frames_dir, "directory of frames")
        ->required();
    compare->add_option("--params", config_path, "config JSON");
    compare->add_option("--out-dir", out_dir, "annotated frame output");

    // gen-corpus
    std::uint64_t seed = 2024;
    int docs_per_template = 4;
    auto* gen = app.add_subcommand("gen-corpus",
                                   "generate the synthetic document corpus");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--seed", seed, "master seed");
    gen->add_option("--per-template", docs_per_template,
                    "documents per template");

    // eval
    fs::path report_path;
    int jobs = 0;
    auto* eval = app.add_subcommand("eval",
                                    "run the full evaluation pipeline");
    eval->add_option("--report", report_path, "write the JSON report here");
    eval->add_option("--seed", seed, "master seed");
    eval->add_option("--jobs", jobs, "worker threads (0 = all cores)");
    eval->add_option("--params", config_path, "config JSON");

    // serve-storage
    fs::path root = "storage-root", keys_path;
    int port = 0;
    bool compromised = false;
    auto* serve_storage =
        app.add_subcommand("serve-storage", "run the storage service");
    serve_storage->add_option("--root", root, "blob directory")->required();
    serve_storage->add_option("--port", port, "TCP port (0 = ephemeral)");
    serve_storage->add_option("--keys", keys_path,
                              "file of hex auth keys, one per line");
    serve_storage->add_option("--key", key_path, "service private key PEM");
    serve_storage->add_flag("--compromised", compromised,
                            "enable the record-overwrite endpoint");

    // serve-tsa
    auto* serve_tsa =
        app.add_subcommand("serve-tsa", "run the time-stamping service");
    serve_tsa->add_option("--key", key_path, "private key PEM");
    serve_tsa->add_option("--port", port, "TCP port (0 = ephemeral)");

    // revoke
    std::string fingerprint_hex;
    std::uint32_t revoke_time = 0;
    auto* revoke = app.add_subcommand("revoke",
                                      "append an issuer key to the CRL");
    revoke->add_option("--crl", crl_path, "CRL file")->required();
    revoke->add_option("--fingerprint", fingerprint_hex,
                       "issuer key fingerprint (hex)")
        ->required();
    revoke->add_option("--time", revoke_time, "revocation time (unix seconds)")
        ->required();

    // keygen
    fs::path pub_path;
    auto* keygen = app.add_subcommand("keygen", "generate a P-256 key pair");
    keygen->add_option("--out", out_path, "private key PEM output")
        ->required();
    keygen->add_option("--pub", pub_path, "public key PEM output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*issue)
            return run_issue(doc_path, key_path, auth_key_hex, storage_url,
                             tsa_url, trust_dir, config_path, out_path);
        if (*verify)
            return run_verify(dqr_path, frames_dir, trust_dir, crl_path,
                              config_path, json_out);
        if (*compare)
            return run_compare(reference_path, frames_dir, config_path,
                               out_dir);
        if (*gen) return run_gen_corpus(out_dir, seed, docs_per_template);
        if (*eval) return run_eval(report_path, seed, jobs, config_path);
        if (*serve_storage)
            return run_serve_storage(root, port, keys_path, key_path,
                                     compromised);
        if (*serve_tsa) return run_serve_tsa(key_path, port);
        if (*revoke) return run_revoke(crl_path, fingerprint_hex, revoke_time);
        if (*keygen) return run_keygen(out_path, pub_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
