#include "docauth/services.hpp"

#include <httplib.h>

#include <cctype>
#include <chrono>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace docauth::net {

namespace {

std::vector<std::uint8_t> to_bytes(const std::string& s) {
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

std::string to_string_body(std::span<const std::uint8_t> bytes) {
    return std::string(reinterpret_cast<const char*>(bytes.data()),
                       bytes.size());
}

crypto::Signature sign_body(const crypto::EcdsaKeyPair& key,
                            std::span<const std::uint8_t> body) {
    return key.sign_digest(crypto::sha256(body));
}

bool verify_body(const crypto::EcdsaPublicKey& key,
                 std::span<const std::uint8_t> body,
                 const std::string& sig_hex) {
    std::vector<std::uint8_t> sig_bytes;
    try {
        sig_bytes = crypto::hex_decode(sig_hex);
    } catch (const std::invalid_argument&) {
        return false;
    }
    if (sig_bytes.size() != 64) return false;
    crypto::Signature sig{};
    std::copy(sig_bytes.begin(), sig_bytes.end(), sig.begin());
    return key.verify_digest(crypto::sha256(body), sig);
}

bool auth_key_known(const std::vector<proto::AuthKey>& keys,
                    const std::string& header_hex) {
    std::vector<std::uint8_t> provided;
    try {
        provided = crypto::hex_decode(header_hex);
    } catch (const std::invalid_argument&) {
        return false;
    }
    bool ok = false;
    for (const auto& k : keys)
        ok |= crypto::const_time_equal(k, provided);  // check all, no early out
    return ok;
}

bool valid_hex_id(const std::string& id) {
    if (id.size() != 64) return false;
    for (char c : id)
        if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// StorageStore
// ---------------------------------------------------------------------------

StorageStore::StorageStore(std::filesystem::path root)
    : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path StorageStore::blob_path(
    const std::string& hex_id) const {
    return root_ / (hex_id + ".blob");
}

void StorageStore::append_index(const std::string& hex_id, std::size_t size) {
    std::ofstream index(root_ / "index.txt", std::ios::app);
    auto now = std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    index << hex_id << " " << size << " " << now << "\n";
}

std::string StorageStore::put(std::span<const std::uint8_t> blob) {
    std::string id = crypto::hex_encode(crypto::sha256(blob));
    std::lock_guard lock(mutex_);
    auto path = blob_path(id);
    if (std::filesystem::exists(path)) return id;  // content addressed
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("blob write failed");
    append_index(id, blob.size());
    return id;
}

std::optional<std::vector<std::uint8_t>> StorageStore::get(
    const std::string& hex_id) const {
    if (!valid_hex_id(hex_id)) return std::nullopt;
    std::lock_guard lock(mutex_);
    auto path = blob_path(hex_id);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return blob;
}

void StorageStore::overwrite(const std::string& hex_id,
                             std::span<const std::uint8_t> blob) {
    if (!valid_hex_id(hex_id)) throw std::invalid_argument("bad blob id");
    std::lock_guard lock(mutex_);
    bool existed = std::filesystem::exists(blob_path(hex_id));
    std::ofstream out(blob_path(hex_id), std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size()));
    if (!existed) append_index(hex_id, blob.size());
}

std::vector<std::string> StorageStore::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        if (entry.path().extension() == ".blob")
            out.push_back(entry.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// StorageServer
// ---------------------------------------------------------------------------

struct StorageServer::Impl {
    StorageServerConfig cfg;
    StorageStore store;
    httplib::Server server;
    std::thread thread;
    int bound_port = 0;

    explicit Impl(StorageServerConfig c)
        : cfg(std::move(c)), store(cfg.root) {}

    std::string url_for(const std::string& id) const {
        return "http://" + cfg.advertised_host + ":" +
               std::to_string(bound_port) + "/docs/" + id;
    }

    void route() {
        server.Put("/docs", [this](const httplib::Request& req,
                                   httplib::Response& res) {
            if (!auth_key_known(cfg.auth_keys,
                                req.get_header_value("X-Auth-Key"))) {
                res.status = 401;
                res.set_content("unauthorized", "text/plain");
                return;
            }
            if (req.body.size() > cfg.max_blob_bytes) {
                res.status = 413;
                res.set_content("blob too large", "text/plain");
                return;
            }
            auto blob = to_bytes(req.body);
            std::string id = store.put(blob);
            std::string url = url_for(id);
            res.status = 200;
            res.set_header("X-Blob-Sig",
                           crypto::hex_encode(sign_body(
                               cfg.service_key, to_bytes(url))));
            res.set_content(url, "text/plain");
        });

        server.Get(R"(/docs/([0-9a-fA-F]{64}))",
                   [this](const httplib::Request& req,
                          httplib::Response& res) {
                       auto blob = store.get(req.matches[1].str());
                       if (!blob) {
                           res.status = 404;
                           res.set_content("not found", "text/plain");
                           return;
                       }
                       res.status = 200;
                       res.set_header(
                           "X-Blob-Sig",
                           crypto::hex_encode(
                               sign_body(cfg.service_key, *blob)));
                       res.set_content(to_string_body(*blob),
                                       "application/octet-stream");
                   });

        if (cfg.compromised_mode) {
            // Raw record replacement for scripted attacks.
            server.Put(R"(/admin/docs/([0-9a-fA-F]{64}))",
                       [this](const httplib::Request& req,
                              httplib::Response& res) {
                           store.overwrite(req.matches[1].str(),
                                           to_bytes(req.body));
                           res.status = 200;
                           res.set_content("overwritten", "text/plain");
                       });
        }
    }
};

StorageServer::StorageServer(StorageServerConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(cfg))) {
    impl_->route();
}

StorageServer::~StorageServer() { stop(); }

int StorageServer::start(int port) {
    if (port == 0) {
        impl_->bound_port = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port))
            throw std::runtime_error("cannot bind storage port");
        impl_->bound_port = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->bound_port;
}

void StorageServer::stop() {
    if (impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

int StorageServer::port() const { return impl_->bound_port; }

StorageStore& StorageServer::store() { return impl_->store; }

// ---------------------------------------------------------------------------
// TsaServer
// ---------------------------------------------------------------------------

struct TsaServer::Impl {
    TsaServerConfig cfg;
    httplib::Server server;
    std::thread thread;
    int bound_port = 0;
    std::mutex mutex;
    std::uint32_t last_time = 0;

    explicit Impl(TsaServerConfig c) : cfg(std::move(c)) {
        if (!cfg.clock) {
            cfg.clock = [] {
                return static_cast<std::uint32_t>(
                    std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count());
            };
        }
    }

    void route() {
        server.Post("/tsa/stamp", [this](const httplib::Request& req,
                                         httplib::Response& res) {
            if (req.body.size() != 64) {
                res.status = 400;
                res.set_content("malformed signature", "text/plain");
                return;
            }
            proto::TimestampToken token;
            std::copy_n(req.body.begin(), 64, token.s.begin());
            {
                std::lock_guard lock(mutex);
                last_time = std::max(last_time, cfg.clock());
                token.time = last_time;
            }
            token.sig = cfg.key.sign_digest(
                proto::timestamp_digest(token.s, token.time));
            res.status = 200;
            res.set_content(to_string_body(proto::encode_token(token)),
                            "application/octet-stream");
        });
    }
};

TsaServer::TsaServer(TsaServerConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(cfg))) {
    impl_->route();
}

TsaServer::~TsaServer() { stop(); }

int TsaServer::start(int port) {
    if (port == 0) {
        impl_->bound_port = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port))
            throw std::runtime_error("cannot bind TSA port");
        impl_->bound_port = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->bound_port;
}

void TsaServer::stop() {
    if (impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

int TsaServer::port() const { return impl_->bound_port; }

// ---------------------------------------------------------------------------
// HTTP clients
// ---------------------------------------------------------------------------

HttpStorageClient::HttpStorageClient(std::string host, int port,
                                     crypto::EcdsaPublicKey service_key)
    : host_(std::move(host)), port_(port),
      service_key_(std::move(service_key)) {}

std::string HttpStorageClient::put(const proto::AuthKey& auth_key,
                                   std::span<const std::uint8_t> blob) {
    httplib::Client client(host_, port_);
    httplib::Headers headers{
        {"X-Auth-Key", crypto::hex_encode(auth_key)}};
    auto res = client.Put("/docs", headers, to_string_body(blob),
                          "application/octet-stream");
    if (!res) throw std::runtime_error("storage unreachable");
    if (res->status != 200)
        throw std::runtime_error("storage put failed: " + res->body);
    if (!verify_body(service_key_, to_bytes(res->body),
                     res->get_header_value("X-Blob-Sig")))
        throw std::runtime_error("storage response failed channel binding");
    return res->body;
}

proto::StorageClient::GetResult HttpStorageClient::get(
    const std::string& hex_id) {
    GetResult out;
    httplib::Client client(host_, port_);
    auto res = client.Get("/docs/" + hex_id);
    if (!res) {
        out.status = GetResult::Status::ChannelError;
        return out;
    }
    if (res->status == 404) {
        out.status = GetResult::Status::NotFound;
        return out;
    }
    if (res->status != 200) {
        out.status = GetResult::Status::ChannelError;
        return out;
    }
    auto blob = to_bytes(res->body);
    if (!verify_body(service_key_, blob,
                     res->get_header_value("X-Blob-Sig"))) {
        out.status = GetResult::Status::ChannelError;
        return out;
    }
    out.status = GetResult::Status::Ok;
    out.blob = std::move(blob);
    return out;
}

HttpTsaClient::HttpTsaClient(std::string host, int port,
                             crypto::EcdsaPublicKey tsa_key)
    : host_(std::move(host)), port_(port), tsa_key_(std::move(tsa_key)) {}

proto::TimestampToken HttpTsaClient::stamp(const crypto::Signature& s) {
    httplib::Client client(host_, port_);
    auto res = client.Post("/tsa/stamp",
                           std::string(s.begin(), s.end()),
                           "application/octet-stream");
    if (!res) throw std::runtime_error("TSA unreachable");
    if (res->status != 200)
        throw std::runtime_error("TSA stamp failed: " + res->body);
    auto token = proto::decode_token(to_bytes(res->body));
    if (!token) throw std::runtime_error("malformed TSA token");
    if (token->s != s || !proto::verify_timestamp(tsa_key_, *token))
        throw std::runtime_error("TSA token failed verification");
    return *token;
}

// ---------------------------------------------------------------------------
// In-process service and clients
// ---------------------------------------------------------------------------

LocalStorageService::LocalStorageService(std::filesystem::path root,
                                         std::vector<proto::AuthKey> auth_keys,
                                         crypto::EcdsaKeyPair service_key,
                                         std::string advertised_host)
    : store_(std::move(root)), auth_keys_(std::move(auth_keys)),
      service_key_(std::move(service_key)),
      advertised_host_(std::move(advertised_host)) {}

std::string LocalStorageService::put(const proto::AuthKey& auth_key,
                                     std::span<const std::uint8_t> blob) {
    if (!auth_key_known(auth_keys_, crypto::hex_encode(auth_key)))
        throw std::runtime_error("storage put failed: unauthorized");
    if (blob.size() > max_blob_bytes)
        throw std::runtime_error("storage put failed: blob too large");
    std::lock_guard lock(mutex_);
    std::string id = store_.put(blob);
    return "http://" + advertised_host_ + "/docs/" + id;
}

std::optional<LocalStorageService::SignedBlob> LocalStorageService::get(
    const std::string& hex_id) {
    auto blob = store_.get(hex_id);
    if (!blob) return std::nullopt;
    SignedBlob out;
    out.sig = sign_body(service_key_, *blob);
    out.blob = std::move(*blob);
    return out;
}

LocalStorageClient::LocalStorageClient(LocalStorageService& service,
                                       crypto::EcdsaPublicKey pinned_key)
    : service_(service), pinned_key_(std::move(pinned_key)) {}

std::string LocalStorageClient::put(const proto::AuthKey& auth_key,
                                    std::span<const std::uint8_t> blob) {
    return service_.put(auth_key, blob);
}

proto::StorageClient::GetResult LocalStorageClient::get(
    const std::string& hex_id) {
    GetResult out;
    auto signed_blob = service_.get(hex_id);
    if (!signed_blob) {
        out.status = GetResult::Status::NotFound;
        return out;
    }
    if (tamper_in_transit) tamper_in_transit(signed_blob->blob);
    if (!pinned_key_.verify_digest(crypto::sha256(signed_blob->blob),
                                   signed_blob->sig)) {
        out.status = GetResult::Status::ChannelError;
        return out;
    }
    out.status = GetResult::Status::Ok;
    out.blob = std::move(signed_blob->blob);
    return out;
}

LocalTsaClient::LocalTsaClient(crypto::EcdsaKeyPair key,
                               std::uint32_t start_time)
    : key_(std::move(key)), now_(start_time) {}

proto::TimestampToken LocalTsaClient::stamp(const crypto::Signature& s) {
    proto::TimestampToken token;
    token.s = s;
    last_issued_ = std::max(last_issued_, now_);
    token.time = last_issued_;
    token.sig = key_.sign_digest(proto::timestamp_digest(s, token.time));
    return token;
}

}  // namespace docauth::net
