#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "docauth/crypto.hpp"
#include "docauth/protocol.hpp"

namespace docauth::net {

// File-backed content-addressed blob store: one <hex id>.blob per record
// plus an index file. Ids are SHA-256 of the blob bytes.
class StorageStore {
public:
    explicit StorageStore(std::filesystem::path root);

    // Returns the hex id; idempotent for identical blobs.
    std::string put(std::span<const std::uint8_t> blob);
    std::optional<std::vector<std::uint8_t>> get(
        const std::string& hex_id) const;
    // Places arbitrary bytes under an arbitrary id, breaking content
    // addressing; reachable only through a compromised-mode server or a
    // test harness holding the store directly.
    void overwrite(const std::string& hex_id,
                   std::span<const std::uint8_t> blob);
    std::vector<std::string> ids() const;

private:
    std::filesystem::path blob_path(const std::string& hex_id) const;
    void append_index(const std::string& hex_id, std::size_t size);

    std::filesystem::path root_;
    mutable std::mutex mutex_;
};

constexpr std::size_t kDefaultBlobCap = 32ull << 20;  // 32 MiB

struct StorageServerConfig {
    std::filesystem::path root;
    std::vector<proto::AuthKey> auth_keys;
    crypto::EcdsaKeyPair service_key;
    std::string advertised_host = "127.0.0.1";
    std::size_t max_blob_bytes = kDefaultBlobCap;
    bool compromised_mode = false;
};

// PUT /docs (header X-Auth-Key) -> URL; GET /docs/<hex id> -> blob. Every
// 200 body is signed over its SHA-256 in the X-Blob-Sig header so clients
// can bind responses to the pinned service key.
class StorageServer {
public:
    explicit StorageServer(StorageServerConfig cfg);
    ~StorageServer();
    StorageServer(const StorageServer&) = delete;
    StorageServer& operator=(const StorageServer&) = delete;

    // port 0 binds an ephemeral port; returns the bound port. Serves on a
    // background thread until stop().
    int start(int port = 0);
    void stop();
    int port() const;
    StorageStore& store();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct TsaServerConfig {
    crypto::EcdsaKeyPair key;
    // Overridable for deterministic tests; defaults to the wall clock.
    std::function<std::uint32_t()> clock;
};

// POST /tsa/stamp with a 64-byte signature body -> 132-byte token
// S || time || Sign_kTS(S, time). Issued times never decrease.
class TsaServer {
public:
    explicit TsaServer(TsaServerConfig cfg);
    ~TsaServer();
    TsaServer(const TsaServer&) = delete;
    TsaServer& operator=(const TsaServer&) = delete;

    int start(int port = 0);
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// HTTP client with a pinned service key; rejects responses whose
// channel-binding signature does not verify.
class HttpStorageClient : public proto::StorageClient {
public:
    HttpStorageClient(std::string host, int port,
                      crypto::EcdsaPublicKey service_key);

    std::string put(const proto::AuthKey& auth_key,
                    std::span<const std::uint8_t> blob) override;
    GetResult get(const std::string& hex_id) override;

private:
    std::string host_;
    int port_;
    crypto::EcdsaPublicKey service_key_;
};

class HttpTsaClient : public proto::TsaClient {
public:
    HttpTsaClient(std::string host, int port, crypto::EcdsaPublicKey tsa_key);

    proto::TimestampToken stamp(const crypto::Signature& s) override;

private:
    std::string host_;
    int port_;
    crypto::EcdsaPublicKey tsa_key_;
};

// In-process storage service sharing the server's semantics (auth check,
// content addressing, response signing) without sockets; used by the
// evaluation harness and scenario tests.
class LocalStorageService {
public:
    LocalStorageService(std::filesystem::path root,
                        std::vector<proto::AuthKey> auth_keys,
                        crypto::EcdsaKeyPair service_key,
                        std::string advertised_host = "local");

    StorageStore& store() { return store_; }
    const crypto::EcdsaKeyPair& service_key() const { return service_key_; }

    // Mirrors PUT /docs; throws on bad auth key or oversize blob.
    std::string put(const proto::AuthKey& auth_key,
                    std::span<const std::uint8_t> blob);
    // Mirrors GET /docs/<id>: blob plus signature over its digest.
    struct SignedBlob {
        std::vector<std::uint8_t> blob;
        crypto::Signature sig;
    };
    std::optional<SignedBlob> get(const std::string& hex_id);

    std::size_t max_blob_bytes = kDefaultBlobCap;

private:
    StorageStore store_;
    std::vector<proto::AuthKey> auth_keys_;
    crypto::EcdsaKeyPair service_key_;
    std::string advertised_host_;
    std::mutex mutex_;
};

class LocalStorageClient : public proto::StorageClient {
public:
    LocalStorageClient(LocalStorageService& service,
                       crypto::EcdsaPublicKey pinned_key);

    std::string put(const proto::AuthKey& auth_key,
                    std::span<const std::uint8_t> blob) override;
    GetResult get(const std::string& hex_id) override;

    // Test hook: corrupts response bytes in transit, as a network
    // adversary would.
    std::function<void(std::vector<std::uint8_t>&)> tamper_in_transit;

private:
    LocalStorageService& service_;
    crypto::EcdsaPublicKey pinned_key_;
};

class LocalTsaClient : public proto::TsaClient {
public:
    explicit LocalTsaClient(crypto::EcdsaKeyPair key,
                            std::uint32_t start_time = 1'700'000'000);

    proto::TimestampToken stamp(const crypto::Signature& s) override;
    void advance(std::uint32_t seconds) { now_ += seconds; }
    std::uint32_t now() const { return now_; }

private:
    crypto::EcdsaKeyPair key_;
    std::uint32_t now_;
    std::uint32_t last_issued_ = 0;
};

}  // namespace docauth::net
