#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "docauth/crypto.hpp"
#include "docauth/detector.hpp"
#include "docauth/image.hpp"

namespace docauth::proto {

using AuthKey = std::array<std::uint8_t, 32>;

constexpr std::size_t kMaxPayloadBytes = 538;
constexpr std::size_t kMaxUrlBytes = 100;
constexpr std::size_t kMaxTextBytes = 200;
constexpr std::uint8_t kPayloadVersion = 1;

class PayloadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The record printed on the document. Multi-byte integers are big-endian on
// the wire; delta is carried as a fixed-point fraction of 10^4.
struct QrPayload {
    std::uint8_t version = kPayloadVersion;
    std::string url;                        // U
    crypto::Digest doc_hash{};              // h(d)
    crypto::SymmetricKey sym_key{};         // kappa_d
    std::string fallback_text;              // T, carried but unused here
    std::uint16_t tau = 0;
    std::uint16_t delta_fixed = 0;          // delta * 10^4
    std::uint16_t phi = 0;                  // degrees
    std::uint16_t sigma_w = 0;
    std::uint16_t sigma_h = 0;
    crypto::Digest issuer_fingerprint{};
    std::uint32_t time = 0;                 // seconds since epoch
    crypto::Signature signature{};          // S
    crypto::Signature timestamp_sig{};      // S'

    DetectionParams detection_params(int k, int max_rounds) const;
    static QrPayload with_params(const DetectionParams& params);

    bool operator==(const QrPayload&) const = default;
};

// width (4B BE) || height (4B BE) || row-major 8-bit pixels.
std::vector<std::uint8_t> canonical_image_bytes(const GrayImage& d);
crypto::Digest canonical_hash(const GrayImage& d);
std::optional<GrayImage> image_from_canonical_bytes(
    std::span<const std::uint8_t> bytes);

// SHA-256 over (U, h(d), kappa_d, T, tau, delta, phi, sigma), each field
// prefixed with its 2-byte big-endian length. S signs this digest.
crypto::Digest signed_message_digest(const QrPayload& p);

std::vector<std::uint8_t> encode_payload(const QrPayload& p);
QrPayload decode_payload(std::span<const std::uint8_t> bytes);

// Hex sidecar format (.dqr files): hex of the encoded payload, one line.
std::string payload_to_hex(const QrPayload& p);
QrPayload payload_from_hex(const std::string& hex_line);

// ---------------------------------------------------------------------------
// Timestamps and revocation
// ---------------------------------------------------------------------------

struct TimestampToken {
    crypto::Signature s{};         // the issuer signature being stamped
    std::uint32_t time = 0;
    crypto::Signature sig{};       // Sign_kTS(S, time)

    bool operator==(const TimestampToken&) const = default;
};

crypto::Digest timestamp_digest(const crypto::Signature& s,
                                std::uint32_t time);
bool verify_timestamp(const crypto::EcdsaPublicKey& tsa_key,
                      const TimestampToken& token);

// Wire form: S || time (4B BE) || S' (132 bytes total).
std::vector<std::uint8_t> encode_token(const TimestampToken& token);
std::optional<TimestampToken> decode_token(
    std::span<const std::uint8_t> bytes);

struct CrlEntry {
    crypto::Digest key_fingerprint{};
    std::uint32_t revoked_at = 0;
};

// Append-only revocation list.
class Crl {
public:
    // Throws std::invalid_argument on a duplicate fingerprint.
    void revoke(const crypto::Digest& fingerprint, std::uint32_t time);
    std::optional<std::uint32_t> revoked_at(
        const crypto::Digest& fingerprint) const;
    const std::vector<CrlEntry>& entries() const { return entries_; }

    // One entry per line: hex(fingerprint) SPACE decimal(revoked_at).
    std::string to_text() const;
    static Crl from_text(const std::string& text);

private:
    std::vector<CrlEntry> entries_;
};

// Pinned public keys: issuer keys by fingerprint plus the time-stamping- and
// storage-service keys.
class TrustStore {
public:
    void add_issuer(const crypto::EcdsaPublicKey& key);
    std::optional<crypto::EcdsaPublicKey> issuer(
        const crypto::Digest& fingerprint) const;

    crypto::EcdsaPublicKey tsa_key;
    crypto::EcdsaPublicKey storage_key;

    // Directory layout: <hex fingerprint>.pem per issuer, tsa.pem,
    // storage.pem.
    static TrustStore load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

private:
    std::map<std::string, crypto::EcdsaPublicKey> issuers_;
};

// ---------------------------------------------------------------------------
// Service client interfaces (implemented over HTTP and in-process in net)
// ---------------------------------------------------------------------------

class StorageClient {
public:
    struct GetResult {
        enum class Status { Ok, NotFound, ChannelError };
        Status status = Status::ChannelError;
        std::vector<std::uint8_t> blob;
    };

    virtual ~StorageClient() = default;
    // Returns the public URL of the stored blob; throws on failure.
    virtual std::string put(const AuthKey& auth_key,
                            std::span<const std::uint8_t> blob) = 0;
    virtual GetResult get(const std::string& hex_id) = 0;
};

class TsaClient {
public:
    virtual ~TsaClient() = default;
    // Throws on failure; implementations verify the token before returning.
    virtual TimestampToken stamp(const crypto::Signature& s) = 0;
};

// Extracts the hex id from ".../docs/<hex id>" URLs.
std::optional<std::string> blob_id_from_url(const std::string& url);

// ---------------------------------------------------------------------------
// Issuance and verification
// ---------------------------------------------------------------------------

struct IssuerContext {
    crypto::EcdsaKeyPair key;
    AuthKey auth_key{};
};

struct IssueResult {
    std::vector<std::uint8_t> payload_bytes;
    std::string url;
};

// Generates a fresh document key, uploads the encrypted reference, signs the
// payload tuple, obtains a timestamp, and returns the encoded payload. No
// per-document state is retained. Throws on storage or TSA failure.
IssueResult issue(const GrayImage& d, const IssuerContext& issuer,
                  const DetectionParams& params, StorageClient& storage,
                  TsaClient& tsa);

enum class RejectReason {
    UnknownIssuer,
    BadSignature,
    BadTimestamp,
    RevokedAfter,
    FetchFailed,
    DecryptFailed,
    HashMismatch,
    DocumentNotFound,
    MalformedPayload,
};

std::string to_string(RejectReason reason);

struct AuthResult {
    enum class Status { Authentic, Forged, Rejected };
    Status status = Status::Rejected;
    std::optional<RejectReason> reason;     // set iff Rejected
    std::vector<Rect> rects;                // set iff Forged
    std::optional<VideoVerdict> video;      // set iff image analysis ran
};

struct VerifierOptions {
    int k = 3;
    int max_rounds = 2;
    DetectorConfig detector;
};

// The end-user app pipeline, checks strictly in order: payload decode,
// issuer fingerprint lookup, signature S, timestamp S', CRL coherence,
// fetch, decrypt, reference hash, then the video comparison.
AuthResult verify(FrameStream frames,
                  std::span<const std::uint8_t> payload_bytes,
                  const TrustStore& trust, const Crl& crl,
                  StorageClient& storage,
                  const VerifierOptions& options = {});

}  // namespace docauth::proto
