#include "docauth/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace docauth::proto {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 |
                                                     data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    template <std::size_t N>
    void bytes(std::array<std::uint8_t, N>& out) {
        need(N);
        std::copy_n(data_.data() + pos_, N, out.begin());
        pos_ += N;
    }
    bool exhausted() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) throw PayloadError("truncated payload");
    }
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

// Length-prefixed field concatenation for the signed tuple.
void append_field(std::vector<std::uint8_t>& out,
                  std::span<const std::uint8_t> field) {
    if (field.size() > 0xFFFF) throw PayloadError("oversize field");
    put_u16(out, static_cast<std::uint16_t>(field.size()));
    out.insert(out.end(), field.begin(), field.end());
}

void append_field_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    std::uint8_t buf[2] = {static_cast<std::uint8_t>(v >> 8),
                           static_cast<std::uint8_t>(v & 0xFF)};
    append_field(out, std::span<const std::uint8_t>(buf, 2));
}

}  // namespace

DetectionParams QrPayload::detection_params(int k, int max_rounds) const {
    DetectionParams p;
    p.tau = tau;
    p.delta = delta_fixed / 10000.0;
    p.phi_deg = phi;
    p.sigma_w = sigma_w;
    p.sigma_h = sigma_h;
    p.k = k;
    p.max_rounds = max_rounds;
    return p;
}

QrPayload QrPayload::with_params(const DetectionParams& params) {
    params.validate();
    QrPayload p;
    p.tau = static_cast<std::uint16_t>(params.tau);
    p.delta_fixed =
        static_cast<std::uint16_t>(std::lround(params.delta * 10000.0));
    p.phi = static_cast<std::uint16_t>(std::lround(params.phi_deg));
    p.sigma_w = static_cast<std::uint16_t>(params.sigma_w);
    p.sigma_h = static_cast<std::uint16_t>(params.sigma_h);
    return p;
}

std::vector<std::uint8_t> canonical_image_bytes(const GrayImage& d) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + d.pixels().size());
    put_u32(out, static_cast<std::uint32_t>(d.width()));
    put_u32(out, static_cast<std::uint32_t>(d.height()));
    out.insert(out.end(), d.pixels().begin(), d.pixels().end());
    return out;
}

crypto::Digest canonical_hash(const GrayImage& d) {
    return crypto::sha256(canonical_image_bytes(d));
}

std::optional<GrayImage> image_from_canonical_bytes(
    std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) return std::nullopt;
    std::uint32_t w = 0, h = 0;
    for (int i = 0; i < 4; ++i) w = w << 8 | bytes[i];
    for (int i = 4; i < 8; ++i) h = h << 8 | bytes[i];
    if (w == 0 || h == 0 || w > 65535 || h > 65535) return std::nullopt;
    if (bytes.size() != 8 + static_cast<std::size_t>(w) * h)
        return std::nullopt;
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    std::copy(bytes.begin() + 8, bytes.end(), img.pixels().begin());
    return img;
}

crypto::Digest signed_message_digest(const QrPayload& p) {
    if (p.url.size() > kMaxUrlBytes) throw PayloadError("oversize URL");
    if (p.fallback_text.size() > kMaxTextBytes)
        throw PayloadError("oversize fallback text");
    std::vector<std::uint8_t> buf;
    append_field(buf, std::span(
                          reinterpret_cast<const std::uint8_t*>(p.url.data()),
                          p.url.size()));
    append_field(buf, p.doc_hash);
    append_field(buf, p.sym_key);
    append_field(buf,
                 std::span(reinterpret_cast<const std::uint8_t*>(
                               p.fallback_text.data()),
                           p.fallback_text.size()));
    append_field_u16(buf, p.tau);
    append_field_u16(buf, p.delta_fixed);
    append_field_u16(buf, p.phi);
    std::uint8_t sigma[4] = {static_cast<std::uint8_t>(p.sigma_w >> 8),
                             static_cast<std::uint8_t>(p.sigma_w & 0xFF),
                             static_cast<std::uint8_t>(p.sigma_h >> 8),
                             static_cast<std::uint8_t>(p.sigma_h & 0xFF)};
    append_field(buf, std::span<const std::uint8_t>(sigma, 4));
    return crypto::sha256(buf);
}

std::vector<std::uint8_t> encode_payload(const QrPayload& p) {
    if (p.url.size() > kMaxUrlBytes) throw PayloadError("oversize URL");
    if (p.fallback_text.size() > kMaxTextBytes)
        throw PayloadError("oversize fallback text");
    if (p.delta_fixed > 10000) throw PayloadError("delta out of range");

    std::vector<std::uint8_t> out;
    out.reserve(kMaxPayloadBytes);
    out.push_back(p.version);
    put_u16(out, static_cast<std::uint16_t>(p.url.size()));
    out.insert(out.end(), p.url.begin(), p.url.end());
    out.insert(out.end(), p.doc_hash.begin(), p.doc_hash.end());
    out.insert(out.end(), p.sym_key.begin(), p.sym_key.end());
    put_u16(out, static_cast<std::uint16_t>(p.fallback_text.size()));
    out.insert(out.end(), p.fallback_text.begin(), p.fallback_text.end());
    put_u16(out, p.tau);
    put_u16(out, p.delta_fixed);
    put_u16(out, p.phi);
    put_u16(out, p.sigma_w);
    put_u16(out, p.sigma_h);
    out.insert(out.end(), p.issuer_fingerprint.begin(),
               p.issuer_fingerprint.end());
    put_u32(out, p.time);
    out.insert(out.end(), p.signature.begin(), p.signature.end());
    out.insert(out.end(), p.timestamp_sig.begin(), p.timestamp_sig.end());

    if (out.size() > kMaxPayloadBytes)
        throw PayloadError("payload exceeds QR byte budget");
    return out;
}

QrPayload decode_payload(std::span<const std::uint8_t> bytes) {
    if (bytes.size() > kMaxPayloadBytes) throw PayloadError("oversize payload");
    ByteReader r(bytes);
    QrPayload p;
    p.version = r.u8();
    if (p.version != kPayloadVersion) throw PayloadError("unknown version");
    std::uint16_t url_len = r.u16();
    if (url_len > kMaxUrlBytes) throw PayloadError("oversize URL");
    p.url = r.str(url_len);
    r.bytes(p.doc_hash);
    r.bytes(p.sym_key);
    std::uint16_t text_len = r.u16();
    if (text_len > kMaxTextBytes) throw PayloadError("oversize fallback text");
    p.fallback_text = r.str(text_len);
    p.tau = r.u16();
    p.delta_fixed = r.u16();
    if (p.delta_fixed > 10000) throw PayloadError("delta out of range");
    p.phi = r.u16();
    p.sigma_w = r.u16();
    p.sigma_h = r.u16();
    r.bytes(p.issuer_fingerprint);
    p.time = r.u32();
    r.bytes(p.signature);
    r.bytes(p.timestamp_sig);
    if (!r.exhausted()) throw PayloadError("trailing bytes");
    return p;
}

std::string payload_to_hex(const QrPayload& p) {
    return crypto::hex_encode(encode_payload(p));
}

QrPayload payload_from_hex(const std::string& hex_line) {
    std::string trimmed = hex_line;
    while (!trimmed.empty() &&
           (trimmed.back() == '\n' || trimmed.back() == '\r' ||
            trimmed.back() == ' '))
        trimmed.pop_back();
    std::vector<std::uint8_t> bytes;
    try {
        bytes = crypto::hex_decode(trimmed);
    } catch (const std::invalid_argument& e) {
        throw PayloadError(e.what());
    }
    return decode_payload(bytes);
}

// ---------------------------------------------------------------------------
// Timestamps and revocation
// ---------------------------------------------------------------------------

crypto::Digest timestamp_digest(const crypto::Signature& s,
                                std::uint32_t time) {
    std::vector<std::uint8_t> buf(s.begin(), s.end());
    put_u32(buf, time);
    return crypto::sha256(buf);
}

bool verify_timestamp(const crypto::EcdsaPublicKey& tsa_key,
                      const TimestampToken& token) {
    return tsa_key.verify_digest(timestamp_digest(token.s, token.time),
                                 token.sig);
}

std::vector<std::uint8_t> encode_token(const TimestampToken& token) {
    std::vector<std::uint8_t> out(token.s.begin(), token.s.end());
    put_u32(out, token.time);
    out.insert(out.end(), token.sig.begin(), token.sig.end());
    return out;
}

std::optional<TimestampToken> decode_token(
    std::span<const std::uint8_t> bytes) {
    if (bytes.size() != 64 + 4 + 64) return std::nullopt;
    TimestampToken token;
    std::copy_n(bytes.data(), 64, token.s.begin());
    for (int i = 0; i < 4; ++i)
        token.time = token.time << 8 | bytes[64 + i];
    std::copy_n(bytes.data() + 68, 64, token.sig.begin());
    return token;
}

void Crl::revoke(const crypto::Digest& fingerprint, std::uint32_t time) {
    if (revoked_at(fingerprint))
        throw std::invalid_argument("fingerprint already revoked");
    entries_.push_back({fingerprint, time});
}

std::optional<std::uint32_t> Crl::revoked_at(
    const crypto::Digest& fingerprint) const {
    for (const auto& e : entries_)
        if (e.key_fingerprint == fingerprint) return e.revoked_at;
    return std::nullopt;
}

std::string Crl::to_text() const {
    std::ostringstream out;
    for (const auto& e : entries_)
        out << crypto::hex_encode(e.key_fingerprint) << " " << e.revoked_at
            << "\n";
    return out.str();
}

Crl Crl::from_text(const std::string& text) {
    Crl crl;
    std::istringstream in(text);
    std::string hex;
    std::uint32_t time;
    while (in >> hex >> time) {
        auto bytes = crypto::hex_decode(hex);
        if (bytes.size() != 32)
            throw std::invalid_argument("bad CRL fingerprint length");
        crypto::Digest fp{};
        std::copy(bytes.begin(), bytes.end(), fp.begin());
        crl.revoke(fp, time);
    }
    return crl;
}

void TrustStore::add_issuer(const crypto::EcdsaPublicKey& key) {
    issuers_[crypto::hex_encode(key.fingerprint())] = key;
}

std::optional<crypto::EcdsaPublicKey> TrustStore::issuer(
    const crypto::Digest& fingerprint) const {
    auto it = issuers_.find(crypto::hex_encode(fingerprint));
    if (it == issuers_.end()) return std::nullopt;
    return it->second;
}

TrustStore TrustStore::load(const std::filesystem::path& dir) {
    TrustStore store;
    auto read_file = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".pem") continue;
        std::string stem = entry.path().stem().string();
        auto key = crypto::EcdsaPublicKey::from_pem(read_file(entry.path()));
        if (stem == "tsa")
            store.tsa_key = key;
        else if (stem == "storage")
            store.storage_key = key;
        else
            store.add_issuer(key);
    }
    return store;
}

void TrustStore::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto write_file = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir / name);
        out << body;
    };
    for (const auto& [fp, key] : issuers_) write_file(fp + ".pem", key.pem());
    if (tsa_key.valid()) write_file("tsa.pem", tsa_key.pem());
    if (storage_key.valid()) write_file("storage.pem", storage_key.pem());
}

std::optional<std::string> blob_id_from_url(const std::string& url) {
    auto pos = url.rfind("/docs/");
    if (pos == std::string::npos) return std::nullopt;
    std::string id = url.substr(pos + 6);
    if (id.size() != 64) return std::nullopt;
    for (char c : id)
        if (!std::isxdigit(static_cast<unsigned char>(c))) return std::nullopt;
    return id;
}

// ---------------------------------------------------------------------------
// Issuance and verification
// ---------------------------------------------------------------------------

IssueResult issue(const GrayImage& d, const IssuerContext& issuer,
                  const DetectionParams& params, StorageClient& storage,
                  TsaClient& tsa) {
    QrPayload p = QrPayload::with_params(params);
    p.doc_hash = canonical_hash(d);
    p.sym_key = crypto::random_key();

    std::vector<std::uint8_t> encrypted =
        crypto::aead_encrypt(p.sym_key, canonical_image_bytes(d));
    p.url = storage.put(issuer.auth_key, encrypted);

    p.issuer_fingerprint = issuer.key.public_key().fingerprint();
    p.signature = issuer.key.sign_digest(signed_message_digest(p));

    TimestampToken token = tsa.stamp(p.signature);
    p.time = token.time;
    p.timestamp_sig = token.sig;

    return {encode_payload(p), p.url};
}

std::string to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::UnknownIssuer: return "unknown-issuer";
        case RejectReason::BadSignature: return "bad-signature";
        case RejectReason::BadTimestamp: return "bad-timestamp";
        case RejectReason::RevokedAfter: return "revoked-after";
        case RejectReason::FetchFailed: return "fetch-failed";
        case RejectReason::DecryptFailed: return "decrypt-failed";
        case RejectReason::HashMismatch: return "hash-mismatch";
        case RejectReason::DocumentNotFound: return "document-not-found";
        case RejectReason::MalformedPayload: return "malformed-payload";
    }
    return "unknown";
}

AuthResult verify(FrameStream frames,
                  std::span<const std::uint8_t> payload_bytes,
                  const TrustStore& trust, const Crl& crl,
                  StorageClient& storage, const VerifierOptions& options) {
    auto rejected = [](RejectReason reason) {
        AuthResult r;
        r.status = AuthResult::Status::Rejected;
        r.reason = reason;
        return r;
    };

    // (1) decode
    QrPayload p;
    try {
        p = decode_payload(payload_bytes);
    } catch (const PayloadError&) {
        return rejected(RejectReason::MalformedPayload);
    }

    // (2) issuer lookup by fingerprint
    auto issuer_key = trust.issuer(p.issuer_fingerprint);
    if (!issuer_key) return rejected(RejectReason::UnknownIssuer);

    // (3) signature S over the signed tuple
    if (!issuer_key->verify_digest(signed_message_digest(p), p.signature))
        return rejected(RejectReason::BadSignature);

    // (4) timestamp S' over (S, time)
    if (!trust.tsa_key.valid() ||
        !trust.tsa_key.verify_digest(timestamp_digest(p.signature, p.time),
                                     p.timestamp_sig))
        return rejected(RejectReason::BadTimestamp);

    // (5) CRL coherence: documents stamped at or after revocation are out;
    // older ones keep non-repudiation of origin.
    if (auto revoked = crl.revoked_at(p.issuer_fingerprint)) {
        if (p.time >= *revoked) return rejected(RejectReason::RevokedAfter);
    }

    // (6) fetch the encrypted reference
    auto id = blob_id_from_url(p.url);
    if (!id) return rejected(RejectReason::FetchFailed);
    auto fetched = storage.get(*id);
    if (fetched.status == StorageClient::GetResult::Status::NotFound)
        return rejected(RejectReason::DocumentNotFound);
    if (fetched.status != StorageClient::GetResult::Status::Ok)
        return rejected(RejectReason::FetchFailed);

    // (7) decrypt
    auto plain = crypto::aead_decrypt(p.sym_key, fetched.blob);
    if (!plain) return rejected(RejectReason::DecryptFailed);

    // (8) reference hash
    if (crypto::sha256(*plain) != p.doc_hash)
        return rejected(RejectReason::HashMismatch);
    auto reference = image_from_canonical_bytes(*plain);
    if (!reference) return rejected(RejectReason::HashMismatch);

    // (9) image comparison over the video
    VideoVerdict video =
        analyze_video(*reference, std::move(frames),
                      p.detection_params(options.k, options.max_rounds),
                      options.detector);

    AuthResult result;
    result.video = video;
    if (video.final.status == FrameStatus::Authentic) {
        result.status = AuthResult::Status::Authentic;
    } else {
        result.status = AuthResult::Status::Forged;
        result.rects = video.final.differences;
    }
    return result;
}

}  // namespace docauth::proto
