#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unistd.h>
#include <random>

#include "docauth/harness.hpp"
#include "docauth/protocol.hpp"
#include "docauth/services.hpp"
#include "oracle.hpp"

using namespace docauth;
using namespace docauth::proto;

namespace {

std::filesystem::path fresh_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() /
               (std::string("docauth_test_") + tag + "_" +
                std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Small but feature-rich document so end-to-end verifies stay fast. The
// crop gets blank page margins painted on, like any real document.
GrayImage small_document() {
    static GrayImage doc = [] {
        GrayImage img = crop(bench::generate_document(3, 2).image,
                             Rect{150, 450, 850, 1250});
        const int margin = 28;
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                if (x < margin || y < margin || x >= img.width() - margin ||
                    y >= img.height() - margin)
                    img.set_raw(x, y, 255);
        return img;
    }();
    return doc;
}

DetectionParams small_params() {
    DetectionParams p;
    p.tau = 10;
    return p;
}

struct Env {
    std::filesystem::path root = fresh_dir("proto");
    crypto::EcdsaKeyPair issuer_key = crypto::EcdsaKeyPair::generate();
    crypto::EcdsaKeyPair storage_key = crypto::EcdsaKeyPair::generate();
    crypto::EcdsaKeyPair tsa_key = crypto::EcdsaKeyPair::generate();
    IssuerContext issuer;
    net::LocalStorageService storage;
    net::LocalTsaClient tsa;
    net::LocalStorageClient client;
    TrustStore trust;
    Crl crl;
    GrayImage doc = small_document();

    Env()
        : issuer{issuer_key, make_auth_key()},
          storage(root / "store", {issuer.auth_key}, storage_key),
          tsa(tsa_key),
          client(storage, storage_key.public_key()) {
        trust.add_issuer(issuer_key.public_key());
        trust.tsa_key = tsa_key.public_key();
        trust.storage_key = storage_key.public_key();
    }
    ~Env() {
        std::error_code ec;
        std::filesystem::remove_all(root, ec);
    }

    static AuthKey make_auth_key() {
        AuthKey key{};
        auto bytes = crypto::random_bytes(32);
        std::copy(bytes.begin(), bytes.end(), key.begin());
        return key;
    }

    IssueResult issue_doc() {
        return issue(doc, issuer, small_params(), client, tsa);
    }

    FrameStream frames(int n = 3) {
        return frame_stream_from(std::vector<GrayImage>(n, doc));
    }

    AuthResult run_verify(std::span<const std::uint8_t> payload) {
        return verify(frames(), payload, trust, crl, client, {});
    }
};

}  // namespace

TEST_CASE("canonical_hash: determinism and sensitivity") {
    GrayImage img(9, 7, 200);
    GrayImage copy = img;
    CHECK(canonical_hash(img) == canonical_hash(copy));
    copy.set_raw(4, 3, 199);
    CHECK(canonical_hash(img) != canonical_hash(copy));
}

TEST_CASE("canonical_hash of the 1x1 black image matches the external oracle") {
    // sha256 of 00 00 00 01 00 00 00 01 00, computed with sha256sum and
    // openssl dgst independently.
    GrayImage black(1, 1, 0);
    CHECK(crypto::hex_encode(canonical_hash(black)) ==
          "2209dc1ac9031cb0089fbd019a1fa065d54ddcef9487f6469d64f9106dbb0c6a");
    CHECK(canonical_image_bytes(black) ==
          std::vector<std::uint8_t>({0, 0, 0, 1, 0, 0, 0, 1, 0}));
}

TEST_CASE("canonical image bytes round trip") {
    std::mt19937_64 rng(3);
    GrayImage img = oracle::random_image(33, 21, rng);
    auto parsed = image_from_canonical_bytes(canonical_image_bytes(img));
    REQUIRE(parsed);
    CHECK(*parsed == img);

    CHECK(!image_from_canonical_bytes(std::vector<std::uint8_t>(5)));
    auto bytes = canonical_image_bytes(img);
    bytes.pop_back();
    CHECK(!image_from_canonical_bytes(bytes));
}

TEST_CASE("signed_message digest matches an independent concatenation") {
    QrPayload p = QrPayload::with_params(small_params());
    p.url = "http://s/docs/ab";
    p.fallback_text = "hello";
    p.doc_hash = crypto::sha256(std::string("d"));
    p.sym_key.fill(0x42);

    // Scripted concatenation: each field 2-byte big-endian length prefixed,
    // in the documented order.
    std::vector<std::uint8_t> buf;
    auto push16 = [&](std::uint16_t v) {
        buf.push_back(v >> 8);
        buf.push_back(v & 0xFF);
    };
    push16(static_cast<std::uint16_t>(p.url.size()));
    buf.insert(buf.end(), p.url.begin(), p.url.end());
    push16(32);
    buf.insert(buf.end(), p.doc_hash.begin(), p.doc_hash.end());
    push16(32);
    buf.insert(buf.end(), p.sym_key.begin(), p.sym_key.end());
    push16(static_cast<std::uint16_t>(p.fallback_text.size()));
    buf.insert(buf.end(), p.fallback_text.begin(), p.fallback_text.end());
    push16(2);
    push16(p.tau);
    push16(2);
    push16(p.delta_fixed);
    push16(2);
    push16(p.phi);
    push16(4);
    push16(p.sigma_w);
    push16(p.sigma_h);

    CHECK(signed_message_digest(p) == crypto::sha256(buf));
}

TEST_CASE("signed_message changes with any field") {
    QrPayload p = QrPayload::with_params(small_params());
    p.url = "http://h/docs/x";
    p.fallback_text = "text";
    auto base = signed_message_digest(p);

    QrPayload q = p;
    q.fallback_text = "texu";
    CHECK(signed_message_digest(q) != base);
    q = p;
    q.tau += 1;
    CHECK(signed_message_digest(q) != base);
    q = p;
    q.sym_key[0] ^= 1;
    CHECK(signed_message_digest(q) != base);
}

TEST_CASE("length prefixes prevent field-boundary ambiguity") {
    // Moving a byte across the U/T boundary yields different digests even
    // though the raw concatenation of the two fields is identical.
    QrPayload a = QrPayload::with_params(small_params());
    a.url = "ab";
    a.fallback_text = "c";
    QrPayload b = a;
    b.url = "a";
    b.fallback_text = "bc";
    CHECK(signed_message_digest(a) != signed_message_digest(b));
}

TEST_CASE("payload codec round trips random payloads") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        QrPayload p;
        int url_len = std::uniform_int_distribution<int>(0, 100)(rng);
        int text_len = std::uniform_int_distribution<int>(
            0, std::min<int>(200, 295 - url_len))(rng);
        for (int i = 0; i < url_len; ++i)
            p.url.push_back('a' + std::uniform_int_distribution<int>(0, 25)(rng));
        for (int i = 0; i < text_len; ++i)
            p.fallback_text.push_back(
                ' ' + std::uniform_int_distribution<int>(0, 90)(rng));
        for (auto& b : p.doc_hash) b = static_cast<std::uint8_t>(rng());
        for (auto& b : p.sym_key) b = static_cast<std::uint8_t>(rng());
        for (auto& b : p.issuer_fingerprint)
            b = static_cast<std::uint8_t>(rng());
        for (auto& b : p.signature) b = static_cast<std::uint8_t>(rng());
        for (auto& b : p.timestamp_sig) b = static_cast<std::uint8_t>(rng());
        p.tau = static_cast<std::uint16_t>(rng());
        p.delta_fixed =
            static_cast<std::uint16_t>(rng() % 10001);
        p.phi = static_cast<std::uint16_t>(rng());
        p.sigma_w = static_cast<std::uint16_t>(rng());
        p.sigma_h = static_cast<std::uint16_t>(rng());
        p.time = static_cast<std::uint32_t>(rng());

        auto bytes = encode_payload(p);
        CHECK(bytes.size() <= kMaxPayloadBytes);
        CHECK(decode_payload(bytes) == p);
    }
}

TEST_CASE("payload layout length is exactly the sum of its parts") {
    QrPayload p;
    p.url = "u";
    p.fallback_text = "";
    // version 1 + lenU 2 + 1 + hash 32 + key 32 + lenT 2 + 0 + 5*2 ints +
    // fingerprint 32 + time 4 + S 64 + S' 64.
    CHECK(encode_payload(p).size() == 1 + 2 + 1 + 32 + 32 + 2 + 0 + 10 + 32 +
                                          4 + 64 + 64);
}

TEST_CASE("payload budget: 538 bytes is the ceiling") {
    QrPayload p;
    p.url.assign(100, 'u');
    p.fallback_text.assign(195, 't');
    CHECK(encode_payload(p).size() == kMaxPayloadBytes);

    p.fallback_text.assign(196, 't');
    CHECK_THROWS_AS(encode_payload(p), PayloadError);
    p.fallback_text.assign(201, 't');
    CHECK_THROWS_AS(encode_payload(p), PayloadError);
    p.fallback_text.clear();
    p.url.assign(101, 'u');
    CHECK_THROWS_AS(encode_payload(p), PayloadError);
}

TEST_CASE("decode rejects malformed buffers, never partially") {
    QrPayload p;
    p.url = "http://host/docs/aa";
    auto bytes = encode_payload(p);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_payload(truncated), PayloadError);

    auto wrong_version = bytes;
    wrong_version[0] = 9;
    CHECK_THROWS_AS(decode_payload(wrong_version), PayloadError);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_payload(trailing), PayloadError);

    // Length field exceeding the remaining bytes.
    std::vector<std::uint8_t> hostile{1, 0xFF, 0xFF};
    CHECK_THROWS_AS(decode_payload(hostile), PayloadError);
}

TEST_CASE("decode is total on fuzzed buffers") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::uint8_t> junk(
            std::uniform_int_distribution<std::size_t>(0, 600)(rng));
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
        try {
            (void)decode_payload(junk);
        } catch (const PayloadError&) {
        }
    }
}

TEST_CASE("hex sidecar round trip") {
    QrPayload p;
    p.url = "http://h/docs/00";
    p.tau = 12;
    CHECK(payload_from_hex(payload_to_hex(p) + "\n") == p);
    CHECK_THROWS_AS(payload_from_hex("zz"), PayloadError);
}

TEST_CASE("timestamp tokens verify and tamper-fail") {
    auto key = crypto::EcdsaKeyPair::generate();
    net::LocalTsaClient tsa(key, 1234);
    crypto::Signature s{};
    s.fill(7);
    auto token = tsa.stamp(s);
    CHECK(token.time == 1234);
    CHECK(verify_timestamp(key.public_key(), token));

    auto bad = token;
    bad.time += 1;
    CHECK(!verify_timestamp(key.public_key(), bad));
    bad = token;
    bad.s[0] ^= 1;
    CHECK(!verify_timestamp(key.public_key(), bad));

    auto encoded = encode_token(token);
    CHECK(encoded.size() == 132);
    auto decoded = decode_token(encoded);
    REQUIRE(decoded);
    CHECK(*decoded == token);
    CHECK(!decode_token(std::vector<std::uint8_t>(131)));
}

TEST_CASE("CRL is append-only with unique fingerprints") {
    Crl crl;
    crypto::Digest fp{};
    fp.fill(1);
    crl.revoke(fp, 100);
    CHECK(crl.revoked_at(fp) == 100);
    CHECK_THROWS_AS(crl.revoke(fp, 200), std::invalid_argument);

    crypto::Digest other{};
    other.fill(2);
    CHECK(!crl.revoked_at(other));

    Crl reloaded = Crl::from_text(crl.to_text());
    CHECK(reloaded.revoked_at(fp) == 100);
    CHECK(reloaded.entries().size() == 1);
}

TEST_CASE("trust store saves and loads by fingerprint") {
    auto dir = fresh_dir("trust");
    TrustStore store;
    auto issuer = crypto::EcdsaKeyPair::generate();
    store.add_issuer(issuer.public_key());
    store.tsa_key = crypto::EcdsaKeyPair::generate().public_key();
    store.storage_key = crypto::EcdsaKeyPair::generate().public_key();
    store.save(dir);

    TrustStore loaded = TrustStore::load(dir);
    auto fp = issuer.public_key().fingerprint();
    REQUIRE(loaded.issuer(fp));
    CHECK(loaded.issuer(fp)->fingerprint() == fp);
    CHECK(loaded.tsa_key.fingerprint() == store.tsa_key.fingerprint());
    CHECK(loaded.storage_key.fingerprint() ==
          store.storage_key.fingerprint());
    std::filesystem::remove_all(dir);
}

TEST_CASE("blob id extraction from URLs") {
    std::string id(64, 'a');
    CHECK(blob_id_from_url("http://h:1/docs/" + id) == id);
    CHECK(blob_id_from_url("https://host/docs/" + id) == id);
    CHECK(!blob_id_from_url("http://h/blob/" + id));
    CHECK(!blob_id_from_url("http://h/docs/short"));
    CHECK(!blob_id_from_url("http://h/docs/" + std::string(64, 'x')));
}

TEST_CASE("issue/verify honest round trip") {
    Env env;
    auto issued = env.issue_doc();
    CHECK(issued.payload_bytes.size() <= kMaxPayloadBytes);

    auto result = env.run_verify(issued.payload_bytes);
    CHECK(result.status == AuthResult::Status::Authentic);
    REQUIRE(result.video);
    CHECK(result.video->converged);

    // The payload carries the detection parameters.
    auto payload = decode_payload(issued.payload_bytes);
    CHECK(payload.tau == 10);
    CHECK(payload.delta_fixed == 3500);
    CHECK(payload.phi == 30);
    CHECK(payload.sigma_w == 80);
}

TEST_CASE("issuance draws fresh keys and ciphertexts") {
    Env env;
    auto a = decode_payload(env.issue_doc().payload_bytes);
    auto b = decode_payload(env.issue_doc().payload_bytes);
    CHECK(a.sym_key != b.sym_key);
    CHECK(a.url != b.url);  // fresh key -> fresh ciphertext -> fresh id
    CHECK(a.doc_hash == b.doc_hash);
}

TEST_CASE("verify pipeline rejects each failure in order") {
    Env env;
    auto issued = env.issue_doc();
    auto good = decode_payload(issued.payload_bytes);

    auto expect_reject = [&](const QrPayload& p, RejectReason reason) {
        auto result = env.run_verify(encode_payload(p));
        REQUIRE(result.status == AuthResult::Status::Rejected);
        CHECK(*result.reason == reason);
    };

    // (1) malformed payload
    std::vector<std::uint8_t> truncated = issued.payload_bytes;
    truncated.resize(truncated.size() / 2);
    auto r1 = env.run_verify(truncated);
    REQUIRE(r1.status == AuthResult::Status::Rejected);
    CHECK(*r1.reason == RejectReason::MalformedPayload);

    // (2) fingerprint not in the trust store, everything else untouched
    {
        QrPayload p = good;
        p.issuer_fingerprint[0] ^= 1;
        expect_reject(p, RejectReason::UnknownIssuer);
    }
    // (3) bad signature with a known issuer
    {
        QrPayload p = good;
        p.signature[10] ^= 1;
        expect_reject(p, RejectReason::BadSignature);
    }
    // (4) bad timestamp signature; S itself still verifies
    {
        QrPayload p = good;
        p.timestamp_sig[10] ^= 1;
        expect_reject(p, RejectReason::BadTimestamp);
    }
    // (6) document id unknown: re-sign a payload pointing elsewhere
    {
        QrPayload p = good;
        p.url = "http://local/docs/" + std::string(64, '0');
        p.signature = env.issuer_key.sign_digest(signed_message_digest(p));
        auto token = env.tsa.stamp(p.signature);
        p.time = token.time;
        p.timestamp_sig = token.sig;
        expect_reject(p, RejectReason::DocumentNotFound);
    }
    // (6b) URL without a blob id
    {
        QrPayload p = good;
        p.url = "http://local/nothing";
        p.signature = env.issuer_key.sign_digest(signed_message_digest(p));
        auto token = env.tsa.stamp(p.signature);
        p.time = token.time;
        p.timestamp_sig = token.sig;
        expect_reject(p, RejectReason::FetchFailed);
    }
    // (7) blob replaced with a foreign ciphertext: decrypt fails
    {
        auto id = blob_id_from_url(good.url);
        REQUIRE(id);
        auto foreign = crypto::aead_encrypt(crypto::random_key(),
                                            canonical_image_bytes(env.doc));
        env.storage.store().overwrite(*id, foreign);
        expect_reject(good, RejectReason::DecryptFailed);

        // (8) blob re-encrypted under the same key but different content:
        // decrypts fine, hash mismatches.
        GrayImage other = env.doc;
        other.set_raw(0, 0, other.raw(0, 0) ^ 0x80);
        auto fake = crypto::aead_encrypt(good.sym_key,
                                         canonical_image_bytes(other));
        env.storage.store().overwrite(*id, fake);
        expect_reject(good, RejectReason::HashMismatch);

        // restore for later cases
        env.storage.store().overwrite(
            *id, crypto::aead_encrypt(good.sym_key,
                                      canonical_image_bytes(env.doc)));
        auto restored = env.run_verify(encode_payload(good));
        CHECK(restored.status == AuthResult::Status::Authentic);
    }
    // transport tamper -> channel binding failure -> fetch-failed
    {
        env.client.tamper_in_transit = [](std::vector<std::uint8_t>& blob) {
            if (!blob.empty()) blob[0] ^= 1;
        };
        expect_reject(good, RejectReason::FetchFailed);
        env.client.tamper_in_transit = nullptr;
    }
}

TEST_CASE("revocation honors timestamp order") {
    Env env;
    env.tsa.advance(0);
    auto issued_before = env.issue_doc();
    auto before = decode_payload(issued_before.payload_bytes);

    std::uint32_t revoke_time = env.tsa.now() + 100;
    env.crl.revoke(env.issuer_key.public_key().fingerprint(), revoke_time);

    // Timestamped strictly before the revocation: proceeds to the image
    // stage and verifies.
    auto r_before = env.run_verify(issued_before.payload_bytes);
    CHECK(r_before.status == AuthResult::Status::Authentic);

    // Timestamped at/after the revocation: rejected.
    env.tsa.advance(200);
    auto issued_after = env.issue_doc();
    auto r_after = env.run_verify(issued_after.payload_bytes);
    REQUIRE(r_after.status == AuthResult::Status::Rejected);
    CHECK(*r_after.reason == RejectReason::RevokedAfter);

    // Exact boundary: time == revoked_at is rejected.
    CHECK(decode_payload(issued_after.payload_bytes).time >= revoke_time);
}

TEST_CASE("empty CRL accepts every trusted key") {
    Env env;
    auto issued = env.issue_doc();
    CHECK(env.crl.entries().empty());
    CHECK(env.run_verify(issued.payload_bytes).status ==
          AuthResult::Status::Authentic);
}

TEST_CASE("forged frames turn the end-to-end verdict") {
    Env env;
    auto issued = env.issue_doc();

    // Tamper with the filmed document, not the payload.
    GrayImage tampered = env.doc;
    for (int y = 300; y < 330; ++y)
        for (int x = 200; x < 240; ++x) tampered.set(x, y, 0.05);
    auto result = verify(
        frame_stream_from(std::vector<GrayImage>(3, tampered)),
        issued.payload_bytes, env.trust, env.crl, env.client, {});
    REQUIRE(result.status == AuthResult::Status::Forged);
    REQUIRE(!result.rects.empty());
    long long covered = 0;
    for (const auto& r : result.rects)
        covered += rect_intersection_area(r, Rect{200, 300, 240, 330});
    CHECK(covered > 0);
}

TEST_CASE("ciphertexts stored remotely look uniformly random") {
    Env env;
    auto issued = env.issue_doc();
    auto id = blob_id_from_url(decode_payload(issued.payload_bytes).url);
    REQUIRE(id);
    auto blob = env.storage.store().get(*id);
    REQUIRE(blob);

    // Smoke test: byte histogram of the ciphertext body is flat-ish.
    std::array<int, 256> hist{};
    for (std::size_t i = 12; i + 16 < blob->size(); ++i) ++hist[(*blob)[i]];
    double n = static_cast<double>(blob->size() - 28);
    double chi2 = 0;
    for (int c : hist) {
        double expected = n / 256.0;
        chi2 += (c - expected) * (c - expected) / expected;
    }
    // 255 degrees of freedom; generous bound catches plaintext leakage.
    CHECK(chi2 < 400.0);

    // And the plaintext image would not pass the same test.
    auto plain = canonical_image_bytes(env.doc);
    std::array<int, 256> phist{};
    for (std::size_t i = 0; i < plain.size(); ++i) ++phist[plain[i]];
    double pchi2 = 0;
    for (int c : phist) {
        double expected = plain.size() / 256.0;
        pchi2 += (c - expected) * (c - expected) / expected;
    }
    CHECK(pchi2 > 400.0);
}

TEST_CASE("storage disk holds only ciphertexts and ids") {
    Env env;
    env.issue_doc();
    auto plain = canonical_image_bytes(env.doc);
    std::string needle(plain.begin() + 8, plain.begin() + 72);

    int blobs = 0;
    for (const auto& entry :
         std::filesystem::recursive_directory_iterator(env.root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        CHECK(content.find(needle) == std::string::npos);
        if (entry.path().extension() == ".blob") ++blobs;
    }
    CHECK(blobs == 1);
}
