#include "docauth/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/crypto.h>
#include <openssl/ec.h>
#include <openssl/ecdsa.h>
#include <openssl/evp.h>
#include <openssl/err.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>
#include <stdexcept>

namespace docauth::crypto {

namespace {

[[noreturn]] void crypto_fail(const char* what) {
    unsigned long err = ERR_get_error();
    char buf[256] = {0};
    if (err) ERR_error_string_n(err, buf, sizeof buf);
    throw std::runtime_error(std::string(what) +
                             (buf[0] ? std::string(": ") + buf : ""));
}

struct EvpPkeyDeleter {
    void operator()(void* p) const { EVP_PKEY_free(static_cast<EVP_PKEY*>(p)); }
};

EVP_PKEY* as_pkey(const std::shared_ptr<void>& p) {
    return static_cast<EVP_PKEY*>(p.get());
}

using CtxPtr = std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)>;
using BioPtr = std::unique_ptr<BIO, decltype(&BIO_free)>;

std::string bio_to_string(BIO* bio) {
    char* data = nullptr;
    long len = BIO_get_mem_data(bio, &data);
    return std::string(data, static_cast<std::size_t>(len));
}

// DER <-> raw r||s conversion for P-256 signatures.
std::vector<std::uint8_t> raw_sig_to_der(const Signature& sig) {
    ECDSA_SIG* s = ECDSA_SIG_new();
    if (!s) crypto_fail("ECDSA_SIG_new");
    BIGNUM* r = BN_bin2bn(sig.data(), 32, nullptr);
    BIGNUM* sv = BN_bin2bn(sig.data() + 32, 32, nullptr);
    if (!r || !sv || !ECDSA_SIG_set0(s, r, sv)) {
        ECDSA_SIG_free(s);
        crypto_fail("signature components");
    }
    int len = i2d_ECDSA_SIG(s, nullptr);
    std::vector<std::uint8_t> der(static_cast<std::size_t>(len));
    std::uint8_t* out = der.data();
    i2d_ECDSA_SIG(s, &out);
    ECDSA_SIG_free(s);
    return der;
}

Signature der_sig_to_raw(std::span<const std::uint8_t> der) {
    const std::uint8_t* in = der.data();
    ECDSA_SIG* s = d2i_ECDSA_SIG(nullptr, &in, static_cast<long>(der.size()));
    if (!s) crypto_fail("d2i_ECDSA_SIG");
    Signature sig{};
    const BIGNUM* r = nullptr;
    const BIGNUM* sv = nullptr;
    ECDSA_SIG_get0(s, &r, &sv);
    if (BN_bn2binpad(r, sig.data(), 32) != 32 ||
        BN_bn2binpad(sv, sig.data() + 32, 32) != 32) {
        ECDSA_SIG_free(s);
        crypto_fail("signature component size");
    }
    ECDSA_SIG_free(s);
    return sig;
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
    Digest out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Digest sha256(const std::string& data) {
    return sha256(std::span(reinterpret_cast<const std::uint8_t*>(data.data()),
                            data.size()));
}

std::vector<std::uint8_t> random_bytes(std::size_t n) {
    std::vector<std::uint8_t> out(n);
    if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1)
        crypto_fail("RAND_bytes");
    return out;
}

SymmetricKey random_key() {
    SymmetricKey key{};
    if (RAND_bytes(key.data(), static_cast<int>(key.size())) != 1)
        crypto_fail("RAND_bytes");
    return key;
}

std::string hex_encode(std::span<const std::uint8_t> data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

std::vector<std::uint8_t> hex_decode(const std::string& hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("odd hex length");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("bad hex digit");
    };
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 |
                                           nibble(hex[2 * i + 1]));
    return out;
}

bool const_time_equal(std::span<const std::uint8_t> a,
                      std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

EcdsaPublicKey EcdsaPublicKey::from_pem(const std::string& pem) {
    BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())),
               &BIO_free);
    EVP_PKEY* p = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
    if (!p) crypto_fail("PEM_read_bio_PUBKEY");
    EcdsaPublicKey key;
    key.pkey_ = std::shared_ptr<void>(p, EvpPkeyDeleter{});
    return key;
}

std::string EcdsaPublicKey::pem() const {
    BioPtr bio(BIO_new(BIO_s_mem()), &BIO_free);
    if (!PEM_write_bio_PUBKEY(bio.get(), as_pkey(pkey_)))
        crypto_fail("PEM_write_bio_PUBKEY");
    return bio_to_string(bio.get());
}

std::vector<std::uint8_t> EcdsaPublicKey::encoded() const {
    unsigned char* buf = nullptr;
    std::size_t len = EVP_PKEY_get1_encoded_public_key(as_pkey(pkey_), &buf);
    if (len == 0) crypto_fail("EVP_PKEY_get1_encoded_public_key");
    std::vector<std::uint8_t> out(buf, buf + len);
    OPENSSL_free(buf);
    return out;
}

Digest EcdsaPublicKey::fingerprint() const { return sha256(encoded()); }

bool EcdsaPublicKey::verify_digest(const Digest& digest,
                                   const Signature& sig) const {
    std::vector<std::uint8_t> der;
    try {
        der = raw_sig_to_der(sig);
    } catch (const std::exception&) {
        return false;
    }
    CtxPtr ctx(EVP_PKEY_CTX_new(as_pkey(pkey_), nullptr), &EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_verify_init(ctx.get()) <= 0) return false;
    if (EVP_PKEY_CTX_set_signature_md(ctx.get(), EVP_sha256()) <= 0)
        return false;
    return EVP_PKEY_verify(ctx.get(), der.data(), der.size(), digest.data(),
                           digest.size()) == 1;
}

EcdsaKeyPair EcdsaKeyPair::generate() {
    CtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_EC, nullptr), &EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0)
        crypto_fail("keygen init");
    if (EVP_PKEY_CTX_set_ec_paramgen_curve_nid(ctx.get(),
                                               NID_X9_62_prime256v1) <= 0)
        crypto_fail("set curve P-256");
    EVP_PKEY* p = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &p) <= 0) crypto_fail("keygen");
    EcdsaKeyPair kp;
    kp.pkey_ = std::shared_ptr<void>(p, EvpPkeyDeleter{});
    return kp;
}

EcdsaKeyPair EcdsaKeyPair::from_private_pem(const std::string& pem) {
    BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())),
               &BIO_free);
    EVP_PKEY* p = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
    if (!p) crypto_fail("PEM_read_bio_PrivateKey");
    EcdsaKeyPair kp;
    kp.pkey_ = std::shared_ptr<void>(p, EvpPkeyDeleter{});
    return kp;
}

std::string EcdsaKeyPair::private_pem() const {
    BioPtr bio(BIO_new(BIO_s_mem()), &BIO_free);
    if (!PEM_write_bio_PrivateKey(bio.get(), as_pkey(pkey_), nullptr, nullptr,
                                  0, nullptr, nullptr))
        crypto_fail("PEM_write_bio_PrivateKey");
    return bio_to_string(bio.get());
}

EcdsaPublicKey EcdsaKeyPair::public_key() const {
    // Round-trip through PEM to get an independent public-only key object.
    BioPtr bio(BIO_new(BIO_s_mem()), &BIO_free);
    if (!PEM_write_bio_PUBKEY(bio.get(), as_pkey(pkey_)))
        crypto_fail("PEM_write_bio_PUBKEY");
    return EcdsaPublicKey::from_pem(bio_to_string(bio.get()));
}

Signature EcdsaKeyPair::sign_digest(const Digest& digest) const {
    CtxPtr ctx(EVP_PKEY_CTX_new(as_pkey(pkey_), nullptr), &EVP_PKEY_CTX_free);
    if (!ctx || EVP_PKEY_sign_init(ctx.get()) <= 0) crypto_fail("sign init");
    if (EVP_PKEY_CTX_set_signature_md(ctx.get(), EVP_sha256()) <= 0)
        crypto_fail("set md");
    std::size_t len = 0;
    if (EVP_PKEY_sign(ctx.get(), nullptr, &len, digest.data(), digest.size()) <=
        0)
        crypto_fail("sign size");
    std::vector<std::uint8_t> der(len);
    if (EVP_PKEY_sign(ctx.get(), der.data(), &len, digest.data(),
                      digest.size()) <= 0)
        crypto_fail("sign");
    der.resize(len);
    return der_sig_to_raw(der);
}

std::vector<std::uint8_t> aead_encrypt(const SymmetricKey& key,
                                       std::span<const std::uint8_t> plain) {
    std::vector<std::uint8_t> nonce = random_bytes(12);
    std::vector<std::uint8_t> out;
    out.reserve(12 + plain.size() + 16);
    out.insert(out.end(), nonce.begin(), nonce.end());

    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) crypto_fail("cipher ctx");
    std::vector<std::uint8_t> ct(plain.size());
    int len = 0;
    int ok = EVP_EncryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key.data(),
                                nonce.data()) == 1 &&
             (plain.empty() ||
              EVP_EncryptUpdate(ctx, ct.data(), &len, plain.data(),
                                static_cast<int>(plain.size())) == 1);
    int fin_len = 0;
    std::uint8_t tag[16];
    ok = ok && EVP_EncryptFinal_ex(ctx, ct.data() + len, &fin_len) == 1 &&
         EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, 16, tag) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) crypto_fail("aead encrypt");

    out.insert(out.end(), ct.begin(), ct.end());
    out.insert(out.end(), tag, tag + 16);
    return out;
}

std::optional<std::vector<std::uint8_t>> aead_decrypt(
    const SymmetricKey& key, std::span<const std::uint8_t> blob) {
    if (blob.size() < 12 + 16) return std::nullopt;
    const std::uint8_t* nonce = blob.data();
    const std::uint8_t* ct = blob.data() + 12;
    std::size_t ct_len = blob.size() - 12 - 16;
    const std::uint8_t* tag = blob.data() + blob.size() - 16;

    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) crypto_fail("cipher ctx");
    std::vector<std::uint8_t> plain(ct_len);
    int len = 0;
    bool ok = EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key.data(),
                                 nonce) == 1 &&
              (ct_len == 0 ||
               EVP_DecryptUpdate(ctx, plain.data(), &len, ct,
                                 static_cast<int>(ct_len)) == 1) &&
              EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, 16,
                                  const_cast<std::uint8_t*>(tag)) == 1;
    int fin_len = 0;
    ok = ok && EVP_DecryptFinal_ex(ctx, plain.data() + len, &fin_len) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) return std::nullopt;
    return plain;
}

}  // namespace docauth::crypto
