#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace docauth::crypto {

using Digest = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;  // raw r||s, P-256
using SymmetricKey = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(const std::string& data);

std::vector<std::uint8_t> random_bytes(std::size_t n);
SymmetricKey random_key();

std::string hex_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> hex_decode(const std::string& hex);

// Constant-time equality for credentials.
bool const_time_equal(std::span<const std::uint8_t> a,
                      std::span<const std::uint8_t> b);

class EcdsaPublicKey {
public:
    EcdsaPublicKey() = default;
    static EcdsaPublicKey from_pem(const std::string& pem);

    std::string pem() const;
    // Uncompressed point encoding (0x04 || X || Y, 65 bytes).
    std::vector<std::uint8_t> encoded() const;
    // SHA-256 of the uncompressed point encoding.
    Digest fingerprint() const;
    bool verify_digest(const Digest& digest, const Signature& sig) const;

    bool valid() const { return pkey_ != nullptr; }

private:
    friend class EcdsaKeyPair;
    std::shared_ptr<void> pkey_;  // EVP_PKEY
};

class EcdsaKeyPair {
public:
    EcdsaKeyPair() = default;
    static EcdsaKeyPair generate();
    static EcdsaKeyPair from_private_pem(const std::string& pem);

    std::string private_pem() const;
    EcdsaPublicKey public_key() const;
    Signature sign_digest(const Digest& digest) const;

    bool valid() const { return pkey_ != nullptr; }

private:
    std::shared_ptr<void> pkey_;  // EVP_PKEY
};

// AES-256-GCM. Output layout: 12-byte random nonce || ciphertext || 16-byte
// tag. Decrypt returns nullopt on any authentication failure.
std::vector<std::uint8_t> aead_encrypt(const SymmetricKey& key,
                                       std::span<const std::uint8_t> plain);
std::optional<std::vector<std::uint8_t>> aead_decrypt(
    const SymmetricKey& key, std::span<const std::uint8_t> blob);

}  // namespace docauth::crypto
