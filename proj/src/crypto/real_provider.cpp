// Real provider on libsodium: Ed25519 pseudonym keys (converted to X25519
// for encryption), sealed-box style hybrid encryption with a seeded
// ephemeral, ChaCha20-Poly1305 for links and sessions, SHA-256 digests.
// Every random input is drawn from the caller's Rng so runs replay exactly.
#include <sodium.h>

#include "anap/crypto.hpp"

namespace anap::crypto {
namespace {

constexpr std::size_t kPk = crypto_sign_PUBLICKEYBYTES;
constexpr std::size_t kSk = crypto_sign_SECRETKEYBYTES;
constexpr std::size_t kBoxPk = crypto_box_PUBLICKEYBYTES;
constexpr std::size_t kAeadKey = crypto_aead_chacha20poly1305_ietf_KEYBYTES;
constexpr std::size_t kAeadNonce = crypto_aead_chacha20poly1305_ietf_NPUBBYTES;
constexpr std::size_t kAeadTag = crypto_aead_chacha20poly1305_ietf_ABYTES;

Bytes box_nonce(ByteView epk, ByteView pk) {
  Bytes nonce(crypto_box_NONCEBYTES);
  const Bytes in = concat({epk, pk});
  crypto_generichash(nonce.data(), nonce.size(), in.data(), in.size(), nullptr, 0);
  return nonce;
}

class RealProvider final : public Provider {
 public:
  RealProvider() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  }

  const ProviderInfo& info() const override { return info_; }

  Digest hash(ByteView input) const override {
    Bytes out(crypto_hash_sha256_BYTES);
    crypto_hash_sha256(out.data(), input.data(), input.size());
    return Digest{std::move(out)};
  }

  AsymKeyPair generate_keypair(Rng& rng) const override {
    const Bytes seed = rng.bytes(crypto_sign_SEEDBYTES);
    AsymKeyPair kp;
    kp.public_key.resize(kPk);
    kp.secret_key.resize(kSk);
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
    kp.key_id = rng.next();
    return kp;
  }

  Bytes asym_encrypt(ByteView public_key, ByteView plaintext, Rng& rng) const override {
    if (plaintext.size() > info_.max_plaintext) throw Error(Errc::Oversize, "asym plaintext too long");
    if (public_key.size() != kPk) throw Error(Errc::WrongKey, "bad public key length");
    Bytes pkx(kBoxPk);
    if (crypto_sign_ed25519_pk_to_curve25519(pkx.data(), public_key.data()) != 0) {
      throw Error(Errc::WrongKey, "public key is not a valid point");
    }
    const Bytes seed = rng.bytes(crypto_box_SEEDBYTES);
    Bytes epk(kBoxPk), esk(crypto_box_SECRETKEYBYTES);
    crypto_box_seed_keypair(epk.data(), esk.data(), seed.data());
    const Bytes nonce = box_nonce(epk, pkx);
    Bytes out(kBoxPk + crypto_box_MACBYTES + plaintext.size());
    std::copy(epk.begin(), epk.end(), out.begin());
    if (crypto_box_easy(out.data() + kBoxPk, plaintext.data(), plaintext.size(), nonce.data(),
                        pkx.data(), esk.data()) != 0) {
      throw Error(Errc::WrongKey, "box failed");
    }
    sodium_memzero(esk.data(), esk.size());
    return out;
  }

  Bytes asym_decrypt(ByteView secret_key, ByteView ciphertext) const override {
    if (secret_key.size() != kSk || ciphertext.size() < kBoxPk + crypto_box_MACBYTES) {
      throw Error(Errc::WrongKey, "malformed key or ciphertext");
    }
    Bytes skx(crypto_box_SECRETKEYBYTES), pkx(kBoxPk);
    crypto_sign_ed25519_sk_to_curve25519(skx.data(), secret_key.data());
    crypto_scalarmult_base(pkx.data(), skx.data());
    const auto epk = ciphertext.first(kBoxPk);
    const auto box = ciphertext.subspan(kBoxPk);
    const Bytes nonce = box_nonce(epk, pkx);
    Bytes out(box.size() - crypto_box_MACBYTES);
    const int rc = crypto_box_open_easy(out.data(), box.data(), box.size(), nonce.data(), epk.data(),
                                        skx.data());
    sodium_memzero(skx.data(), skx.size());
    if (rc != 0) throw Error(Errc::WrongKey, "ciphertext not for this key");
    return out;
  }

  Bytes sign(ByteView secret_key, ByteView message) const override {
    if (secret_key.size() != kSk) throw Error(Errc::WrongKey, "bad secret key length");
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_key.data());
    return sig;
  }

  bool verify(ByteView public_key, ByteView message, ByteView signature) const noexcept override {
    if (public_key.size() != kPk || signature.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                       public_key.data()) == 0;
  }

  Bytes sym_encrypt(const SymKey& key, ByteView plaintext, Rng& rng) const override {
    if (key.bytes.size() != kAeadKey) throw Error(Errc::WrongKey, "bad symmetric key length");
    Bytes out = rng.bytes(kAeadNonce);
    out.resize(kAeadNonce + plaintext.size() + kAeadTag);
    unsigned long long clen = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(out.data() + kAeadNonce, &clen, plaintext.data(),
                                              plaintext.size(), nullptr, 0, nullptr, out.data(),
                                              key.bytes.data());
    return out;
  }

  Bytes sym_decrypt(const SymKey& key, ByteView ciphertext) const override {
    if (key.bytes.size() != kAeadKey || ciphertext.size() < kAeadNonce + kAeadTag) {
      throw Error(Errc::DecryptFail, "malformed ciphertext");
    }
    Bytes out(ciphertext.size() - kAeadNonce - kAeadTag);
    unsigned long long mlen = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &mlen, nullptr,
                                                  ciphertext.data() + kAeadNonce,
                                                  ciphertext.size() - kAeadNonce, nullptr, 0,
                                                  ciphertext.data(), key.bytes.data()) != 0) {
      throw Error(Errc::DecryptFail, "authentication tag mismatch");
    }
    return out;
  }

  EphemeralKey dh_generate(Rng& rng) const override {
    EphemeralKey k;
    k.secret = rng.bytes(crypto_scalarmult_SCALARBYTES);
    k.public_value.resize(crypto_scalarmult_BYTES);
    crypto_scalarmult_base(k.public_value.data(), k.secret.data());
    return k;
  }

  Bytes dh_shared(ByteView secret, ByteView peer_public) const override {
    if (secret.size() != crypto_scalarmult_SCALARBYTES || peer_public.size() != crypto_scalarmult_BYTES) {
      throw Error(Errc::MalformedExchange, "bad DH value length");
    }
    Bytes out(crypto_scalarmult_BYTES);
    if (crypto_scalarmult(out.data(), secret.data(), peer_public.data()) != 0) {
      throw Error(Errc::MalformedExchange, "degenerate peer value");
    }
    return out;
  }

 private:
  ProviderInfo info_{"real",
                     crypto_hash_sha256_BYTES,
                     kAeadKey,
                     kPk,
                     crypto_sign_BYTES,
                     kBoxPk + crypto_box_MACBYTES,
                     kAeadNonce + kAeadTag,
                     std::size_t{1} << 20};
};

}  // namespace

std::unique_ptr<Provider> make_real_provider() { return std::make_unique<RealProvider>(); }

}  // namespace anap::crypto
