// Desk provider: arithmetic in the multiplicative group mod 2^61-1 for the
// asymmetric side (hybrid Elgamal encryption, Schnorr signatures, DH) and a
// SipHash-based stream cipher with an encrypt-then-MAC tag. Deterministic,
// fast and shaped like the real thing; offers no real security margin.
#include <sodium.h>

#include <cstring>

#include "anap/crypto.hpp"

namespace anap::crypto {
namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

constexpr u64 kP = (u64{1} << 61) - 1;
constexpr u64 kOrder = kP - 1;
constexpr u64 kG = 37;
constexpr std::size_t kKeyLen = 16;
constexpr std::size_t kNonceLen = 8;
constexpr std::size_t kTagLen = 8;

u64 mulmod(u64 a, u64 b, u64 m) { return static_cast<u64>(static_cast<u128>(a) * b % m); }

u64 powmod(u64 base, u64 exp) {
  u64 result = 1;
  base %= kP;
  while (exp) {
    if (exp & 1) result = mulmod(result, base, kP);
    base = mulmod(base, base, kP);
    exp >>= 1;
  }
  return result;
}

Bytes be64(u64 v) {
  Writer w;
  w.u64(v);
  return std::move(w).take();
}

u64 read64(ByteView b) {
  Reader r(b.first(8));
  return r.u64();
}

u64 siphash(ByteView key16, ByteView msg) {
  unsigned char out[crypto_shorthash_siphash24_BYTES];
  crypto_shorthash_siphash24(out, msg.data(), msg.size(), key16.data());
  u64 v;
  std::memcpy(&v, out, sizeof v);
  return v;
}

Bytes blake(ByteView in, std::size_t out_len) {
  Bytes out(out_len);
  crypto_generichash(out.data(), out.size(), in.data(), in.size(), nullptr, 0);
  return out;
}

Bytes mac_key(ByteView key) {
  Bytes mk(16);
  const Bytes l0 = to_bytes("anap-mac-0");
  const Bytes l1 = to_bytes("anap-mac-1");
  u64 a = siphash(key, l0);
  u64 b = siphash(key, l1);
  std::memcpy(mk.data(), &a, 8);
  std::memcpy(mk.data() + 8, &b, 8);
  return mk;
}

void keystream_xor(ByteView key, ByteView nonce, std::span<std::uint8_t> data) {
  std::uint8_t block_in[16];
  std::memcpy(block_in, nonce.data(), kNonceLen);
  for (std::size_t off = 0, ctr = 0; off < data.size(); off += 8, ++ctr) {
    for (int i = 0; i < 8; ++i) block_in[8 + i] = static_cast<std::uint8_t>(ctr >> (8 * i));
    const u64 ks = siphash(key, ByteView(block_in, 16));
    for (std::size_t i = 0; i < 8 && off + i < data.size(); ++i) {
      data[off + i] ^= static_cast<std::uint8_t>(ks >> (8 * i));
    }
  }
}

class DeskProvider final : public Provider {
 public:
  DeskProvider() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  }

  const ProviderInfo& info() const override { return info_; }

  Digest hash(ByteView input) const override { return Digest{blake(input, 16)}; }

  AsymKeyPair generate_keypair(Rng& rng) const override {
    const u64 x = 1 + rng.below(kOrder - 1);
    AsymKeyPair kp;
    kp.secret_key = be64(x);
    kp.public_key = be64(powmod(kG, x));
    kp.key_id = rng.next();
    return kp;
  }

  Bytes asym_encrypt(ByteView public_key, ByteView plaintext, Rng& rng) const override {
    if (plaintext.size() > info_.max_plaintext) throw Error(Errc::Oversize, "asym plaintext too long");
    const u64 y = group_element(public_key, Errc::WrongKey);
    const u64 r = 1 + rng.below(kOrder - 1);
    const u64 R = powmod(kG, r);
    const u64 S = powmod(y, r);
    const SymKey k = derive_key(concat({be64(R), be64(S)}), "anap/desk-asym");
    return concat({be64(R), sym_encrypt(k, plaintext, rng)});
  }

  Bytes asym_decrypt(ByteView secret_key, ByteView ciphertext) const override {
    if (secret_key.size() != 8 || ciphertext.size() < 8 + kNonceLen + kTagLen) {
      throw Error(Errc::WrongKey, "malformed key or ciphertext");
    }
    const u64 x = read64(secret_key);
    const u64 R = read64(ciphertext);
    if (R < 1 || R >= kP) throw Error(Errc::WrongKey, "bad ephemeral");
    const u64 S = powmod(R, x);
    const SymKey k = derive_key(concat({be64(R), be64(S)}), "anap/desk-asym");
    try {
      return sym_decrypt(k, ciphertext.subspan(8));
    } catch (const Error&) {
      throw Error(Errc::WrongKey, "ciphertext not for this key");
    }
  }

  Bytes sign(ByteView secret_key, ByteView message) const override {
    if (secret_key.size() != 8) throw Error(Errc::WrongKey, "bad secret key");
    const u64 x = read64(secret_key);
    const Bytes pk = be64(powmod(kG, x));
    u64 k = read64(blake(concat({secret_key, message}), 16)) % kOrder;
    if (k == 0) k = 1;
    const u64 R = powmod(kG, k);
    const u64 e = challenge(R, pk, message);
    const u64 s = static_cast<u64>((static_cast<u128>(k) + static_cast<u128>(e) * x) % kOrder);
    return concat({be64(e), be64(s)});
  }

  bool verify(ByteView public_key, ByteView message, ByteView signature) const noexcept override {
    if (public_key.size() != 8 || signature.size() != 16) return false;
    const u64 y = read64(public_key);
    if (y < 1 || y >= kP) return false;
    const u64 e = read64(signature);
    const u64 s = read64(signature.subspan(8));
    if (e >= kOrder || s >= kOrder) return false;
    const u64 R = mulmod(powmod(kG, s), powmod(y, (kOrder - e) % kOrder), kP);
    return challenge(R, public_key, message) == e;
  }

  Bytes sym_encrypt(const SymKey& key, ByteView plaintext, Rng& rng) const override {
    check_key(key);
    Bytes out = rng.bytes(kNonceLen);
    out.insert(out.end(), plaintext.begin(), plaintext.end());
    keystream_xor(key.bytes, ByteView(out).first(kNonceLen),
                  std::span<std::uint8_t>(out).subspan(kNonceLen));
    const u64 tag = siphash(mac_key(key.bytes), out);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(tag >> (8 * i)));
    return out;
  }

  Bytes sym_decrypt(const SymKey& key, ByteView ciphertext) const override {
    if (key.bytes.size() != kKeyLen || ciphertext.size() < kNonceLen + kTagLen) {
      throw Error(Errc::DecryptFail, "malformed ciphertext");
    }
    const auto body = ciphertext.first(ciphertext.size() - kTagLen);
    const u64 tag = siphash(mac_key(key.bytes), body);
    u64 got = 0;
    for (int i = 0; i < 8; ++i) got |= u64{ciphertext[body.size() + i]} << (8 * i);
    if (tag != got) throw Error(Errc::DecryptFail, "authentication tag mismatch");
    Bytes out(body.begin() + kNonceLen, body.end());
    keystream_xor(key.bytes, body.first(kNonceLen), out);
    return out;
  }

  EphemeralKey dh_generate(Rng& rng) const override {
    const u64 x = 1 + rng.below(kOrder - 1);
    return EphemeralKey{be64(powmod(kG, x)), be64(x)};
  }

  Bytes dh_shared(ByteView secret, ByteView peer_public) const override {
    if (secret.size() != 8) throw Error(Errc::MalformedExchange, "bad secret");
    const u64 y = group_element(peer_public, Errc::MalformedExchange);
    if (y == 1 || y == kP - 1) throw Error(Errc::MalformedExchange, "degenerate peer value");
    return be64(powmod(y, read64(secret)));
  }

 private:
  static u64 group_element(ByteView b, Errc code) {
    if (b.size() != 8) throw Error(code, "bad group element length");
    const u64 v = read64(b);
    if (v < 1 || v >= kP) throw Error(code, "group element out of range");
    return v;
  }

  static void check_key(const SymKey& key) {
    if (key.bytes.size() != kKeyLen) throw Error(Errc::WrongKey, "desk symmetric keys are 16 octets");
  }

  u64 challenge(u64 R, ByteView pk, ByteView message) const {
    return read64(blake(concat({be64(R), pk, message}), 16)) % kOrder;
  }

  ProviderInfo info_{"desk", 16, kKeyLen, 8, 16, 8 + kNonceLen + kTagLen, kNonceLen + kTagLen, std::size_t{1} << 20};
};

}  // namespace

std::unique_ptr<Provider> make_desk_provider() { return std::make_unique<DeskProvider>(); }

}  // namespace anap::crypto
