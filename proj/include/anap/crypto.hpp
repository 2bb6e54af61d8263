#pragma once

#include <memory>
#include <string>

#include "anap/common.hpp"

namespace anap::crypto {

struct Digest {
  Bytes bytes;
  auto operator<=>(const Digest&) const = default;
};

struct SymKey {
  Bytes bytes;
  std::uint64_t key_id = 0;
  bool operator==(const SymKey&) const = default;
};

struct AsymKeyPair {
  Bytes public_key;
  Bytes secret_key;
  std::uint64_t key_id = 0;
};

/// Ephemeral Diffie-Hellman share used by the link key transport.
struct EphemeralKey {
  Bytes public_value;
  Bytes secret;
};

struct ProviderInfo {
  std::string name;
  std::size_t digest_len;
  std::size_t sym_key_len;
  std::size_t public_key_len;
  std::size_t signature_len;
  std::size_t asym_overhead;  // ciphertext length minus plaintext length
  std::size_t sym_overhead;
  std::size_t max_plaintext;
};

/// One interface over every primitive the protocol needs. All randomness is
/// drawn from the caller's Rng; providers hold no mutable state.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual const ProviderInfo& info() const = 0;

  virtual Digest hash(ByteView input) const = 0;

  virtual AsymKeyPair generate_keypair(Rng& rng) const = 0;
  /// Throws Oversize past max_plaintext.
  virtual Bytes asym_encrypt(ByteView public_key, ByteView plaintext, Rng& rng) const = 0;
  /// Throws WrongKey when the ciphertext was not produced for this key (or was altered).
  virtual Bytes asym_decrypt(ByteView secret_key, ByteView ciphertext) const = 0;

  virtual Bytes sign(ByteView secret_key, ByteView message) const = 0;
  /// Never throws; malformed inputs verify false.
  virtual bool verify(ByteView public_key, ByteView message, ByteView signature) const noexcept = 0;

  /// Authenticated symmetric encryption.
  virtual Bytes sym_encrypt(const SymKey& key, ByteView plaintext, Rng& rng) const = 0;
  /// Throws DecryptFail on wrong key or any modification.
  virtual Bytes sym_decrypt(const SymKey& key, ByteView ciphertext) const = 0;

  virtual EphemeralKey dh_generate(Rng& rng) const = 0;
  /// Throws MalformedExchange on an invalid peer value.
  virtual Bytes dh_shared(ByteView secret, ByteView peer_public) const = 0;

  /// Fresh key of info().sym_key_len octets with a fresh key_id.
  SymKey generate_session_key(Rng& rng) const;

  /// Truncated hash used to derive fixed-length symmetric keys.
  SymKey derive_key(ByteView material, std::string_view label) const;
};

/// "desk" (fast, structurally faithful, not secure) or "real" (libsodium).
/// Throws std::invalid_argument for unknown names.
std::unique_ptr<Provider> make_provider(std::string_view name);

// ---------------------------------------------------------------------------
// SecK: two-frame Elgamal-style link key transport.
//
//   SECK1  holder -> peer   : xid, holder ephemeral public value
//   SECK2  peer   -> holder : xid, peer ephemeral public value
//
// Both ends derive a one-time wrapping key from the DH secret; the holder's
// link key then travels wrapped under it. The link key never appears in
// clear on the wire.

struct SeckOffer {
  std::uint64_t xid = 0;
  Bytes ephemeral;
};

struct SeckReply {
  std::uint64_t xid = 0;
  Bytes ephemeral;
};

class SeckInitiator {
 public:
  static SeckInitiator start(const Provider& p, Rng& rng);

  const SeckOffer& offer() const { return offer_; }
  /// Derives the wrapping key from the peer's reply. Throws MalformedExchange.
  SymKey finish(const Provider& p, const SeckReply& reply) const;

 private:
  SeckOffer offer_;
  Bytes secret_;
};

struct SeckAccepted {
  SymKey wrapping_key;
  SeckReply reply;
};

/// Responder side: answers an offer and derives the same wrapping key.
SeckAccepted seck_accept(const Provider& p, const SeckOffer& offer, Rng& rng);

Bytes seck_wrap(const Provider& p, const SymKey& wrapping_key, const SymKey& link_key, Rng& rng);
/// Throws DecryptFail / MalformedExchange.
SymKey seck_unwrap(const Provider& p, const SymKey& wrapping_key, ByteView wrapped);

Bytes encode_sym_key(const SymKey& key);
SymKey decode_sym_key(ByteView in);

struct SeckTranscript {
  Bytes offer_frame;     // serialized SECK1 content
  Bytes reply_frame;     // serialized SECK2 content
  Bytes wrapped_key;     // the wrapped link key that follows
  SymKey initiator_key;  // what the holder uses
  SymKey responder_key;  // what the peer recovered
};

/// Runs a complete exchange between two in-process parties, transporting a
/// freshly generated link key. Used for tests and offline tooling; the node
/// engine drives the same steps asynchronously over simulated links.
SeckTranscript seck_exchange(const Provider& p, Rng& rng);

}  // namespace anap::crypto
