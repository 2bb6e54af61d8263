#pragma once

#include <map>
#include <optional>
#include <vector>

#include "anap/crypto.hpp"

namespace anap::identity {

/// A pseudonym, its public key and the authority's signature over both.
struct PseudonymBinding {
  Bytes pseudonym;
  Bytes public_key;
  Bytes ta_signature;
  bool operator==(const PseudonymBinding&) const = default;
};

struct ConfidentialRow {
  Bytes ui;
  PseudonymBinding binding;
};

/// One (pseudonym, public key) pair a user asks the authority to certify.
struct RegistrationEntry {
  Bytes pseudonym;
  Bytes public_key;
};

constexpr std::size_t kMaxPseudonymLen = 32;

/// The exact octets the authority signs for a binding.
Bytes binding_message(ByteView pseudonym, ByteView public_key);

Bytes encode_registration(const std::vector<RegistrationEntry>& entries);
std::vector<RegistrationEntry> decode_registration(ByteView in);

Bytes encode_public_list(const std::vector<PseudonymBinding>& pl);
std::vector<PseudonymBinding> decode_public_list(ByteView in);

bool verify_binding(const crypto::Provider& p, ByteView ta_public_key, const PseudonymBinding& b);

/// Offline trusted authority. Lives only in the setup epoch.
class TrustedAuthority {
 public:
  TrustedAuthority(const crypto::Provider& provider, Rng& rng);

  const Bytes& public_key() const { return keys_.public_key; }

  /// Decrypts a registration under SK_TA, certifies every pair and appends
  /// them to CL and PL. All-or-nothing: a clash with an existing pseudonym
  /// (or a repeat inside the request) rejects the whole request.
  /// Throws DecryptFail, DuplicatePseudonym.
  std::size_t register_user(ByteView ui, ByteView encrypted_request);

  /// PL encrypted under the recipient's public key. Throws UnknownRecipient.
  Bytes distribute_public_list(const PseudonymBinding& recipient, Rng& rng) const;

  /// Throws UnknownPseudonym.
  Bytes deanonymize(ByteView pseudonym) const;

  const std::vector<ConfidentialRow>& confidential_list() const { return cl_; }
  std::vector<PseudonymBinding> public_list() const;

 private:
  const crypto::Provider& provider_;
  crypto::AsymKeyPair keys_;
  std::vector<ConfidentialRow> cl_;
};

/// A user's private view: own pseudonyms with their key pairs.
struct OwnPseudonym {
  Bytes pseudonym;
  crypto::AsymKeyPair keys;
};

/// Builds the plaintext registration for a set of freshly keyed pseudonyms.
std::vector<OwnPseudonym> generate_pseudonyms(const crypto::Provider& p, Rng& rng,
                                              const std::vector<Bytes>& names);

/// Node-side lookup over a decrypted, verified PL.
class Directory {
 public:
  Directory() = default;
  explicit Directory(std::vector<PseudonymBinding> pl);

  const PseudonymBinding* find(ByteView pseudonym) const;
  std::size_t size() const { return rows_.size(); }
  const std::vector<PseudonymBinding>& rows() const { return rows_; }

 private:
  std::vector<PseudonymBinding> rows_;
  std::map<Bytes, std::size_t> by_name_;
};

}  // namespace anap::identity
