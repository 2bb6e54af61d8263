#include "anap/identity.hpp"

#include <set>

namespace anap::identity {

Bytes binding_message(ByteView pseudonym, ByteView public_key) {
  Writer w;
  w.raw(to_bytes("anap/binding"));
  w.bytes16(public_key);
  w.bytes8(pseudonym);
  return std::move(w).take();
}

Bytes encode_registration(const std::vector<RegistrationEntry>& entries) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.bytes8(e.pseudonym);
    w.bytes16(e.public_key);
  }
  return std::move(w).take();
}

std::vector<RegistrationEntry> decode_registration(ByteView in) {
  Reader r(in);
  const auto n = r.u32();
  if (n > in.size()) throw Error(Errc::MalformedFrame, "registration count exceeds input");
  std::vector<RegistrationEntry> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    RegistrationEntry e;
    e.pseudonym = r.bytes8();
    e.public_key = r.bytes16();
    out.push_back(std::move(e));
  }
  r.expect_done();
  return out;
}

Bytes encode_public_list(const std::vector<PseudonymBinding>& pl) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(pl.size()));
  for (const auto& b : pl) {
    w.bytes8(b.pseudonym);
    w.bytes16(b.public_key);
    w.bytes16(b.ta_signature);
  }
  return std::move(w).take();
}

std::vector<PseudonymBinding> decode_public_list(ByteView in) {
  Reader r(in);
  const auto n = r.u32();
  if (n > in.size()) throw Error(Errc::MalformedFrame, "list count exceeds input");
  std::vector<PseudonymBinding> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    PseudonymBinding b;
    b.pseudonym = r.bytes8();
    b.public_key = r.bytes16();
    b.ta_signature = r.bytes16();
    out.push_back(std::move(b));
  }
  r.expect_done();
  return out;
}

bool verify_binding(const crypto::Provider& p, ByteView ta_public_key, const PseudonymBinding& b) {
  return p.verify(ta_public_key, binding_message(b.pseudonym, b.public_key), b.ta_signature);
}

TrustedAuthority::TrustedAuthority(const crypto::Provider& provider, Rng& rng)
    : provider_(provider), keys_(provider.generate_keypair(rng)) {}

std::size_t TrustedAuthority::register_user(ByteView ui, ByteView encrypted_request) {
  Bytes plain;
  try {
    plain = provider_.asym_decrypt(keys_.secret_key, encrypted_request);
  } catch (const Error&) {
    throw Error(Errc::DecryptFail, "registration does not decrypt under the authority key");
  }
  std::vector<RegistrationEntry> entries;
  try {
    entries = decode_registration(plain);
  } catch (const Error&) {
    throw Error(Errc::DecryptFail, "registration plaintext is malformed");
  }

  std::set<Bytes> taken;
  for (const auto& row : cl_) taken.insert(row.binding.pseudonym);
  for (const auto& e : entries) {
    if (e.pseudonym.empty() || e.pseudonym.size() > kMaxPseudonymLen) {
      throw Error(Errc::DecryptFail, "pseudonym length out of range");
    }
    if (!taken.insert(e.pseudonym).second) {
      throw Error(Errc::DuplicatePseudonym, "pseudonym already registered");
    }
  }

  for (const auto& e : entries) {
    PseudonymBinding b{e.pseudonym, e.public_key,
                       provider_.sign(keys_.secret_key, binding_message(e.pseudonym, e.public_key))};
    cl_.push_back(ConfidentialRow{Bytes(ui.begin(), ui.end()), std::move(b)});
  }
  return entries.size();
}

std::vector<PseudonymBinding> TrustedAuthority::public_list() const {
  std::vector<PseudonymBinding> pl;
  pl.reserve(cl_.size());
  for (const auto& row : cl_) pl.push_back(row.binding);
  return pl;
}

Bytes TrustedAuthority::distribute_public_list(const PseudonymBinding& recipient, Rng& rng) const {
  for (const auto& row : cl_) {
    if (row.binding == recipient) {
      return provider_.asym_encrypt(recipient.public_key, encode_public_list(public_list()), rng);
    }
  }
  throw Error(Errc::UnknownRecipient, "recipient is not in the public list");
}

Bytes TrustedAuthority::deanonymize(ByteView pseudonym) const {
  for (const auto& row : cl_) {
    if (std::equal(row.binding.pseudonym.begin(), row.binding.pseudonym.end(), pseudonym.begin(),
                   pseudonym.end())) {
      return row.ui;
    }
  }
  throw Error(Errc::UnknownPseudonym, "pseudonym is not registered");
}

std::vector<OwnPseudonym> generate_pseudonyms(const crypto::Provider& p, Rng& rng,
                                              const std::vector<Bytes>& names) {
  std::vector<OwnPseudonym> out;
  for (const auto& n : names) out.push_back(OwnPseudonym{n, p.generate_keypair(rng)});
  return out;
}

Directory::Directory(std::vector<PseudonymBinding> pl) : rows_(std::move(pl)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) by_name_.emplace(rows_[i].pseudonym, i);
}

const PseudonymBinding* Directory::find(ByteView pseudonym) const {
  auto it = by_name_.find(Bytes(pseudonym.begin(), pseudonym.end()));
  return it == by_name_.end() ? nullptr : &rows_[it->second];
}

}  // namespace anap::identity
