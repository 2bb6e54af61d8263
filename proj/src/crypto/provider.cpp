#include <stdexcept>

#include "anap/crypto.hpp"

namespace anap::crypto {

std::unique_ptr<Provider> make_desk_provider();
std::unique_ptr<Provider> make_real_provider();

std::unique_ptr<Provider> make_provider(std::string_view name) {
  if (name == "desk") return make_desk_provider();
  if (name == "real") return make_real_provider();
  throw std::invalid_argument("unknown crypto provider: " + std::string(name));
}

SymKey Provider::generate_session_key(Rng& rng) const {
  SymKey key;
  key.bytes = rng.bytes(info().sym_key_len);
  do {
    key.key_id = rng.next();
  } while (key.key_id == 0);
  return key;
}

SymKey Provider::derive_key(ByteView material, std::string_view label) const {
  const Bytes label_bytes = to_bytes(label);
  const Digest h = hash(concat({label_bytes, material}));
  SymKey key;
  key.bytes.assign(h.bytes.begin(), h.bytes.begin() + static_cast<std::ptrdiff_t>(info().sym_key_len));
  const Digest id = hash(concat({h.bytes, label_bytes}));
  Reader r(id.bytes);
  key.key_id = r.u64();
  return key;
}

Bytes encode_sym_key(const SymKey& key) {
  Writer w;
  w.u64(key.key_id);
  w.bytes8(key.bytes);
  return std::move(w).take();
}

SymKey decode_sym_key(ByteView in) {
  Reader r(in);
  SymKey key;
  key.key_id = r.u64();
  key.bytes = r.bytes8();
  r.expect_done();
  return key;
}

namespace {

SymKey wrapping_key(const Provider& p, ByteView shared, std::uint64_t xid, ByteView offer_pub,
                    ByteView reply_pub) {
  Writer w;
  w.raw(shared);
  w.u64(xid);
  w.bytes8(offer_pub);
  w.bytes8(reply_pub);
  return p.derive_key(w.data(), "anap/seck-wrap");
}

}  // namespace

SeckInitiator SeckInitiator::start(const Provider& p, Rng& rng) {
  SeckInitiator init;
  init.offer_.xid = rng.next();
  auto eph = p.dh_generate(rng);
  init.offer_.ephemeral = std::move(eph.public_value);
  init.secret_ = std::move(eph.secret);
  return init;
}

SymKey SeckInitiator::finish(const Provider& p, const SeckReply& reply) const {
  if (reply.xid != offer_.xid) throw Error(Errc::MalformedExchange, "exchange id mismatch");
  const Bytes shared = p.dh_shared(secret_, reply.ephemeral);
  return wrapping_key(p, shared, offer_.xid, offer_.ephemeral, reply.ephemeral);
}

SeckAccepted seck_accept(const Provider& p, const SeckOffer& offer, Rng& rng) {
  auto eph = p.dh_generate(rng);
  const Bytes shared = p.dh_shared(eph.secret, offer.ephemeral);
  SeckAccepted out;
  out.reply.xid = offer.xid;
  out.reply.ephemeral = eph.public_value;
  out.wrapping_key = wrapping_key(p, shared, offer.xid, offer.ephemeral, eph.public_value);
  return out;
}

Bytes seck_wrap(const Provider& p, const SymKey& wrapping_key, const SymKey& link_key, Rng& rng) {
  return p.sym_encrypt(wrapping_key, encode_sym_key(link_key), rng);
}

SymKey seck_unwrap(const Provider& p, const SymKey& wrapping_key, ByteView wrapped) {
  const Bytes plain = p.sym_decrypt(wrapping_key, wrapped);
  try {
    return decode_sym_key(plain);
  } catch (const Error&) {
    throw Error(Errc::MalformedExchange, "wrapped key does not decode");
  }
}

SeckTranscript seck_exchange(const Provider& p, Rng& rng) {
  SeckTranscript t;
  t.initiator_key = p.generate_session_key(rng);

  const auto init = SeckInitiator::start(p, rng);
  Writer offer;
  offer.u64(init.offer().xid);
  offer.bytes8(init.offer().ephemeral);
  t.offer_frame = std::move(offer).take();

  const auto accepted = seck_accept(p, init.offer(), rng);
  Writer reply;
  reply.u64(accepted.reply.xid);
  reply.bytes8(accepted.reply.ephemeral);
  t.reply_frame = std::move(reply).take();

  const SymKey w = init.finish(p, accepted.reply);
  t.wrapped_key = seck_wrap(p, w, t.initiator_key, rng);
  t.responder_key = seck_unwrap(p, accepted.wrapping_key, t.wrapped_key);
  return t;
}

}  // namespace anap::crypto
