#include "anap/wire.hpp"

#include <algorithm>
#include <cmath>

namespace anap::wire {
namespace {

constexpr std::uint8_t kTagRequest = 1;
constexpr std::uint8_t kTagReply = 2;
constexpr std::uint8_t kTagAck = 3;
constexpr std::uint8_t kTagData = 7;

void put_padding(Writer& w, std::size_t target, Rng& rng) {
  if (w.size() + 2 > target) throw Error(Errc::Oversize, "payload exceeds its fixed size");
  const Padding pad = pad_to_constant(w.size() + 2, target, rng);
  w.u16(pad.length);
  w.raw(pad.bytes);
}

void take_padding(Reader& r) {
  const auto lp = r.u16();
  if (lp != r.remaining()) throw Error(Errc::MalformedFrame, "padding length mismatch");
  r.raw(lp);
}

void put_optional(Writer& w, const std::optional<Bytes>& b) {
  w.u8(b ? 1 : 0);
  if (b) w.bytes8(*b);
}

std::optional<Bytes> take_optional(Reader& r) {
  const auto flag = r.u8();
  if (flag > 1) throw Error(Errc::MalformedFrame, "bad presence flag");
  if (!flag) return std::nullopt;
  return r.bytes8();
}

void put_key(Writer& w, const std::optional<crypto::SymKey>& k) {
  w.u8(k ? 1 : 0);
  if (k) {
    w.u64(k->key_id);
    w.bytes8(k->bytes);
  }
}

std::optional<crypto::SymKey> take_key(Reader& r) {
  const auto flag = r.u8();
  if (flag > 1) throw Error(Errc::MalformedFrame, "bad presence flag");
  if (!flag) return std::nullopt;
  crypto::SymKey k;
  k.key_id = r.u64();
  k.bytes = r.bytes8();
  return k;
}

void expect_kind(Reader& r, std::uint8_t kind) {
  if (r.u8() != kind) throw Error(Errc::MalformedFrame, "unexpected inner payload kind");
}

void write_headers(Writer& w, const Frame& f) {
  switch (f.type) {
    case FrameType::REQ: {
      const auto& h = std::get<ReqHeader>(f.headers);
      w.bytes8(h.path_id);
      w.u32(h.seq);
      w.u32(h.gen);
      break;
    }
    case FrameType::REP:
    case FrameType::ACK:
    case FrameType::ERR:
    case FrameType::DATA: {
      const auto& h = std::get<LinkHeader>(f.headers);
      w.u64(h.key_tag);
      w.u8(h.wrap ? 1 : 0);
      if (h.wrap) {
        w.u64(h.wrap->xid);
        w.bytes8(h.wrap->blob);
      }
      break;
    }
    case FrameType::SECK1:
    case FrameType::SECK2: {
      const auto& h = std::get<SeckHeader>(f.headers);
      w.u64(h.xid);
      w.bytes8(h.ephemeral);
      break;
    }
    case FrameType::REQV:
      w.u32(std::get<ReqvHeader>(f.headers).seq);
      break;
    case FrameType::REPV:
      w.bytes8(std::get<RepvHeader>(f.headers).seq_hash);
      break;
  }
}

Headers read_headers(Reader& r, FrameType t) {
  switch (t) {
    case FrameType::REQ: {
      ReqHeader h;
      h.path_id = r.bytes8();
      h.seq = r.u32();
      h.gen = r.u32();
      return h;
    }
    case FrameType::REP:
    case FrameType::ACK:
    case FrameType::ERR:
    case FrameType::DATA: {
      LinkHeader h;
      h.key_tag = r.u64();
      const auto flag = r.u8();
      if (flag > 1) throw Error(Errc::MalformedFrame, "bad wrap flag");
      if (flag) {
        WrapBlock wb;
        wb.xid = r.u64();
        wb.blob = r.bytes8();
        h.wrap = std::move(wb);
      }
      return h;
    }
    case FrameType::SECK1:
    case FrameType::SECK2: {
      SeckHeader h;
      h.xid = r.u64();
      h.ephemeral = r.bytes8();
      return h;
    }
    case FrameType::REQV:
      return ReqvHeader{r.u32()};
    case FrameType::REPV:
      return RepvHeader{r.bytes8()};
  }
  throw Error(Errc::MalformedFrame, "unknown frame type");
}

bool known_type(std::uint8_t tag) { return tag >= 1 && tag <= 9; }

bool headers_match(FrameType t, const Headers& h) {
  switch (t) {
    case FrameType::REQ: return std::holds_alternative<ReqHeader>(h);
    case FrameType::REP:
    case FrameType::ACK:
    case FrameType::ERR:
    case FrameType::DATA: return std::holds_alternative<LinkHeader>(h);
    case FrameType::SECK1:
    case FrameType::SECK2: return std::holds_alternative<SeckHeader>(h);
    case FrameType::REQV: return std::holds_alternative<ReqvHeader>(h);
    case FrameType::REPV: return std::holds_alternative<RepvHeader>(h);
  }
  return false;
}

}  // namespace

std::string_view frame_type_name(FrameType t) noexcept {
  switch (t) {
    case FrameType::REQ: return "REQ";
    case FrameType::REP: return "REP";
    case FrameType::ACK: return "ACK";
    case FrameType::ERR: return "ERR";
    case FrameType::REQV: return "REQV";
    case FrameType::REPV: return "REPV";
    case FrameType::DATA: return "DATA";
    case FrameType::SECK1: return "SECK1";
    case FrameType::SECK2: return "SECK2";
  }
  return "?";
}

bool is_link_frame(FrameType t) noexcept {
  return t == FrameType::REP || t == FrameType::ACK || t == FrameType::ERR || t == FrameType::DATA;
}

Padding pad_to_constant(std::size_t content_len, std::size_t budget, Rng& rng) {
  if (content_len > budget) throw Error(Errc::Oversize, "content exceeds the budget");
  const std::size_t n = budget - content_len;
  if (n > 0xffff) throw Error(Errc::Oversize, "padding exceeds u16 length");
  return Padding{static_cast<std::uint16_t>(n), rng.bytes(n)};
}

Bytes encode_frame(const Frame& f, std::size_t frame_size, Rng& rng) {
  if (!headers_match(f.type, f.headers)) throw std::invalid_argument("headers do not match frame type");
  Writer w;
  w.u8(static_cast<std::uint8_t>(f.type));
  write_headers(w, f);
  w.bytes16(f.body);
  put_padding(w, frame_size, rng);
  return std::move(w).take();
}

Frame decode_frame(ByteView octets, std::size_t frame_size) {
  if (octets.size() != frame_size) throw Error(Errc::MalformedFrame, "wrong total length");
  Reader r(octets);
  const auto tag = r.u8();
  if (!known_type(tag)) throw Error(Errc::MalformedFrame, "bad frame tag");
  Frame f;
  f.type = static_cast<FrameType>(tag);
  f.headers = read_headers(r, f.type);
  f.body = r.bytes16();
  take_padding(r);
  return f;
}

std::pair<std::size_t, std::size_t> body_range(ByteView octets, std::size_t frame_size) {
  if (octets.size() != frame_size) throw Error(Errc::MalformedFrame, "wrong total length");
  Reader r(octets);
  const auto tag = r.u8();
  if (!known_type(tag)) throw Error(Errc::MalformedFrame, "bad frame tag");
  read_headers(r, static_cast<FrameType>(tag));
  const auto len = r.u16();
  return {r.offset(), len};
}

std::pair<std::size_t, std::size_t> padding_range(ByteView octets, std::size_t frame_size) {
  auto [off, len] = body_range(octets, frame_size);
  const std::size_t pad_off = off + len + 2;
  if (pad_off > octets.size()) throw Error(Errc::MalformedFrame, "truncated frame");
  return {pad_off, octets.size() - pad_off};
}

Bytes encode_request_inner(const RequestInner& m, Rng& rng) {
  Writer w;
  w.u8(kTagRequest);
  w.bytes8(m.s_id);
  w.u32(m.iseq);
  put_padding(w, kRequestInnerSize, rng);
  return std::move(w).take();
}

RequestInner decode_request_inner(ByteView in) {
  Reader r(in);
  expect_kind(r, kTagRequest);
  RequestInner m;
  m.s_id = r.bytes8();
  m.iseq = r.u32();
  take_padding(r);
  return m;
}

Bytes encode_reply_inner(const ReplyInner& m, Rng& rng) {
  Writer w;
  w.u8(kTagReply);
  w.bytes8(m.f_id);
  put_optional(w, m.d_hint);
  put_key(w, m.k_ses);
  w.u32(m.iseq_next);
  put_padding(w, kReplyInnerSize, rng);
  return std::move(w).take();
}

ReplyInner decode_reply_inner(ByteView in) {
  Reader r(in);
  expect_kind(r, kTagReply);
  ReplyInner m;
  m.f_id = r.bytes8();
  m.d_hint = take_optional(r);
  auto k = take_key(r);
  if (!k) throw Error(Errc::MalformedFrame, "reply without session key");
  m.k_ses = std::move(*k);
  m.iseq_next = r.u32();
  take_padding(r);
  return m;
}

Bytes encode_ack_inner(const AckInner& m, Rng& rng) {
  Writer w;
  w.u8(kTagAck);
  put_optional(w, m.s_hint);
  w.u32(m.iseq_next2);
  put_padding(w, kAckInnerSize, rng);
  return std::move(w).take();
}

AckInner decode_ack_inner(ByteView in) {
  Reader r(in);
  expect_kind(r, kTagAck);
  AckInner m;
  m.s_hint = take_optional(r);
  m.iseq_next2 = r.u32();
  take_padding(r);
  return m;
}

Bytes encode_data_inner(const DataInner& m, Rng& rng) {
  Writer w;
  w.u8(kTagData);
  w.u32(m.iseq);
  w.bytes16(m.payload);
  put_padding(w, kDataInnerSize, rng);
  return std::move(w).take();
}

DataInner decode_data_inner(ByteView in) {
  Reader r(in);
  expect_kind(r, kTagData);
  DataInner m;
  m.iseq = r.u32();
  m.payload = r.bytes16();
  take_padding(r);
  return m;
}

Bytes encode_signed(const SignedBlob& b) {
  Writer w;
  w.bytes16(b.message);
  w.bytes16(b.signature);
  return std::move(w).take();
}

SignedBlob decode_signed(ByteView in) {
  Reader r(in);
  SignedBlob b;
  b.message = r.bytes16();
  b.signature = r.bytes16();
  r.expect_done();
  return b;
}

Bytes encode_link_payload(const LinkPayload& p, Rng& rng) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(p.kind));
  w.u8(p.toward_source ? 1 : 0);
  w.bytes8(p.path_id);
  put_optional(w, p.twin_id);
  w.u32(p.seq);
  w.u32(p.gen);
  put_key(w, p.k_nn);
  put_key(w, p.k_back);
  w.bytes16(p.inner);
  put_padding(w, kLinkPayloadSize, rng);
  return std::move(w).take();
}

LinkPayload decode_link_payload(ByteView in) {
  Reader r(in);
  LinkPayload p;
  const auto kind = r.u8();
  if (kind < 1 || kind > 5) throw Error(Errc::MalformedFrame, "bad link payload kind");
  p.kind = static_cast<LinkKind>(kind);
  const auto dir = r.u8();
  if (dir > 1) throw Error(Errc::MalformedFrame, "bad link payload direction");
  p.toward_source = dir == 1;
  p.path_id = r.bytes8();
  p.twin_id = take_optional(r);
  p.seq = r.u32();
  p.gen = r.u32();
  p.k_nn = take_key(r);
  p.k_back = take_key(r);
  p.inner = r.bytes16();
  take_padding(r);
  return p;
}

Bytes encode_vote_list(const std::vector<VoteEntry>& votes, Rng& rng) {
  if (votes.size() > kMaxVotes) throw Error(Errc::Oversize, "too many votes for one response");
  Writer w;
  w.u16(static_cast<std::uint16_t>(votes.size()));
  for (const auto& v : votes) {
    w.u32(v.subject);
    w.f64(v.value);
  }
  put_padding(w, kVoteListSize, rng);
  return std::move(w).take();
}

std::vector<VoteEntry> decode_vote_list(ByteView in) {
  Reader r(in);
  const auto n = r.u16();
  if (n > kMaxVotes) throw Error(Errc::MalformedFrame, "vote count out of range");
  std::vector<VoteEntry> out;
  for (std::uint16_t i = 0; i < n; ++i) {
    VoteEntry v;
    v.subject = r.u32();
    v.value = r.f64();
    if (!std::isfinite(v.value)) throw Error(Errc::MalformedFrame, "non-finite vote");
    out.push_back(v);
  }
  take_padding(r);
  return out;
}

Bytes vote_seq_hash(const crypto::Provider& p, std::uint32_t seq) {
  Writer w;
  w.u32(seq + 1);
  return p.hash(w.data()).bytes;
}

std::uint64_t make_key_tag(const crypto::Provider& p, const crypto::SymKey& key, std::uint32_t nonce) {
  Writer w;
  w.raw(key.bytes);
  w.u64(key.key_id);
  w.u32(nonce);
  const auto d = p.hash(w.data());
  Reader r(d.bytes);
  return (std::uint64_t{nonce} << 32) | r.u32();
}

bool key_tag_matches(const crypto::Provider& p, const crypto::SymKey& key, std::uint64_t tag) {
  return make_key_tag(p, key, static_cast<std::uint32_t>(tag >> 32)) == tag;
}

std::size_t min_frame_size(const crypto::ProviderInfo& info) {
  const std::size_t wrapped_key = info.sym_overhead + 8 + 1 + info.sym_key_len;
  const std::size_t link = 1 + 8 + 1 + 8 + 1 + wrapped_key + 2 + info.sym_overhead + kLinkPayloadSize + 2;
  const std::size_t signed_ms = 2 + kRequestInnerSize + 2 + info.signature_len;
  const std::size_t req = 1 + 1 + info.digest_len + 8 + 2 + info.asym_overhead + signed_ms + 2;
  const std::size_t repv = 1 + 1 + info.digest_len + 2 + info.asym_overhead + kVoteListSize + 2;
  const std::size_t seck = 1 + 8 + 1 + info.public_key_len + 2 + 2;
  const std::size_t reqv = 1 + 4 + 2 + info.public_key_len + 2;
  return std::max({link, req, repv, seck, reqv});
}

}  // namespace anap::wire
