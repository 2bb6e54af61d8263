#pragma once

#include <optional>
#include <variant>

#include "anap/crypto.hpp"

namespace anap::wire {

enum class FrameType : std::uint8_t {
  REQ = 1,
  REP = 2,
  ACK = 3,
  ERR = 4,
  REQV = 5,
  REPV = 6,
  DATA = 7,
  SECK1 = 8,
  SECK2 = 9,
};

std::string_view frame_type_name(FrameType t) noexcept;
bool is_link_frame(FrameType t) noexcept;

constexpr std::size_t kDefaultFrameSize = 512;

/// Discovery (gen 0) or maintenance (gen > 0) request header.
struct ReqHeader {
  Bytes path_id;
  std::uint32_t seq = 0;
  std::uint32_t gen = 0;
  bool operator==(const ReqHeader&) const = default;
};

/// Link key delivered under a key-transport wrapping key.
struct WrapBlock {
  std::uint64_t xid = 0;
  Bytes blob;
  bool operator==(const WrapBlock&) const = default;
};

/// Header of every link-encrypted frame (REP, ACK, DATA, ERR).
struct LinkHeader {
  std::uint64_t key_tag = 0;
  std::optional<WrapBlock> wrap;
  bool operator==(const LinkHeader&) const = default;
};

struct SeckHeader {
  std::uint64_t xid = 0;
  Bytes ephemeral;
  bool operator==(const SeckHeader&) const = default;
};

struct ReqvHeader {
  std::uint32_t seq = 0;
  bool operator==(const ReqvHeader&) const = default;
};

struct RepvHeader {
  Bytes seq_hash;
  bool operator==(const RepvHeader&) const = default;
};

using Headers = std::variant<ReqHeader, LinkHeader, SeckHeader, ReqvHeader, RepvHeader>;

struct Frame {
  FrameType type = FrameType::REQ;
  Headers headers;
  Bytes body;
  bool operator==(const Frame&) const = default;
};

struct Padding {
  std::uint16_t length = 0;
  Bytes bytes;
};

/// Padding that brings `content_len` up to exactly `budget`. Throws Oversize.
Padding pad_to_constant(std::size_t content_len, std::size_t budget, Rng& rng);

/// Layout: tag, type headers, u16 body length, body, u16 L_P, P.
/// Output is exactly frame_size octets. Throws Oversize.
Bytes encode_frame(const Frame& f, std::size_t frame_size, Rng& rng);
/// Throws MalformedFrame.
Frame decode_frame(ByteView octets, std::size_t frame_size);

/// Offset and length of the body inside an encoded frame.
std::pair<std::size_t, std::size_t> body_range(ByteView octets, std::size_t frame_size);
/// Offset and length of the trailing padding inside an encoded frame.
std::pair<std::size_t, std::size_t> padding_range(ByteView octets, std::size_t frame_size);

// ---------------------------------------------------------------------------
// Inner payloads. Each is padded to a fixed size so that every ciphertext of
// a given kind has the same length.

constexpr std::size_t kRequestInnerSize = 64;
constexpr std::size_t kReplyInnerSize = 128;
constexpr std::size_t kAckInnerSize = 64;
constexpr std::size_t kDataInnerSize = 256;
constexpr std::size_t kLinkPayloadSize = 376;
constexpr std::size_t kVoteListSize = 2 + 12 * 24 + 2;
constexpr std::size_t kMaxVotes = 24;
constexpr std::size_t kMaxDataPayload = kDataInnerSize - 1 - 4 - 2 - 2;

/// M_S = S_ID, ISeq, L_P, P
struct RequestInner {
  Bytes s_id;
  std::uint32_t iseq = 0;
  bool operator==(const RequestInner&) const = default;
};

/// M_D = REP, F_ID, D_ID*, K_SES, ISeq+1, L_P, P
struct ReplyInner {
  Bytes f_id;
  std::optional<Bytes> d_hint;
  crypto::SymKey k_ses;
  std::uint32_t iseq_next = 0;
  bool operator==(const ReplyInner&) const = default;
};

/// ACK, S_ID*, ISeq+2, L_P, P
struct AckInner {
  std::optional<Bytes> s_hint;
  std::uint32_t iseq_next2 = 0;
  bool operator==(const AckInner&) const = default;
};

struct DataInner {
  std::uint32_t iseq = 0;
  Bytes payload;
  bool operator==(const DataInner&) const = default;
};

/// Message plus signature over exactly those octets.
struct SignedBlob {
  Bytes message;
  Bytes signature;
  bool operator==(const SignedBlob&) const = default;
};

Bytes encode_request_inner(const RequestInner& m, Rng& rng);
RequestInner decode_request_inner(ByteView in);
Bytes encode_reply_inner(const ReplyInner& m, Rng& rng);
ReplyInner decode_reply_inner(ByteView in);
Bytes encode_ack_inner(const AckInner& m, Rng& rng);
AckInner decode_ack_inner(ByteView in);
Bytes encode_data_inner(const DataInner& m, Rng& rng);
DataInner decode_data_inner(ByteView in);
Bytes encode_signed(const SignedBlob& b);
SignedBlob decode_signed(ByteView in);

enum class LinkKind : std::uint8_t {
  Reply = 1,
  Ack = 2,
  Data = 3,
  Err = 4,
  MaintReply = 5,
};

/// Plaintext of a link-encrypted frame body.
///   Reply:      path R_ID, twin F_ID, K_NN, inner E_PK_S(M_D, Sig)
///   Ack:        path F_ID, K_NN, inner E_K_SES(ACK inner)
///   Data:       path F_ID, or R_ID with twin F_ID; inner E_K_SES(data)
///   Err:        path id of the broken direction (twin when it is R_ID)
///   MaintReply: path id toward the requester, twin, K_back; no inner
struct LinkPayload {
  LinkKind kind = LinkKind::Reply;
  bool toward_source = false;  // path_id is an R_ID (D to S direction)
  Bytes path_id;
  std::optional<Bytes> twin_id;
  std::uint32_t seq = 0;
  std::uint32_t gen = 0;
  std::optional<crypto::SymKey> k_nn;
  std::optional<crypto::SymKey> k_back;
  Bytes inner;
  bool operator==(const LinkPayload&) const = default;
};

Bytes encode_link_payload(const LinkPayload& p, Rng& rng);
LinkPayload decode_link_payload(ByteView in);

struct VoteEntry {
  std::uint32_t subject = 0;
  double value = 0.0;
  bool operator==(const VoteEntry&) const = default;
};

/// At most kMaxVotes entries; padded to kVoteListSize. Throws Oversize.
Bytes encode_vote_list(const std::vector<VoteEntry>& votes, Rng& rng);
std::vector<VoteEntry> decode_vote_list(ByteView in);

/// hash(be32(seq + 1)), the REPV correlation value.
Bytes vote_seq_hash(const crypto::Provider& p, std::uint32_t seq);

/// Rotating key identifier: high 32 bits are a per-frame nonce, low 32 bits
/// bind the nonce to the key. Only holders of the key can match it.
std::uint64_t make_key_tag(const crypto::Provider& p, const crypto::SymKey& key, std::uint32_t nonce);
bool key_tag_matches(const crypto::Provider& p, const crypto::SymKey& key, std::uint64_t tag);

/// Smallest frame size that holds every frame kind under this provider.
std::size_t min_frame_size(const crypto::ProviderInfo& info);

}  // namespace anap::wire
