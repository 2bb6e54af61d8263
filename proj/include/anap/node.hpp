#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include "anap/crypto.hpp"
#include "anap/identity.hpp"
#include "anap/reputation.hpp"
#include "anap/wire.hpp"

namespace anap::node {

struct ProtocolParams {
  double rt_timeout = 30.0;
  double ft_timeout = 120.0;
  double maintenance_wait = 10.0;
  double handshake_timeout = 10.0;
  double seck_timeout = 1.0;
  double watchdog_timeout = 0.5;
  double delay_threshold = 0.25;  // a relay seen later than this is a delay, not a clean forward
  double sweep_interval = 0.5;
  double vote_timeout = 2.0;
  double reply_window = 0.05;  // candidate collection at both endpoints
  std::size_t max_paths = 1;
  bool overhear_intermediates = false;
  bool pseudonym_hints = true;
  std::size_t frame_size = wire::kDefaultFrameSize;
  bool plant_leak = false;  // negative control: writes S_ID into REQ padding
};

enum class TxKind { Originate, Relay, Replay };

std::string_view tx_kind_name(TxKind k) noexcept;

struct TraceEvent {
  std::string sess;
  int phase = 0;  // 1-3 handshake, 4 data, 5 maintenance, 6 votes, 0 other
  std::string step;
  std::string what;
};

/// Everything a node may do to the outside world. Implemented by the
/// simulator; a node never touches another node directly.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual double now() const = 0;
  virtual Rng& rng() = 0;
  virtual void broadcast(NodeId from, Bytes frame, wire::FrameType type, TxKind kind) = 0;
  virtual void unicast(NodeId from, NodeId to, Bytes frame, wire::FrameType type, TxKind kind) = 0;
  /// Current link-layer neighbours (alive and in range).
  virtual std::vector<NodeId> neighbors(NodeId of) const = 0;
  virtual void schedule(NodeId owner, double delay, std::function<void()> fn) = 0;
  virtual std::string name_of(NodeId id) const = 0;

  virtual void on_event(NodeId node, const TraceEvent& ev) = 0;
  virtual void on_reputation(NodeId observer, const rep::Record& r, std::string_view cause) = 0;
  virtual void on_deliver(NodeId node, const std::string& sess, const Bytes& payload) = 0;
};

struct ReverseEntry {
  Bytes r_id;
  std::uint32_t seq = 0;
  std::uint32_t gen = 0;
  NodeId source_node = 0;
  double inserted_at = 0.0;
};

struct RequestEntry {
  Bytes r_id;
  std::uint32_t seq = 0;
  bool reply = false;
  bool originated = false;  // false for the destination's own bookkeeping row
  std::uint32_t iseq = 0;
  Bytes dest;
  std::size_t own_index = 0;
};

struct ForwardEntry {
  Bytes path_id;
  std::uint32_t seq = 0;
  std::uint32_t gen = 0;
  Bytes twin_id;
  bool toward_source = false;  // path_id is an R_ID
  NodeId from_node = 0;
  std::optional<crypto::SymKey> k_from;
  NodeId to_node = 0;
  std::optional<crypto::SymKey> k_to;
  std::optional<crypto::SymKey> k_watch;  // next-next key this node issued
  double last_used = 0.0;
  bool err_sent = false;
};

struct Session {
  std::string id;
  Bytes peer;
  Bytes own_pseudonym;
  crypto::SymKey k_ses;
  Bytes r_id;
  Bytes f_id;
  std::uint32_t seq = 0;
  std::uint32_t iseq_base = 0;
  bool authenticated = false;
  bool initiator = false;
  std::uint32_t out_iseq = 0;
  std::uint32_t in_iseq = 0;
  std::optional<Bytes> peer_hint;
  bool maintaining = false;
};

struct ReplyCandidate {
  NodeId via = 0;
  double sr = 0.0;
  Bytes twin;
};

/// Indices of accepted candidates: distinct first hops not already bound to
/// the path, ranked by SR (descending), ties by node id, at most max_paths.
std::vector<std::size_t> select_paths(const std::vector<ReplyCandidate>& candidates,
                                      std::size_t max_paths, const std::set<NodeId>& busy_hops);

/// "<first 8 hex digits of R_ID>:<Seq>"
std::string session_label(ByteView r_id, std::uint32_t seq);

struct NodeIdentity {
  std::vector<identity::OwnPseudonym> own;
  identity::Directory directory;
};

class Node {
 public:
  Node(NodeId id, const crypto::Provider& provider, ProtocolParams params, rep::Params rep_params,
       rep::ScoringTable scoring, NodeIdentity identity, Environment& env);

  NodeId id() const { return id_; }

  /// Phase I. Returns the session label. Throws UnknownDestination.
  std::string originate_request(ByteView dest_pseudonym, std::size_t own_index = 0);
  /// Throws SessionNotAuthenticated, Oversize, NoForwardPath.
  void send_data(const std::string& session, ByteView payload);
  void request_votes();
  /// Frame delivery from the radio. `overheard` marks promiscuous copies.
  void receive(NodeId from, ByteView octets, bool overheard);
  /// Periodic housekeeping: expiry, link-loss detection, error reports.
  void tick();
  std::size_t timer_sweep(double now);

  void set_discredit(NodeId target, double value) { discredit_[target] = value; }

  const std::map<std::tuple<Bytes, std::uint32_t, std::uint32_t>, ReverseEntry>& rt() const { return rt_; }
  const std::map<std::pair<Bytes, std::uint32_t>, RequestEntry>& rqt() const { return rqt_; }
  const std::vector<ForwardEntry>& ft() const { return ft_; }
  const std::map<Bytes, Session>& sessions() const { return sessions_; }
  const Session* find_session(const std::string& label) const;
  const rep::ReputationTable& reputation() const { return rep_; }
  std::size_t link_key_count() const;
  const NodeIdentity& identity() const { return ident_; }

 private:
  using RtKey = std::tuple<Bytes, std::uint32_t, std::uint32_t>;

  struct QueuedLink {
    wire::FrameType type;
    wire::LinkPayload payload;
    TxKind kind;
  };
  struct OutgoingSeck {
    NodeId to = 0;
    crypto::SeckInitiator init;
    crypto::SymKey key;
    std::vector<QueuedLink> queue;
    TxKind kind = TxKind::Originate;
    std::string sess;
  };
  struct IncomingSeck {
    crypto::SymKey wrapping_key;
    double expiry = 0.0;
  };
  struct Expectation {
    NodeId subject = 0;
    wire::FrameType type = wire::FrameType::REQ;
    std::optional<crypto::SymKey> key;
    Bytes path_id;
    std::uint32_t seq = 0;
    std::uint32_t gen = 0;
    Bytes inner;
    double created = 0.0;
    bool satisfied = false;
    std::string sess;
  };
  struct SourceCandidate {
    NodeId via = 0;
    crypto::SymKey k_from;
    wire::LinkPayload payload;
  };
  struct PendingReply {  // destination collecting reverse hops
    Bytes r_id;
    std::uint32_t seq = 0;
    std::size_t own_index = 0;
    Bytes s_id;
    std::uint32_t iseq = 0;
    std::vector<NodeId> hops;
    bool fired = false;
  };
  struct Maintenance {
    Bytes path_id;
    std::uint32_t seq = 0;
    std::uint32_t gen = 0;
    Bytes f_id;
    bool done = false;
  };

  // transmission helpers
  void emit(const std::string& sess, int phase, std::string step, std::string what);
  void observe(NodeId subject, std::string_view cls, const std::string& sess = {});
  std::string nm(NodeId id) const { return env_.name_of(id); }
  void send_link(NodeId to, const crypto::SymKey& key, wire::FrameType type, wire::LinkPayload payload,
                 TxKind kind, const std::string& sess);
  void transmit_link(NodeId to, const crypto::SymKey& key, wire::FrameType type,
                     const wire::LinkPayload& payload, TxKind kind, std::optional<wire::WrapBlock> wrap);
  bool is_neighbor(NodeId n) const;
  bool alive_hop(NodeId n) const { return n == id_ || is_neighbor(n); }
  void expect(NodeId subject, wire::FrameType type, std::optional<crypto::SymKey> key, Bytes path_id,
              std::uint32_t seq, std::uint32_t gen, Bytes inner, const std::string& sess);
  void check_watch_req(NodeId from, const wire::ReqHeader& h, const Bytes& body);
  void check_watch_link(NodeId from, wire::FrameType type, const wire::LinkHeader& h, const Bytes& body);

  // frame handlers
  void on_req(NodeId from, const wire::ReqHeader& h, const Bytes& body);
  void on_maintenance_req(NodeId from, const wire::ReqHeader& h);
  void on_seck1(NodeId from, const wire::SeckHeader& h, TxKind reply_kind);
  void on_seck2(NodeId from, const wire::SeckHeader& h);
  void on_link(NodeId from, wire::FrameType type, const wire::LinkHeader& h, const Bytes& body);
  void on_reply(NodeId from, const crypto::SymKey& k, const wire::LinkPayload& p);
  void on_ack(NodeId from, const crypto::SymKey& k, const wire::LinkPayload& p);
  void on_data(NodeId from, const wire::LinkPayload& p);
  void on_err(NodeId from, const wire::LinkPayload& p);
  void on_maint_reply(NodeId from, const crypto::SymKey& k, const wire::LinkPayload& p);
  void on_reqv(NodeId from, const wire::ReqvHeader& h, const Bytes& body);
  void on_repv(NodeId from, const wire::RepvHeader& h, const Bytes& body);

  // protocol steps
  void begin_phase_ii(NodeId from, const wire::ReqHeader& h, const Bytes& body, std::size_t own_index);
  void originate_replies(const RtKey& key);
  void reply_via(PendingReply& pr, NodeId hop);
  void close_reply_window(const std::pair<Bytes, std::uint32_t>& key);
  void enter_phase_iii(const RequestEntry& rq, const SourceCandidate& c);
  void start_maintenance(Session& s);
  void emit_err(ForwardEntry& e);

  ForwardEntry* find_entry(ByteView path_id, std::uint32_t seq, ByteView twin);
  ForwardEntry* find_entry_from(ByteView path_id, std::uint32_t seq, ByteView twin, NodeId from);
  void put_entry(ForwardEntry e);
  void add_binding(NodeId origin, const crypto::SymKey& key);
  void touch_pair(ForwardEntry& e);
  Session* session_for_path(ByteView path_id, ByteView twin, bool toward_source);
  std::string label_for(const wire::LinkPayload& p) const;
  Bytes fresh_f_id();
  const identity::OwnPseudonym* own_by_hash(ByteView r_id, std::size_t* index) const;

  NodeId id_;
  const crypto::Provider& provider_;
  ProtocolParams params_;
  NodeIdentity ident_;
  Environment& env_;
  rep::ReputationTable rep_;
  rep::VoteExchange votes_;

  std::vector<Bytes> own_hashes_;
  std::uint32_t next_seq_;
  std::map<RtKey, ReverseEntry> rt_;
  std::map<RtKey, std::set<NodeId>> req_seen_;
  std::map<std::pair<Bytes, std::uint32_t>, RequestEntry> rqt_;
  std::vector<ForwardEntry> ft_;
  std::map<std::pair<Bytes, std::uint32_t>, std::vector<SourceCandidate>> source_candidates_;
  std::map<RtKey, PendingReply> pending_replies_;

  std::map<NodeId, std::vector<crypto::SymKey>> bindings_;  // received link keys per origin
  std::set<std::pair<NodeId, std::uint64_t>> delivered_;    // (peer, key_id) the peer already holds
  std::map<std::uint64_t, OutgoingSeck> seck_out_;
  std::map<std::pair<NodeId, std::uint64_t>, IncomingSeck> seck_in_;

  std::map<std::uint64_t, Expectation> watch_;
  std::uint64_t next_watch_ = 1;

  std::map<Bytes, Session> sessions_;  // by F_ID
  std::map<std::pair<Bytes, std::uint32_t>, Maintenance> maintenance_;
  std::map<NodeId, double> discredit_;
};

}  // namespace anap::node
