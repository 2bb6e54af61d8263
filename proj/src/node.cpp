#include "anap/node.hpp"

#include <algorithm>
#include <numeric>

namespace anap::node {

using crypto::SymKey;
using wire::Frame;
using wire::FrameType;
using wire::LinkKind;
using wire::LinkPayload;

std::string_view tx_kind_name(TxKind k) noexcept {
  switch (k) {
    case TxKind::Originate: return "originate";
    case TxKind::Relay: return "relay";
    case TxKind::Replay: return "replay";
  }
  return "?";
}

std::vector<std::size_t> select_paths(const std::vector<ReplyCandidate>& candidates,
                                      std::size_t max_paths, const std::set<NodeId>& busy_hops) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = candidates[a];
    const auto& y = candidates[b];
    if (x.sr != y.sr) return x.sr > y.sr;
    return x.via < y.via;
  });
  std::set<NodeId> used = busy_hops;
  std::vector<std::size_t> out;
  for (auto i : order) {
    if (out.size() >= max_paths) break;
    if (!used.insert(candidates[i].via).second) continue;
    out.push_back(i);
  }
  return out;
}

std::string session_label(ByteView r_id, std::uint32_t seq) {
  return to_hex(r_id.first(std::min<std::size_t>(4, r_id.size()))) + ":" + std::to_string(seq);
}

Node::Node(NodeId id, const crypto::Provider& provider, ProtocolParams params, rep::Params rep_params,
           rep::ScoringTable scoring, NodeIdentity identity, Environment& env)
    : id_(id),
      provider_(provider),
      params_(params),
      ident_(std::move(identity)),
      env_(env),
      rep_(rep_params, std::move(scoring)),
      votes_(static_cast<std::uint32_t>(env.rng().below(1u << 20)) + 1),
      next_seq_(static_cast<std::uint32_t>(env.rng().below(1u << 20)) + 1) {
  for (const auto& o : ident_.own) own_hashes_.push_back(provider_.hash(o.pseudonym).bytes);
}

// ---------------------------------------------------------------------------
// plumbing

void Node::emit(const std::string& sess, int phase, std::string step, std::string what) {
  env_.on_event(id_, TraceEvent{sess, phase, std::move(step), std::move(what)});
}

void Node::observe(NodeId subject, std::string_view cls, const std::string& sess) {
  const rep::Record& r = rep_.observe(subject, cls, env_.now());
  env_.on_reputation(id_, r, cls);
  (void)sess;
}

bool Node::is_neighbor(NodeId n) const {
  const auto nb = env_.neighbors(id_);
  return std::find(nb.begin(), nb.end(), n) != nb.end();
}

void Node::add_binding(NodeId origin, const SymKey& key) {
  auto& keys = bindings_[origin];
  for (const auto& k : keys) {
    if (k.key_id == key.key_id && k.bytes == key.bytes) return;
  }
  keys.push_back(key);
}

std::size_t Node::link_key_count() const {
  std::size_t n = 0;
  for (const auto& [origin, keys] : bindings_) n += keys.size();
  return n;
}

ForwardEntry* Node::find_entry(ByteView path_id, std::uint32_t seq, ByteView twin) {
  for (auto& e : ft_) {
    if (e.seq == seq && std::ranges::equal(e.path_id, path_id) && std::ranges::equal(e.twin_id, twin)) {
      return &e;
    }
  }
  return nullptr;
}

ForwardEntry* Node::find_entry_from(ByteView path_id, std::uint32_t seq, ByteView twin, NodeId from) {
  ForwardEntry* e = find_entry(path_id, seq, twin);
  return e && e->from_node == from ? e : nullptr;
}

void Node::put_entry(ForwardEntry e) {
  if (ForwardEntry* old = find_entry(e.path_id, e.seq, e.twin_id)) {
    *old = std::move(e);
  } else {
    ft_.push_back(std::move(e));
  }
}

void Node::touch_pair(ForwardEntry& e) {
  const double now = env_.now();
  e.last_used = now;
  if (ForwardEntry* t = find_entry(e.twin_id, e.seq, e.path_id)) t->last_used = now;
}

Session* Node::session_for_path(ByteView path_id, ByteView twin, bool toward_source) {
  const ByteView f_id = toward_source ? twin : path_id;
  auto it = sessions_.find(Bytes(f_id.begin(), f_id.end()));
  return it == sessions_.end() ? nullptr : &it->second;
}

const Session* Node::find_session(const std::string& label) const {
  const Session* any = nullptr;
  for (const auto& [f_id, s] : sessions_) {
    if (s.id != label) continue;
    if (s.authenticated) return &s;
    if (!any) any = &s;
  }
  return any;
}

std::string Node::label_for(const LinkPayload& p) const {
  if (p.toward_source || !p.twin_id) return session_label(p.path_id, p.seq);
  return session_label(*p.twin_id, p.seq);
}

Bytes Node::fresh_f_id() {
  for (;;) {
    Bytes f = env_.rng().bytes(provider_.info().digest_len);
    if (sessions_.count(f)) continue;
    if (std::any_of(ft_.begin(), ft_.end(), [&](const ForwardEntry& e) { return e.path_id == f; })) continue;
    return f;
  }
}

const identity::OwnPseudonym* Node::own_by_hash(ByteView r_id, std::size_t* index) const {
  for (std::size_t i = 0; i < own_hashes_.size(); ++i) {
    if (std::ranges::equal(own_hashes_[i], r_id)) {
      *index = i;
      return &ident_.own[i];
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// link key transport and link frames

void Node::send_link(NodeId to, const SymKey& key, FrameType type, LinkPayload payload, TxKind kind,
                     const std::string& sess) {
  if (delivered_.count({to, key.key_id})) {
    transmit_link(to, key, type, payload, kind, std::nullopt);
    return;
  }
  for (auto& [xid, o] : seck_out_) {
    if (o.to == to && o.key.key_id == key.key_id) {
      o.queue.push_back(QueuedLink{type, std::move(payload), kind});
      return;
    }
  }
  Rng& rng = env_.rng();
  OutgoingSeck o;
  o.to = to;
  o.init = crypto::SeckInitiator::start(provider_, rng);
  o.key = key;
  o.kind = kind;
  o.sess = sess;
  o.queue.push_back(QueuedLink{type, std::move(payload), kind});
  const std::uint64_t xid = o.init.offer().xid;
  const Frame f{FrameType::SECK1, wire::SeckHeader{xid, o.init.offer().ephemeral}, {}};
  seck_out_.insert_or_assign(xid, std::move(o));
  env_.unicast(id_, to, wire::encode_frame(f, params_.frame_size, rng), FrameType::SECK1, kind);
  emit(sess, 0, "SecK", "SECK1 " + nm(id_) + "→" + nm(to) + " to deliver a link key");
  env_.schedule(id_, params_.seck_timeout, [this, xid] {
    auto it = seck_out_.find(xid);
    if (it == seck_out_.end()) return;
    const NodeId peer = it->second.to;
    const std::string s = it->second.sess;
    seck_out_.erase(it);
    emit(s, 0, "SecK", "ExchangeTimeout: no SECK2 from " + nm(peer) + "; queued frames dropped");
    observe(peer, "exchange_timeout", s);
  });
}

void Node::transmit_link(NodeId to, const SymKey& key, FrameType type, const LinkPayload& payload,
                         TxKind kind, std::optional<wire::WrapBlock> wrap) {
  Rng& rng = env_.rng();
  const auto nonce = static_cast<std::uint32_t>(rng.next());
  wire::LinkHeader h{wire::make_key_tag(provider_, key, nonce), std::move(wrap)};
  Bytes body = provider_.sym_encrypt(key, wire::encode_link_payload(payload, rng), rng);
  const Frame f{type, std::move(h), std::move(body)};
  env_.unicast(id_, to, wire::encode_frame(f, params_.frame_size, rng), type, kind);
}

void Node::on_seck1(NodeId from, const wire::SeckHeader& h, TxKind reply_kind) {
  Rng& rng = env_.rng();
  crypto::SeckAccepted acc;
  try {
    acc = crypto::seck_accept(provider_, crypto::SeckOffer{h.xid, h.ephemeral}, rng);
  } catch (const Error& e) {
    emit("", 0, "SecK", std::string("SECK1 from ") + nm(from) + " rejected: " + e.what());
    return;
  }
  seck_in_[{from, h.xid}] = IncomingSeck{acc.wrapping_key, env_.now() + 4 * params_.seck_timeout};
  const Frame f{FrameType::SECK2, wire::SeckHeader{h.xid, acc.reply.ephemeral}, {}};
  env_.unicast(id_, from, wire::encode_frame(f, params_.frame_size, rng), FrameType::SECK2, reply_kind);
}

void Node::on_seck2(NodeId from, const wire::SeckHeader& h) {
  auto it = seck_out_.find(h.xid);
  if (it == seck_out_.end() || it->second.to != from) return;
  OutgoingSeck o = std::move(it->second);
  seck_out_.erase(it);
  SymKey wrapping;
  try {
    wrapping = o.init.finish(provider_, crypto::SeckReply{h.xid, h.ephemeral});
  } catch (const Error& e) {
    emit(o.sess, 0, "SecK", std::string("SECK2 from ") + nm(from) + " rejected: " + e.what());
    return;
  }
  delivered_.insert({o.to, o.key.key_id});
  bool first = true;
  for (auto& q : o.queue) {
    std::optional<wire::WrapBlock> wrap;
    if (first) wrap = wire::WrapBlock{h.xid, crypto::seck_wrap(provider_, wrapping, o.key, env_.rng())};
    first = false;
    transmit_link(o.to, o.key, q.type, q.payload, q.kind, std::move(wrap));
  }
}

void Node::on_link(NodeId from, FrameType type, const wire::LinkHeader& h, const Bytes& body) {
  if (h.wrap) {
    auto it = seck_in_.find({from, h.wrap->xid});
    if (it != seck_in_.end()) {
      try {
        add_binding(from, crypto::seck_unwrap(provider_, it->second.wrapping_key, h.wrap->blob));
      } catch (const Error& e) {
        emit("", 0, "SecK", std::string("wrapped key from ") + nm(from) + " rejected: " + e.what());
        observe(from, "bad_message");
      }
      seck_in_.erase(it);
    }
  }
  std::optional<SymKey> key;
  for (const auto& k : bindings_[from]) {
    if (wire::key_tag_matches(provider_, k, h.key_tag)) {
      key = k;
      break;
    }
  }
  const std::string tname(wire::frame_type_name(type));
  if (!key) {
    emit("", 0, "rx", tname + " from " + nm(from) + " matches no link key; dropped");
    return;
  }
  LinkPayload p;
  try {
    p = wire::decode_link_payload(provider_.sym_decrypt(*key, body));
  } catch (const Error&) {
    emit("", 0, "rx", "DecryptFail: " + tname + " from " + nm(from) + " does not open under its link key");
    observe(from, "bad_message");
    return;
  }
  const bool consistent = (type == FrameType::REP && (p.kind == LinkKind::Reply || p.kind == LinkKind::MaintReply)) ||
                          (type == FrameType::ACK && p.kind == LinkKind::Ack) ||
                          (type == FrameType::DATA && p.kind == LinkKind::Data) ||
                          (type == FrameType::ERR && p.kind == LinkKind::Err);
  if (!consistent || !p.twin_id) {
    emit(label_for(p), 0, "rx", tname + " from " + nm(from) + " carries an inconsistent payload");
    observe(from, "bad_message");
    return;
  }
  switch (p.kind) {
    case LinkKind::Reply: on_reply(from, *key, p); break;
    case LinkKind::Ack: on_ack(from, *key, p); break;
    case LinkKind::Data: on_data(from, p); break;
    case LinkKind::Err: on_err(from, p); break;
    case LinkKind::MaintReply: on_maint_reply(from, *key, p); break;
  }
}

// ---------------------------------------------------------------------------
// watchdog

void Node::expect(NodeId subject, FrameType type, std::optional<SymKey> key, Bytes path_id,
                  std::uint32_t seq, std::uint32_t gen, Bytes inner, const std::string& sess) {
  if (subject == id_ || !is_neighbor(subject)) return;
  const std::uint64_t wid = next_watch_++;
  watch_[wid] = Expectation{subject, type, std::move(key), std::move(path_id), seq, gen, std::move(inner),
                            env_.now(), false, sess};
  env_.schedule(id_, params_.watchdog_timeout, [this, wid] {
    auto it = watch_.find(wid);
    if (it == watch_.end()) return;
    const Expectation e = it->second;
    watch_.erase(it);
    if (e.satisfied) return;
    emit(e.sess, 0, "watch",
         "watchdog: " + nm(e.subject) + " did not forward " + std::string(wire::frame_type_name(e.type)));
    observe(e.subject, "drop", e.sess);
  });
}

void Node::check_watch_req(NodeId from, const wire::ReqHeader& h, const Bytes& body) {
  for (auto& [wid, e] : watch_) {
    if (e.type != FrameType::REQ || e.subject != from || e.satisfied) continue;
    if (e.path_id != h.path_id || e.seq != h.seq || e.gen != h.gen) continue;
    e.satisfied = true;
    if (body != e.inner) {
      emit(e.sess, 1, "watch", "watchdog: " + nm(from) + " altered the REQ body");
      observe(from, "tamper", e.sess);
    } else if (env_.now() - e.created > params_.delay_threshold) {
      observe(from, "delay", e.sess);
    } else {
      observe(from, "forward_ok", e.sess);
    }
    return;
  }
}

void Node::check_watch_link(NodeId from, FrameType type, const wire::LinkHeader& h, const Bytes& body) {
  std::optional<LinkPayload> opened;
  Expectation* first_keyed = nullptr;
  Expectation* done_match = nullptr;
  for (auto& [wid, e] : watch_) {
    if (e.type != type || e.subject != from || !e.key) continue;
    if (!wire::key_tag_matches(provider_, *e.key, h.key_tag)) continue;
    if (!first_keyed) first_keyed = &e;
    if (!opened) {
      try {
        opened = wire::decode_link_payload(provider_.sym_decrypt(*e.key, body));
      } catch (const Error&) {
        if (!e.satisfied) {
          e.satisfied = true;
          emit(e.sess, 0, "watch", "watchdog: " + nm(from) + " forwarded an altered " +
                                       std::string(wire::frame_type_name(type)));
          observe(from, "tamper", e.sess);
        }
        return;
      }
    }
    if (opened->path_id != e.path_id || opened->inner != e.inner) continue;
    if (e.satisfied) {
      done_match = &e;
      continue;
    }
    e.satisfied = true;
    observe(from, env_.now() - e.created > params_.delay_threshold ? "delay" : "forward_ok", e.sess);
    return;
  }
  if (done_match) {
    emit(done_match->sess, 0, "watch",
         "watchdog: " + nm(from) + " relayed the same " + std::string(wire::frame_type_name(type)) + " twice");
    observe(from, "double_relay", done_match->sess);
  }
}

// ---------------------------------------------------------------------------
// receive dispatch

void Node::receive(NodeId from, ByteView octets, bool overheard) {
  Frame f;
  try {
    f = wire::decode_frame(octets, params_.frame_size);
  } catch (const Error& e) {
    if (!overheard) {
      emit("", 0, "rx", std::string("frame from ") + nm(from) + " rejected: " + e.what());
      observe(from, "bad_message");
    }
    return;
  }
  try {
    switch (f.type) {
      case FrameType::REQ: {
        const auto& h = std::get<wire::ReqHeader>(f.headers);
        check_watch_req(from, h, f.body);
        if (!overheard) on_req(from, h, f.body);
        break;
      }
      case FrameType::SECK1:
        if (!overheard) on_seck1(from, std::get<wire::SeckHeader>(f.headers), TxKind::Originate);
        break;
      case FrameType::SECK2:
        if (!overheard) on_seck2(from, std::get<wire::SeckHeader>(f.headers));
        break;
      case FrameType::REQV:
        if (!overheard) on_reqv(from, std::get<wire::ReqvHeader>(f.headers), f.body);
        break;
      case FrameType::REPV:
        if (!overheard) on_repv(from, std::get<wire::RepvHeader>(f.headers), f.body);
        break;
      case FrameType::REP:
      case FrameType::ACK:
      case FrameType::DATA:
      case FrameType::ERR: {
        const auto& h = std::get<wire::LinkHeader>(f.headers);
        check_watch_link(from, f.type, h, f.body);
        if (!overheard) on_link(from, f.type, h, f.body);
        break;
      }
    }
  } catch (const Error& e) {
    emit("", 0, "rx", std::string(wire::frame_type_name(f.type)) + " from " + nm(from) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Phase I

std::string Node::originate_request(ByteView dest_pseudonym, std::size_t own_index) {
  const auto* db = ident_.directory.find(dest_pseudonym);
  if (!db) throw Error(Errc::UnknownDestination, "destination pseudonym is not in the public list");
  if (own_index >= ident_.own.size()) throw Error(Errc::DomainError, "no such own pseudonym");
  const auto& me = ident_.own[own_index];
  Rng& rng = env_.rng();

  const Bytes dest(dest_pseudonym.begin(), dest_pseudonym.end());
  const Bytes r_id = provider_.hash(dest).bytes;
  const std::uint32_t seq = next_seq_++;
  const auto iseq = static_cast<std::uint32_t>(rng.below(1u << 31));
  const std::string label = session_label(r_id, seq);

  const Bytes msg = wire::encode_request_inner(wire::RequestInner{me.pseudonym, iseq}, rng);
  const Bytes signed_ms = wire::encode_signed(wire::SignedBlob{msg, provider_.sign(me.keys.secret_key, msg)});
  const Bytes body = provider_.asym_encrypt(db->public_key, signed_ms, rng);

  const wire::ReqHeader h{r_id, seq, 0};
  Bytes frame = wire::encode_frame(Frame{FrameType::REQ, h, body}, params_.frame_size, rng);
  if (params_.plant_leak) {
    const auto [off, len] = wire::padding_range(frame, params_.frame_size);
    if (len >= me.pseudonym.size()) {
      std::copy(me.pseudonym.begin(), me.pseudonym.end(), frame.begin() + static_cast<std::ptrdiff_t>(off + len - me.pseudonym.size()));
    }
  }

  const RtKey key{r_id, seq, 0};
  rt_[key] = ReverseEntry{r_id, seq, 0, id_, env_.now()};
  req_seen_[key].insert(id_);
  rqt_[{r_id, seq}] = RequestEntry{r_id, seq, false, true, iseq, dest, own_index};
  emit(label, 1, "1-3", "S builds M_S = {S_ID, ISeq}, signs it and encrypts under PK_D");
  emit(label, 1, "4", "RqT ← (R_ID, Seq); REQ broadcast");

  for (NodeId n : env_.neighbors(id_)) expect(n, FrameType::REQ, std::nullopt, r_id, seq, 0, body, label);
  env_.broadcast(id_, std::move(frame), FrameType::REQ, TxKind::Originate);

  env_.schedule(id_, params_.handshake_timeout, [this, r_id, seq, label] {
    auto it = rqt_.find({r_id, seq});
    if (it != rqt_.end() && !it->second.reply) {
      emit(label, 3, "timeout", "PathUnrecoverable: no REP within the handshake timeout");
    }
  });
  return label;
}

void Node::on_req(NodeId from, const wire::ReqHeader& h, const Bytes& body) {
  if (h.gen > 0) {
    on_maintenance_req(from, h);
    return;
  }
  const RtKey key{h.path_id, h.seq, h.gen};
  const std::string label = session_label(h.path_id, h.seq);
  auto& seen = req_seen_[key];
  if (seen.count(from)) {
    emit(label, 1, "4", "second copy of the same REQ from " + nm(from));
    observe(from, "duplicate_req", label);
    return;
  }
  seen.insert(from);
  if (rt_.count(key)) {
    auto pr = pending_replies_.find(key);
    if (pr != pending_replies_.end() && !pr->second.fired &&
        std::find(pr->second.hops.begin(), pr->second.hops.end(), from) == pr->second.hops.end()) {
      pr->second.hops.push_back(from);
      emit(label, 2, "4", "alternative reverse hop " + nm(from) + " recorded");
    }
    return;
  }
  rt_[key] = ReverseEntry{h.path_id, h.seq, h.gen, from, env_.now()};
  emit(label, 1, "5", nm(id_) + ": RT ← (R_ID, Seq, " + nm(from) + ")");
  Rng& rng = env_.rng();
  env_.broadcast(id_, wire::encode_frame(Frame{FrameType::REQ, h, body}, params_.frame_size, rng),
                 FrameType::REQ, TxKind::Relay);
  emit(label, 1, "6", nm(id_) + " rebroadcasts REQ");

  std::size_t idx = 0;
  if (own_by_hash(h.path_id, &idx)) begin_phase_ii(from, h, body, idx);
}

// ---------------------------------------------------------------------------
// Phase II

void Node::begin_phase_ii(NodeId from, const wire::ReqHeader& h, const Bytes& body, std::size_t own_index) {
  const std::string label = session_label(h.path_id, h.seq);
  const auto& me = ident_.own[own_index];
  wire::SignedBlob blob;
  wire::RequestInner m;
  try {
    blob = wire::decode_signed(provider_.asym_decrypt(me.keys.secret_key, body));
    m = wire::decode_request_inner(blob.message);
  } catch (const Error&) {
    emit(label, 2, "2", "DecryptFail: REQ matches own R_ID but M_S does not open");
    observe(from, "bad_message", label);
    return;
  }
  const auto* sb = ident_.directory.find(m.s_id);
  if (!sb || !provider_.verify(sb->public_key, blob.message, blob.signature)) {
    emit(label, 2, "3", "BadSignature: M_S signature does not verify against the public list");
    observe(from, "bad_message", label);
    return;
  }
  const RtKey key{h.path_id, h.seq, h.gen};
  rqt_[{h.path_id, h.seq}] = RequestEntry{h.path_id, h.seq, false, false, m.iseq, m.s_id, own_index};
  pending_replies_[key] = PendingReply{h.path_id, h.seq, own_index, m.s_id, m.iseq, {from}, false};
  emit(label, 2, "1-3", "D: R_ID = hash(own pseudonym); M_S decrypted and S's signature verified");
  env_.schedule(id_, params_.reply_window, [this, key] { originate_replies(key); });
}

void Node::originate_replies(const RtKey& key) {
  auto it = pending_replies_.find(key);
  if (it == pending_replies_.end() || it->second.fired) return;
  PendingReply& pr = it->second;
  pr.fired = true;
  const std::string label = session_label(pr.r_id, pr.seq);
  std::vector<ReplyCandidate> cands;
  for (NodeId hop : pr.hops) {
    if (is_neighbor(hop)) cands.push_back(ReplyCandidate{hop, rep_.sr(hop), {}});
  }
  const auto chosen = select_paths(cands, params_.max_paths, {});
  if (chosen.empty()) {
    emit(label, 2, "4", "NoReversePath: no reverse hop is still reachable");
    return;
  }
  if (auto rq = rqt_.find({pr.r_id, pr.seq}); rq != rqt_.end()) rq->second.reply = true;
  for (auto i : chosen) reply_via(pr, cands[i].via);
}

void Node::reply_via(PendingReply& pr, NodeId hop) {
  Rng& rng = env_.rng();
  const auto& me = ident_.own[pr.own_index];
  const auto* sb = ident_.directory.find(pr.s_id);
  if (!sb) return;
  const std::string label = session_label(pr.r_id, pr.seq);
  const double now = env_.now();

  const Bytes f_id = fresh_f_id();
  const SymKey k_ses = provider_.generate_session_key(rng);
  wire::ReplyInner md;
  md.f_id = f_id;
  if (params_.pseudonym_hints) md.d_hint = me.pseudonym;
  md.k_ses = k_ses;
  md.iseq_next = pr.iseq + 1;
  const Bytes msg = wire::encode_reply_inner(md, rng);
  const Bytes inner = provider_.asym_encrypt(
      sb->public_key, wire::encode_signed(wire::SignedBlob{msg, provider_.sign(me.keys.secret_key, msg)}), rng);

  const SymKey k_dc = provider_.generate_session_key(rng);
  const SymKey k_cb = provider_.generate_session_key(rng);
  put_entry(ForwardEntry{pr.r_id, pr.seq, 0, f_id, true, id_, std::nullopt, hop, k_dc, k_cb, now, false});
  put_entry(ForwardEntry{f_id, pr.seq, 0, pr.r_id, false, hop, std::nullopt, id_, std::nullopt, std::nullopt, now, false});

  Session s;
  s.id = label;
  s.peer = pr.s_id;
  s.own_pseudonym = me.pseudonym;
  s.k_ses = k_ses;
  s.r_id = pr.r_id;
  s.f_id = f_id;
  s.seq = pr.seq;
  s.iseq_base = pr.iseq;
  s.out_iseq = pr.iseq + 2;
  s.in_iseq = pr.iseq + 2;
  sessions_[f_id] = std::move(s);

  emit(label, 2, "4", "D selects reverse hop " + nm(hop));
  emit(label, 2, "5-7", "D generates F_ID, K_SES and M_D = {F_ID, D_ID*, K_SES, ISeq+1}; signs and encrypts under PK_S");
  emit(label, 2, "8", "D creates K_N = K_" + nm(id_) + nm(hop) + " and K_NN = K_" + nm(hop) + "N");
  LinkPayload p{LinkKind::Reply, true, pr.r_id, f_id, pr.seq, 0, k_cb, std::nullopt, inner};
  emit(label, 2, "9", nm(id_) + "→" + nm(hop) + " E_K_N(M_C)");
  emit(label, 2, "10", "D: FT ← (R_ID, Seq, " + nm(id_) + ", " + nm(hop) + ", K_N)");
  send_link(hop, k_dc, FrameType::REP, std::move(p), TxKind::Originate, label);
  expect(hop, FrameType::REP, k_cb, pr.r_id, pr.seq, 0, inner, label);
}

void Node::on_reply(NodeId from, const SymKey& k, const LinkPayload& p) {
  const std::string label = session_label(p.path_id, p.seq);
  const std::pair<Bytes, std::uint32_t> rkey{p.path_id, p.seq};
  if (auto rq = rqt_.find(rkey); rq != rqt_.end()) {
    if (!rq->second.originated) {
      emit(label, 2, "11", "REP for own reply looped back; dropped");
      return;
    }
    if (rq->second.reply) {
      emit(label, 3, "1", "DuplicateReply: REP from " + nm(from) + " after the reply flag was set");
      observe(from, "duplicate_reply", label);
      return;
    }
    auto& cands = source_candidates_[rkey];
    for (const auto& c : cands) {
      if (c.payload.twin_id == p.twin_id) {
        emit(label, 3, "1", "DuplicateReply: second REP carrying the same F_ID from " + nm(from));
        observe(from, "duplicate_reply", label);
        return;
      }
    }
    cands.push_back(SourceCandidate{from, k, p});
    emit(label, 3, "1", "S: RqT holds (R_ID, Seq); REP candidate via " + nm(from));
    if (cands.size() == 1) {
      env_.schedule(id_, params_.reply_window, [this, rkey] { close_reply_window(rkey); });
    }
    return;
  }

  emit(label, 2, "10", nm(id_) + " decrypts E_K_N(M) from " + nm(from));
  emit(label, 2, "11", nm(id_) + ": (R_ID, Seq) not in RqT, acting as intermediate");
  if (find_entry(p.path_id, p.seq, *p.twin_id)) {
    emit(label, 2, "13", "DuplicateReply: FT already binds this REP");
    observe(from, "duplicate_reply", label);
    return;
  }
  for (const auto& e : ft_) {
    if (e.toward_source && e.seq == p.seq && e.path_id == p.path_id) {
      emit(label, 2, "13", "crossing REP for an already bound (R_ID, Seq) rejected");
      return;
    }
  }
  auto rt = rt_.find({p.path_id, p.seq, 0});
  if (rt == rt_.end()) {
    emit(label, 2, "12", "NoReversePath: RT has no entry for (R_ID, Seq)");
    return;
  }
  if (!p.k_nn) {
    observe(from, "bad_message", label);
    return;
  }
  const NodeId next = rt->second.source_node;
  const double now = env_.now();
  const SymKey k_nn2 = provider_.generate_session_key(env_.rng());
  put_entry(ForwardEntry{p.path_id, p.seq, 0, *p.twin_id, true, from, k, next, *p.k_nn, k_nn2, now, false});
  put_entry(ForwardEntry{*p.twin_id, p.seq, 0, p.path_id, false, next, std::nullopt, from, std::nullopt,
                         std::nullopt, now, false});
  emit(label, 2, "12", nm(id_) + ": RT source for (R_ID, Seq) is " + nm(next));
  emit(label, 2, "13", nm(id_) + ": FT ← (R_ID, Seq, " + nm(from) + ", " + nm(next) + ", K_NN)");
  LinkPayload fwd = p;
  fwd.k_nn = k_nn2;
  emit(label, 2, "9", nm(id_) + "→" + nm(next) + " E_K_N(M_C)");
  send_link(next, *p.k_nn, FrameType::REP, std::move(fwd), TxKind::Relay, label);
  if (params_.overhear_intermediates) expect(next, FrameType::REP, k_nn2, p.path_id, p.seq, 0, p.inner, label);
}

// ---------------------------------------------------------------------------
// Phase III

void Node::close_reply_window(const std::pair<Bytes, std::uint32_t>& key) {
  auto rq = rqt_.find(key);
  auto cit = source_candidates_.find(key);
  if (rq == rqt_.end() || cit == source_candidates_.end() || rq->second.reply) return;
  const auto cands = std::move(cit->second);
  source_candidates_.erase(cit);

  std::vector<ReplyCandidate> rc;
  for (const auto& c : cands) rc.push_back(ReplyCandidate{c.via, rep_.sr(c.via), *c.payload.twin_id});
  std::set<NodeId> busy;
  for (const auto& e : ft_) {
    if (e.path_id == key.first && e.seq == key.second) busy.insert(e.from_node);
  }
  const auto chosen = select_paths(rc, params_.max_paths, busy);
  rq->second.reply = true;
  const RequestEntry entry = rq->second;
  const std::string label = session_label(key.first, key.second);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
      emit(label, 3, "2", "REP via " + nm(cands[i].via) + " not selected");
    }
  }
  for (auto i : chosen) enter_phase_iii(entry, cands[i]);
}

void Node::enter_phase_iii(const RequestEntry& rq, const SourceCandidate& c) {
  Rng& rng = env_.rng();
  const std::string label = session_label(rq.r_id, rq.seq);
  const auto& me = ident_.own[rq.own_index];
  wire::SignedBlob blob;
  wire::ReplyInner md;
  try {
    blob = wire::decode_signed(provider_.asym_decrypt(me.keys.secret_key, c.payload.inner));
    md = wire::decode_reply_inner(blob.message);
  } catch (const Error&) {
    emit(label, 3, "3", "DecryptFail: M_D does not open under SK_S");
    observe(c.via, "bad_message", label);
    return;
  }
  const auto* db = ident_.directory.find(rq.dest);
  if (!db || !provider_.verify(db->public_key, blob.message, blob.signature)) {
    emit(label, 3, "4", "BadSignature: M_D signature does not verify under PK_D");
    observe(c.via, "bad_message", label);
    return;
  }
  if (md.iseq_next != rq.iseq + 1) {
    emit(label, 3, "5", "StaleISeq: REP carries " + std::to_string(md.iseq_next) + ", expected ISeq+1");
    observe(c.via, "replay", label);
    return;
  }
  if (md.f_id != *c.payload.twin_id) {
    emit(label, 3, "5", "F_ID inside M_D disagrees with the link payload");
    observe(c.via, "bad_message", label);
    return;
  }
  const double now = env_.now();
  const Bytes& f_id = md.f_id;
  Session s;
  s.id = label;
  s.peer = rq.dest;
  s.own_pseudonym = me.pseudonym;
  s.k_ses = md.k_ses;
  s.r_id = rq.r_id;
  s.f_id = f_id;
  s.seq = rq.seq;
  s.iseq_base = rq.iseq;
  s.authenticated = true;
  s.initiator = true;
  s.out_iseq = rq.iseq + 2;
  s.in_iseq = rq.iseq + 2;
  s.peer_hint = md.d_hint;
  sessions_[f_id] = std::move(s);
  emit(label, 3, "3-5", "S verifies D's signature and ISeq+1; D is authenticated");

  const SymKey k_sa = provider_.generate_session_key(rng);
  const SymKey k_ab = provider_.generate_session_key(rng);
  put_entry(ForwardEntry{rq.r_id, rq.seq, 0, f_id, true, c.via, c.k_from, id_, std::nullopt, std::nullopt, now, false});
  put_entry(ForwardEntry{f_id, rq.seq, 0, rq.r_id, false, id_, std::nullopt, c.via, k_sa, k_ab, now, false});

  wire::AckInner ai;
  if (params_.pseudonym_hints) ai.s_hint = me.pseudonym;
  ai.iseq_next2 = rq.iseq + 2;
  const Bytes inner = provider_.sym_encrypt(md.k_ses, wire::encode_ack_inner(ai, rng), rng);
  emit(label, 3, "6", "S builds ACK = {S_ID*, ISeq+2} under K_SES");
  emit(label, 3, "7-9", "S: FT ← (F_ID, Seq, " + nm(id_) + ", " + nm(c.via) + ", K_N)");
  LinkPayload p{LinkKind::Ack, false, f_id, rq.r_id, rq.seq, 0, k_ab, std::nullopt, inner};
  emit(label, 3, "10", nm(id_) + "→" + nm(c.via) + " E_K_N(ACK)");
  send_link(c.via, k_sa, FrameType::ACK, std::move(p), TxKind::Originate, label);
  expect(c.via, FrameType::ACK, k_ab, f_id, rq.seq, 0, inner, label);
}

void Node::on_ack(NodeId from, const SymKey& k, const LinkPayload& p) {
  const std::string label = label_for(p);
  ForwardEntry* e = find_entry_from(p.path_id, p.seq, *p.twin_id, from);
  if (!e) {
    emit(label, 3, "11", "NoForwardPath: ACK from " + nm(from) + " matches no FT entry");
    return;
  }
  if (e->to_node == id_) {
    if (e->k_from) {
      emit(label, 3, "12", "DuplicateReply: second ACK for an established path");
      observe(from, "duplicate_reply", label);
      return;
    }
    auto sit = sessions_.find(p.path_id);
    if (sit == sessions_.end()) return;
    Session& s = sit->second;
    wire::AckInner ai;
    try {
      ai = wire::decode_ack_inner(provider_.sym_decrypt(s.k_ses, p.inner));
    } catch (const Error&) {
      emit(label, 3, "12", "DecryptFail: ACK does not open under K_SES");
      observe(from, "bad_message", label);
      return;
    }
    if (ai.iseq_next2 != s.iseq_base + 2) {
      emit(label, 3, "12", "StaleISeq: ACK carries " + std::to_string(ai.iseq_next2) + ", expected ISeq+2");
      observe(from, "replay", label);
      return;
    }
    e->k_from = k;
    touch_pair(*e);
    s.authenticated = true;
    s.peer_hint = ai.s_hint;
    emit(label, 3, "12", "D verifies ISeq+2 under K_SES; S is authenticated");
    return;
  }

  // Literal RqT check at relays: an ACK naming one of our own requests is
  // never relayed. Unreachable on honest paths since FT already routes it.
  if (rqt_.count({*p.twin_id, p.seq})) {
    emit(label, 3, "11", nm(id_) + ": (R_ID, Seq) is in own RqT; ACK not relayed");
    return;
  }
  emit(label, 3, "11", nm(id_) + ": (R_ID, Seq) not in RqT, forwarding ACK");
  if (e->k_from) {
    emit(label, 3, "11", "DuplicateReply: second ACK for an established path");
    observe(from, "duplicate_reply", label);
    return;
  }
  if (!p.k_nn) {
    observe(from, "bad_message", label);
    return;
  }
  const SymKey k_nn2 = provider_.generate_session_key(env_.rng());
  e->k_from = k;
  e->k_to = *p.k_nn;
  e->k_watch = k_nn2;
  touch_pair(*e);
  const NodeId next = e->to_node;
  const SymKey k_to = *p.k_nn;
  emit(label, 3, "10", nm(id_) + ": FT ← (F_ID, Seq, " + nm(from) + ", " + nm(next) + ", K_NN)");
  LinkPayload fwd = p;
  fwd.k_nn = k_nn2;
  emit(label, 3, "10", nm(id_) + "→" + nm(next) + " E_K_N(ACK)");
  send_link(next, k_to, FrameType::ACK, std::move(fwd), TxKind::Relay, label);
  if (params_.overhear_intermediates) expect(next, FrameType::ACK, k_nn2, p.path_id, p.seq, 0, p.inner, label);
}

// ---------------------------------------------------------------------------
// data

void Node::send_data(const std::string& label, ByteView payload) {
  Session* s = nullptr;
  for (auto& [f_id, ss] : sessions_) {
    if (ss.id == label && ss.authenticated) {
      s = &ss;
      break;
    }
  }
  if (!s) throw Error(Errc::SessionNotAuthenticated, "no authenticated session " + label);
  if (payload.size() > wire::kMaxDataPayload) throw Error(Errc::Oversize, "data payload too large");
  if (s->maintaining) throw Error(Errc::NoForwardPath, "path of " + label + " is under maintenance");
  const bool toward_source = !s->initiator;
  const Bytes path = s->initiator ? s->f_id : s->r_id;
  const Bytes twin = s->initiator ? s->r_id : s->f_id;
  ForwardEntry* e = find_entry_from(path, s->seq, twin, id_);
  if (!e || !e->k_to) throw Error(Errc::NoForwardPath, "no outgoing path for " + label);
  Rng& rng = env_.rng();
  const std::uint32_t iseq = ++s->out_iseq;
  const Bytes inner = provider_.sym_encrypt(
      s->k_ses, wire::encode_data_inner(wire::DataInner{iseq, Bytes(payload.begin(), payload.end())}, rng), rng);
  touch_pair(*e);
  const NodeId next = e->to_node;
  const SymKey k_to = *e->k_to;
  const auto k_watch = e->k_watch;
  const std::uint32_t gen = e->gen;
  if (!is_neighbor(next)) {
    emit(label, 4, "tx", "DATA not sent: first hop " + nm(next) + " unreachable");
    return;
  }
  LinkPayload p{LinkKind::Data, toward_source, path, twin, s->seq, gen, std::nullopt, std::nullopt, inner};
  emit(label, 4, "tx", nm(id_) + "→" + nm(next) + " DATA ISeq " + std::to_string(iseq));
  send_link(next, k_to, FrameType::DATA, std::move(p), TxKind::Originate, label);
  if (k_watch) expect(next, FrameType::DATA, *k_watch, path, s->seq, gen, inner, label);
}

void Node::on_data(NodeId from, const LinkPayload& p) {
  const std::string label = label_for(p);
  ForwardEntry* e = find_entry_from(p.path_id, p.seq, *p.twin_id, from);
  if (!e) {
    emit(label, 4, "rx", "NoForwardPath: DATA from " + nm(from) + " matches no FT entry");
    return;
  }
  touch_pair(*e);
  if (e->to_node == id_) {
    Session* s = session_for_path(p.path_id, *p.twin_id, p.toward_source);
    if (!s) return;
    wire::DataInner di;
    try {
      di = wire::decode_data_inner(provider_.sym_decrypt(s->k_ses, p.inner));
    } catch (const Error&) {
      emit(label, 4, "rx", "DecryptFail: DATA does not open under K_SES");
      observe(from, "bad_message", label);
      return;
    }
    if (di.iseq <= s->in_iseq) {
      emit(label, 4, "rx", "ReplayedISeq: DATA ISeq " + std::to_string(di.iseq) + " not above " +
                               std::to_string(s->in_iseq) + "; dropped");
      observe(from, "replay", label);
      return;
    }
    s->in_iseq = di.iseq;
    emit(label, 4, "rx", nm(id_) + " accepts DATA ISeq " + std::to_string(di.iseq));
    env_.on_deliver(id_, s->id, di.payload);
    return;
  }
  if (!e->k_to) {
    emit(label, 4, "rx", "NoForwardPath: path not yet acknowledged");
    return;
  }
  const NodeId next = e->to_node;
  if (!is_neighbor(next)) {
    emit(label, 4, "rx", "DATA undeliverable: " + nm(next) + " unreachable");
    if (ForwardEntry* t = find_entry(e->twin_id, e->seq, e->path_id)) emit_err(*t);
    return;
  }
  const SymKey k_to = *e->k_to;
  const auto k_watch = e->k_watch;
  send_link(next, k_to, FrameType::DATA, p, TxKind::Relay, label);
  if (params_.overhear_intermediates && k_watch) {
    expect(next, FrameType::DATA, *k_watch, p.path_id, p.seq, p.gen, p.inner, label);
  }
}

// ---------------------------------------------------------------------------
// route errors and maintenance

void Node::emit_err(ForwardEntry& t) {
  if (t.err_sent || !t.k_to || t.to_node == id_) return;
  t.err_sent = true;
  if (ForwardEntry* twin = find_entry(t.twin_id, t.seq, t.path_id)) twin->err_sent = true;
  const std::string label = session_label(t.toward_source ? t.path_id : t.twin_id, t.seq);
  LinkPayload p{LinkKind::Err, t.toward_source, t.path_id, t.twin_id, t.seq, t.gen, std::nullopt, std::nullopt, {}};
  const NodeId to = t.to_node;
  const SymKey k = *t.k_to;
  emit(label, 5, "ERR", nm(id_) + ": link to " + nm(t.from_node) + " lost; ERR toward " + nm(to));
  send_link(to, k, FrameType::ERR, std::move(p), TxKind::Originate, label);
}

void Node::on_err(NodeId from, const LinkPayload& p) {
  const std::string label = label_for(p);
  ForwardEntry* e = find_entry_from(p.path_id, p.seq, *p.twin_id, from);
  if (!e) {
    emit(label, 5, "ERR", "ERR from " + nm(from) + " for an unknown path; dropped");
    return;
  }
  if (e->to_node == id_) {
    Session* s = session_for_path(p.path_id, *p.twin_id, p.toward_source);
    if (!s) return;
    if (s->initiator) {
      emit(label, 5, "ERR", "S receives ERR; starting route maintenance");
      start_maintenance(*s);
    } else {
      emit(label, 5, "ERR", "D receives ERR; recorded");
    }
    return;
  }
  e->err_sent = true;
  if (!e->k_to || !is_neighbor(e->to_node)) return;
  const NodeId next = e->to_node;
  const SymKey k = *e->k_to;
  send_link(next, k, FrameType::ERR, p, TxKind::Relay, label);
}

void Node::start_maintenance(Session& s) {
  if (s.maintaining) return;
  const Bytes path = s.initiator ? s.r_id : s.f_id;
  const Bytes twin = s.initiator ? s.f_id : s.r_id;
  const ForwardEntry* in = find_entry(path, s.seq, twin);
  std::uint32_t gen = (in ? in->gen : 0) + 1;
  if (auto m = maintenance_.find({path, s.seq}); m != maintenance_.end()) gen = std::max(gen, m->second.gen + 1);
  s.maintaining = true;
  maintenance_[{path, s.seq}] = Maintenance{path, s.seq, gen, s.f_id, false};

  const RtKey key{path, s.seq, gen};
  rt_[key] = ReverseEntry{path, s.seq, gen, id_, env_.now()};
  req_seen_[key].insert(id_);
  Rng& rng = env_.rng();
  const Frame f{FrameType::REQ, wire::ReqHeader{path, s.seq, gen}, {}};
  env_.broadcast(id_, wire::encode_frame(f, params_.frame_size, rng), FrameType::REQ, TxKind::Originate);
  emit(s.id, 5, "REQ", nm(id_) + " broadcasts maintenance REQ, generation " + std::to_string(gen) +
                        " (path id and Seq in clear, padding only, no authentication payload)");

  const std::string label = s.id;
  const std::uint32_t seq = s.seq;
  env_.schedule(id_, params_.maintenance_wait, [this, path, seq, gen, label] {
    auto m = maintenance_.find({path, seq});
    if (m == maintenance_.end() || m->second.gen != gen || m->second.done) return;
    emit(label, 5, "timeout", "PathUnrecoverable: no maintenance reply within the wait");
  });
}

void Node::on_maintenance_req(NodeId from, const wire::ReqHeader& h) {
  const RtKey key{h.path_id, h.seq, h.gen};
  const std::string label = session_label(h.path_id, h.seq);
  auto& seen = req_seen_[key];
  if (seen.count(from)) {
    emit(label, 5, "REQ", "second copy of the same maintenance REQ from " + nm(from));
    observe(from, "duplicate_req", label);
    return;
  }
  seen.insert(from);
  if (rt_.count(key)) return;
  const double now = env_.now();
  rt_[key] = ReverseEntry{h.path_id, h.seq, h.gen, from, now};

  ForwardEntry* engaged = nullptr;
  for (auto& e : ft_) {
    if (e.seq == h.seq && e.path_id == h.path_id && e.to_node != id_ && alive_hop(e.from_node)) {
      engaged = &e;
      break;
    }
  }
  ForwardEntry* twin = engaged ? find_entry(engaged->twin_id, engaged->seq, engaged->path_id) : nullptr;
  if (engaged && twin) {
    Rng& rng = env_.rng();
    const SymKey k_to = provider_.generate_session_key(rng);
    const SymKey k_back = provider_.generate_session_key(rng);
    engaged->to_node = from;
    engaged->k_to = k_to;
    engaged->k_watch.reset();
    engaged->gen = h.gen;
    engaged->err_sent = false;
    engaged->last_used = now;
    twin->from_node = from;
    twin->k_from = k_back;
    twin->gen = h.gen;
    twin->err_sent = false;
    twin->last_used = now;
    add_binding(from, k_back);
    LinkPayload p{LinkKind::MaintReply, engaged->toward_source, engaged->path_id, engaged->twin_id, h.seq, h.gen,
                  std::nullopt, k_back, {}};
    emit(label, 5, "REP", nm(id_) + " is on the path; repoints toward " + nm(from) + " and replies");
    send_link(from, k_to, FrameType::REP, std::move(p), TxKind::Originate, label);
    return;
  }
  Rng& rng = env_.rng();
  env_.broadcast(id_, wire::encode_frame(Frame{FrameType::REQ, h, {}}, params_.frame_size, rng), FrameType::REQ,
                 TxKind::Relay);
}

void Node::on_maint_reply(NodeId from, const SymKey& k, const LinkPayload& p) {
  const std::string label = label_for(p);
  if (!p.k_back) {
    observe(from, "bad_message", label);
    return;
  }
  const double now = env_.now();
  auto m = maintenance_.find({p.path_id, p.seq});
  if (m != maintenance_.end() && m->second.gen == p.gen) {
    if (m->second.done) {
      emit(label, 5, "REP", "later maintenance reply via " + nm(from) + " ignored");
      return;
    }
    ForwardEntry* in = find_entry(p.path_id, p.seq, *p.twin_id);
    ForwardEntry* out = find_entry(*p.twin_id, p.seq, p.path_id);
    if (!in || !out) return;
    in->from_node = from;
    in->k_from = k;
    in->gen = p.gen;
    in->err_sent = false;
    in->last_used = now;
    out->to_node = from;
    out->k_to = *p.k_back;
    out->k_watch.reset();
    out->gen = p.gen;
    out->err_sent = false;
    out->last_used = now;
    delivered_.insert({from, p.k_back->key_id});
    m->second.done = true;
    if (auto s = sessions_.find(m->second.f_id); s != sessions_.end()) s->second.maintaining = false;
    emit(label, 5, "REP", "path re-established via " + nm(from));
    return;
  }
  auto rt = rt_.find({p.path_id, p.seq, p.gen});
  if (rt == rt_.end()) {
    emit(label, 5, "REP", "NoReversePath: maintenance reply without a matching REQ");
    return;
  }
  if (ForwardEntry* ex = find_entry(p.path_id, p.seq, *p.twin_id); ex && ex->gen == p.gen) {
    emit(label, 5, "REP", "crossing maintenance reply rejected");
    return;
  }
  Rng& rng = env_.rng();
  const NodeId next = rt->second.source_node;
  const SymKey k1 = provider_.generate_session_key(rng);
  const SymKey k2 = provider_.generate_session_key(rng);
  put_entry(ForwardEntry{p.path_id, p.seq, p.gen, *p.twin_id, p.toward_source, from, k, next, k1, std::nullopt, now, false});
  put_entry(ForwardEntry{*p.twin_id, p.seq, p.gen, p.path_id, !p.toward_source, next, k2, from, *p.k_back,
                         std::nullopt, now, false});
  delivered_.insert({from, p.k_back->key_id});
  add_binding(next, k2);
  LinkPayload fwd = p;
  fwd.k_back = k2;
  emit(label, 5, "REP", nm(id_) + " joins the repaired path between " + nm(from) + " and " + nm(next));
  send_link(next, k1, FrameType::REP, std::move(fwd), TxKind::Relay, label);
}

// ---------------------------------------------------------------------------
// votes

void Node::request_votes() {
  Rng& rng = env_.rng();
  const auto& req = votes_.open(provider_, rng, env_.now(), params_.vote_timeout);
  const Frame f{FrameType::REQV, wire::ReqvHeader{req.seq}, req.tpk.public_key};
  env_.broadcast(id_, wire::encode_frame(f, params_.frame_size, rng), FrameType::REQV, TxKind::Originate);
  emit("", 6, "REQV", nm(id_) + " requests recommendations, seq " + std::to_string(req.seq));
}

void Node::on_reqv(NodeId from, const wire::ReqvHeader& h, const Bytes& body) {
  auto nbrs = env_.neighbors(id_);
  std::sort(nbrs.begin(), nbrs.end());
  std::vector<wire::VoteEntry> list;
  for (NodeId n : nbrs) {
    if (list.size() >= wire::kMaxVotes) break;
    if (n == from) continue;
    const auto d = discredit_.find(n);
    if (d != discredit_.end()) {
      list.push_back(wire::VoteEntry{n, d->second});
    } else if (rep_.records().count(n)) {
      list.push_back(wire::VoteEntry{n, rep_.sr(n)});
    }
  }
  Rng& rng = env_.rng();
  Bytes enc;
  try {
    enc = provider_.asym_encrypt(body, wire::encode_vote_list(list, rng), rng);
  } catch (const Error& e) {
    emit("", 6, "REQV", std::string("REQV from ") + nm(from) + " unusable: " + e.what());
    return;
  }
  const Frame f{FrameType::REPV, wire::RepvHeader{wire::vote_seq_hash(provider_, h.seq)}, std::move(enc)};
  env_.unicast(id_, from, wire::encode_frame(f, params_.frame_size, rng), FrameType::REPV, TxKind::Originate);
  emit("", 6, "REPV", nm(id_) + "→" + nm(from) + " " + std::to_string(list.size()) + " recommendations");
}

void Node::on_repv(NodeId from, const wire::RepvHeader& h, const Bytes& body) {
  const double now = env_.now();
  std::optional<std::vector<wire::VoteEntry>> entries;
  try {
    entries = votes_.accept(provider_, h.seq_hash, from, body, now);
  } catch (const Error& e) {
    emit("", 6, "REPV", std::string("REPV from ") + nm(from) + " rejected: " + e.what());
    if (e.code() == Errc::DuplicateResponder) observe(from, "duplicate_vote");
    if (e.code() == Errc::DecryptFail) observe(from, "bad_message");
    return;
  }
  if (!entries) return;
  std::vector<rep::Vote> accepted;
  try {
    accepted = rep_.ingest(id_, from, *entries, now);
  } catch (const Error& e) {
    emit("", 6, "REPV", std::string("REPV from ") + nm(from) + " rejected: " + e.what());
    observe(from, "bad_message");
    return;
  }
  for (const auto& v : accepted) env_.on_reputation(id_, rep_.get(v.subject), "vote");
}

// ---------------------------------------------------------------------------
// housekeeping

std::size_t Node::timer_sweep(double now) {
  std::size_t removed = 0;
  for (auto it = rt_.begin(); it != rt_.end();) {
    if (now - it->second.inserted_at > params_.rt_timeout) {
      req_seen_.erase(it->first);
      pending_replies_.erase(it->first);
      it = rt_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  const auto before = ft_.size();
  std::erase_if(ft_, [&](const ForwardEntry& e) { return now - e.last_used > params_.ft_timeout; });
  removed += before - ft_.size();
  return removed;
}

void Node::tick() {
  const double now = env_.now();
  timer_sweep(now);
  votes_.expire(now);
  std::erase_if(seck_in_, [&](const auto& kv) { return now > kv.second.expiry; });

  for (auto& [f_id, s] : sessions_) {
    if (!s.authenticated || s.maintaining) continue;
    const Bytes& out = s.initiator ? s.f_id : s.r_id;
    const Bytes& twin = s.initiator ? s.r_id : s.f_id;
    const ForwardEntry* e = find_entry(out, s.seq, twin);
    if (e && e->to_node != id_ && !is_neighbor(e->to_node)) {
      emit(s.id, 5, "detect", nm(id_) + " lost its first hop " + nm(e->to_node));
      start_maintenance(s);
    }
  }
  for (auto& e : ft_) {
    if (e.from_node != id_ && e.to_node != id_ && !e.err_sent && !is_neighbor(e.from_node)) emit_err(e);
  }
}

}  // namespace anap::node
