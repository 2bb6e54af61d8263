#include <algorithm>
#include <cmath>
#include <sstream>

#include "anap/sim.hpp"

namespace anap::sim {
namespace {

constexpr double kBaseLatency = 0.005;
constexpr double kJitter = 0.002;
constexpr double kDuplicateReqDelay = 0.01;

std::string random_suffix(Rng& rng, std::size_t n) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(kAlphabet[rng.below(sizeof(kAlphabet) - 1)]);
  return s;
}

}  // namespace

Simulator::Simulator(Scenario scenario, std::uint64_t seed)
    : scenario_(std::move(scenario)), rng_(seed), provider_(crypto::make_provider(scenario_.provider)) {
  for (const auto& n : scenario_.nodes) {
    const auto id = static_cast<NodeId>(names_.size());
    names_.push_back(n.name);
    by_name_[n.name] = id;
    pos_.emplace_back(n.x, n.y);
    range_.push_back(n.range);
    alive_.push_back(true);
  }
  for (const auto& a : scenario_.adversaries) adversaries_[by_name_.at(a.node)] = a;
  setup_identities();
  for (const auto& in : scenario_.intents) {
    if (in.kind != IntentKind::Votes) alias(in.to);
  }
  schedule_script();
}

Simulator::~Simulator() = default;

const Simulator::Alias& Simulator::alias(const std::string& a) const {
  auto it = aliases_.find(a);
  if (it == aliases_.end()) throw Error(Errc::ScenarioInvalid, "unknown pseudonym alias '" + a + "'");
  return it->second;
}

const Bytes& Simulator::pseudonym(const std::string& a) const {
  const Alias& al = alias(a);
  return nodes_.at(al.node)->identity().own.at(al.index).pseudonym;
}

NodeId Simulator::id_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error(Errc::ScenarioInvalid, "unknown node '" + name + "'");
  return it->second;
}

node::Node& Simulator::node(const std::string& name) { return *nodes_.at(id_of(name)); }

std::string Simulator::name_of(NodeId id) const { return id < names_.size() ? names_[id] : "?"; }

// ---------------------------------------------------------------------------
// setup epoch

void Simulator::setup_identities() {
  ta_ = std::make_unique<identity::TrustedAuthority>(*provider_, rng_);
  std::vector<std::vector<identity::OwnPseudonym>> owned;
  for (std::size_t i = 0; i < scenario_.nodes.size(); ++i) {
    const auto& spec = scenario_.nodes[i];
    std::vector<Bytes> names;
    std::vector<std::string> labels;
    if (!spec.pseudonyms.empty()) {
      for (const auto& p : spec.pseudonyms) {
        names.push_back(to_bytes(p));
        labels.push_back(p);
      }
    } else {
      for (std::size_t k = 1; k <= spec.pseudonym_count; ++k) {
        names.push_back(to_bytes(spec.name + std::to_string(k) + "." + random_suffix(rng_, 10)));
      }
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
      const Alias al{static_cast<NodeId>(i), k};
      aliases_[spec.name + std::to_string(k + 1)] = al;
      if (k < labels.size()) aliases_[labels[k]] = al;
    }
    uis_.push_back(to_bytes(spec.ui ? *spec.ui : "user:" + spec.name + ":" + random_suffix(rng_, 12)));
    auto own = identity::generate_pseudonyms(*provider_, rng_, names);
    std::vector<identity::RegistrationEntry> reg;
    for (const auto& o : own) reg.push_back({o.pseudonym, o.keys.public_key});
    const Bytes enc = provider_->asym_encrypt(ta_->public_key(), identity::encode_registration(reg), rng_);
    try {
      ta_->register_user(uis_.back(), enc);
    } catch (const Error& e) {
      throw Error(Errc::ScenarioInvalid, std::string("registration of ") + spec.name + " failed: " + e.what());
    }
    owned.push_back(std::move(own));
  }

  rep::ScoringTable scoring;
  for (const auto& [cls, v] : scenario_.scoring) scoring.set(cls, v);
  const auto pl = ta_->public_list();
  for (std::size_t i = 0; i < owned.size(); ++i) {
    const auto& first = owned[i].front();
    const auto* binding = &*std::find_if(pl.begin(), pl.end(), [&](const identity::PseudonymBinding& b) {
      return b.pseudonym == first.pseudonym;
    });
    const Bytes blob = ta_->distribute_public_list(*binding, rng_);
    std::vector<identity::PseudonymBinding> verified;
    for (auto& b : identity::decode_public_list(provider_->asym_decrypt(first.keys.secret_key, blob))) {
      if (identity::verify_binding(*provider_, ta_->public_key(), b)) verified.push_back(std::move(b));
    }
    node::NodeIdentity ident{std::move(owned[i]), identity::Directory(std::move(verified))};
    nodes_.push_back(std::make_unique<node::Node>(static_cast<NodeId>(i), *provider_, scenario_.protocol,
                                                  scenario_.reputation, scoring, std::move(ident), *this));
  }
  for (const auto& [id, adv] : adversaries_) {
    if (adv.discredit) nodes_[id]->set_discredit(by_name_.at(adv.discredit->target), adv.discredit->value);
  }
  Json rec;
  rec["kind"] = "setup";
  rec["t"] = 0.0;
  rec["nodes"] = names_.size();
  rec["pl_rows"] = pl.size();
  trace_.push_back(std::move(rec));
}

void Simulator::schedule_script() {
  for (const auto& m : scenario_.mobility) {
    push(m.at, [this, m] {
      const NodeId id = by_name_.at(m.node);
      pos_[id] = {m.x, m.y};
      Json rec;
      rec["kind"] = "env";
      rec["t"] = now_;
      rec["node"] = m.node;
      rec["what"] = "move";
      rec["x"] = m.x;
      rec["y"] = m.y;
      trace_.push_back(std::move(rec));
    });
  }
  for (const auto& p : scenario_.power_off) {
    push(p.at, [this, p] {
      alive_[by_name_.at(p.node)] = false;
      Json rec;
      rec["kind"] = "env";
      rec["t"] = now_;
      rec["node"] = p.node;
      rec["what"] = "power_off";
      trace_.push_back(std::move(rec));
    });
  }
  for (const auto& in : scenario_.intents) {
    for (std::size_t r = 0; r < in.repeat; ++r) {
      push(in.at + static_cast<double>(r) * in.interval, [this, in] { run_intent(in); });
    }
  }
  const double sweep = scenario_.protocol.sweep_interval;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    for (double t = sweep; t <= scenario_.end_time; t += sweep) {
      push(t, [this, id] {
        if (alive_[id]) nodes_[id]->tick();
      });
    }
  }
  if (scenario_.vote_interval > 0.0) {
    for (double t = scenario_.vote_interval; t <= scenario_.end_time; t += scenario_.vote_interval) {
      push(t, [this] {
        for (NodeId id = 0; id < nodes_.size(); ++id) {
          if (alive_[id]) nodes_[id]->request_votes();
        }
      });
    }
  }
}

void Simulator::run_intent(const IntentSpec& in) {
  const NodeId from = by_name_.at(in.from);
  if (!alive_[from]) return;
  node::Node& n = *nodes_[from];
  switch (in.kind) {
    case IntentKind::Handshake: {
      const Alias& dst = alias(in.to);
      HandshakeRecord h{now_, from, dst.node, in.to, {}};
      try {
        h.label = n.originate_request(pseudonym(in.to));
      } catch (const Error& e) {
        on_event(from, node::TraceEvent{"", 1, "0", std::string("request not sent: ") + e.what()});
      }
      handshakes_.push_back(std::move(h));
      break;
    }
    case IntentKind::Data: {
      const Bytes& peer = pseudonym(in.to);
      std::string label;
      for (auto it = handshakes_.rbegin(); it != handshakes_.rend() && label.empty(); ++it) {
        const auto* s = n.find_session(it->label);
        if (s && s->authenticated && s->peer == peer) label = it->label;
      }
      try {
        if (label.empty()) throw Error(Errc::SessionNotAuthenticated, "no session with " + in.to);
        ++data_sent_;
        n.send_data(label, to_bytes(in.payload));
      } catch (const Error& e) {
        ++data_failed_;
        on_event(from, node::TraceEvent{label, 4, "tx", std::string("DATA not sent: ") + e.what()});
      }
      break;
    }
    case IntentKind::Votes:
      n.request_votes();
      break;
  }
}

// ---------------------------------------------------------------------------
// event loop

void Simulator::push(double t, std::function<void()> fn) {
  queue_.push(Queued{std::max(t, now_), next_seq_++, std::move(fn)});
}

void Simulator::at(double t, std::function<void()> fn) { push(t, std::move(fn)); }

void Simulator::run_until(double t) {
  while (!queue_.empty() && queue_.top().t <= t) {
    Queued q = queue_.top();
    queue_.pop();
    now_ = q.t;
    q.fn();
  }
  now_ = std::max(now_, t);
}

void Simulator::schedule(NodeId owner, double delay, std::function<void()> fn) {
  push(now_ + std::max(0.0, delay), [this, owner, fn = std::move(fn)] {
    if (alive_[owner]) fn();
  });
}

// ---------------------------------------------------------------------------
// radio

std::vector<NodeId> Simulator::neighbors(NodeId of) const {
  std::vector<NodeId> out;
  if (!alive_[of]) return out;
  for (NodeId j = 0; j < pos_.size(); ++j) {
    if (j == of || !alive_[j]) continue;
    const double d = std::hypot(pos_[of].first - pos_[j].first, pos_[of].second - pos_[j].second);
    if (d <= std::min(range_[of], range_[j])) out.push_back(j);
  }
  return out;
}

void Simulator::broadcast(NodeId from, Bytes frame, wire::FrameType type, node::TxKind kind) {
  if (!adversary_hook(from, std::nullopt, frame, type, kind)) return;
  transmit(from, std::nullopt, std::move(frame), type, kind);
}

void Simulator::unicast(NodeId from, NodeId to, Bytes frame, wire::FrameType type, node::TxKind kind) {
  if (!adversary_hook(from, to, frame, type, kind)) return;
  transmit(from, to, std::move(frame), type, kind);
}

void Simulator::transmit(NodeId from, std::optional<NodeId> to, Bytes frame, wire::FrameType type,
                         node::TxKind kind) {
  if (!alive_[from]) return;
  TxRecord rec;
  rec.t = now_;
  rec.sender = from;
  rec.to = to;
  rec.type = type;
  rec.kind = kind;
  for (NodeId n : neighbors(from)) {
    if (!to || *to == n) {
      rec.receivers.push_back(n);
    } else {
      rec.overhearers.push_back(n);
    }
  }
  auto shared = std::make_shared<const Bytes>(std::move(frame));
  auto deliver = [&](NodeId n, bool overheard) {
    const double t = now_ + kBaseLatency + rng_.uniform(0.0, kJitter);
    push(t, [this, from, n, overheard, shared] {
      if (alive_[n]) nodes_[n]->receive(from, *shared, overheard);
    });
  };
  for (NodeId n : rec.receivers) deliver(n, false);
  for (NodeId n : rec.overhearers) deliver(n, true);

  Json j;
  j["kind"] = "tx";
  j["t"] = now_;
  j["sender"] = names_[from];
  j["to"] = to ? Json(names_[*to]) : Json(nullptr);
  Json recv = Json::array();
  for (NodeId n : rec.receivers) recv.push_back(names_[n]);
  Json over = Json::array();
  for (NodeId n : rec.overhearers) over.push_back(names_[n]);
  j["receivers"] = std::move(recv);
  j["overhearers"] = std::move(over);
  j["type"] = std::string(wire::frame_type_name(type));
  j["tx"] = std::string(node::tx_kind_name(kind));
  j["len"] = shared->size();
  j["hex"] = to_hex(*shared);
  trace_.push_back(std::move(j));
  rec.octets = *shared;
  tx_.push_back(std::move(rec));
}

void Simulator::record_adv(NodeId node, std::string_view action, wire::FrameType type) {
  Json j;
  j["kind"] = "adv";
  j["t"] = now_;
  j["node"] = names_[node];
  j["action"] = std::string(action);
  j["type"] = std::string(wire::frame_type_name(type));
  trace_.push_back(std::move(j));
}

bool Simulator::adversary_hook(NodeId from, std::optional<NodeId> to, Bytes& frame, wire::FrameType type,
                               node::TxKind kind) {
  auto it = adversaries_.find(from);
  if (it == adversaries_.end() || kind != node::TxKind::Relay) return true;
  const AdversarySpec& adv = it->second;
  if (adv.affects.count(type)) {
    if (adv.drop > 0.0 && rng_.uniform() < adv.drop) {
      record_adv(from, "drop", type);
      return false;
    }
    if (adv.tamper > 0.0 && rng_.uniform() < adv.tamper) {
      const auto [off, len] = wire::body_range(frame, scenario_.protocol.frame_size);
      if (len > 0) {
        frame[off + rng_.below(len)] ^= static_cast<std::uint8_t>(1u << rng_.below(8));
        record_adv(from, "tamper", type);
      }
    }
  }
  if (adv.replay && adv.replay->types.count(type)) {
    const Bytes copy = frame;
    for (std::size_t k = 1; k <= adv.replay->count; ++k) {
      push(now_ + adv.replay->delay * static_cast<double>(k), [this, from, to, copy, type] {
        if (!alive_[from]) return;
        record_adv(from, "replay", type);
        transmit(from, to, copy, type, node::TxKind::Replay);
      });
    }
  }
  if (adv.duplicate_req && type == wire::FrameType::REQ) {
    const Bytes copy = frame;
    push(now_ + kDuplicateReqDelay, [this, from, copy] {
      if (!alive_[from]) return;
      record_adv(from, "duplicate_req", wire::FrameType::REQ);
      transmit(from, std::nullopt, copy, wire::FrameType::REQ, node::TxKind::Replay);
    });
  }
  return true;
}

// ---------------------------------------------------------------------------
// upcalls from nodes

void Simulator::on_event(NodeId node, const node::TraceEvent& ev) {
  events_.push_back(EventRecord{now_, node, ev});
  Json j;
  j["kind"] = "ev";
  j["t"] = now_;
  j["node"] = names_[node];
  j["sess"] = ev.sess;
  j["phase"] = ev.phase;
  j["step"] = ev.step;
  j["what"] = ev.what;
  trace_.push_back(std::move(j));
}

void Simulator::on_reputation(NodeId observer, const rep::Record& r, std::string_view cause) {
  reps_.push_back(RepRecord{now_, observer, r.peer, r.oe, r.sr, r.ir, std::string(cause)});
  Json j;
  j["kind"] = "rep";
  j["t"] = now_;
  j["obs"] = names_[observer];
  j["subj"] = names_[r.peer];
  j["oe"] = r.oe;
  j["sr"] = r.sr;
  j["ir"] = r.ir;
  j["cause"] = std::string(cause);
  trace_.push_back(std::move(j));
}

void Simulator::on_deliver(NodeId node, const std::string& sess, const Bytes& payload) {
  ++data_delivered_;
  Json j;
  j["kind"] = "deliver";
  j["t"] = now_;
  j["node"] = names_[node];
  j["sess"] = sess;
  j["len"] = payload.size();
  trace_.push_back(std::move(j));
}

// ---------------------------------------------------------------------------
// results

std::string Simulator::trace_jsonl() const {
  std::string out;
  for (const auto& r : trace_) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

bool Simulator::handshake_succeeded(const HandshakeRecord& h) const {
  if (h.label.empty()) return false;
  const auto* si = nodes_[h.initiator]->find_session(h.label);
  const auto* sr = nodes_[h.responder]->find_session(h.label);
  return si && sr && si->authenticated && sr->authenticated && si->k_ses == sr->k_ses;
}

std::vector<Secret> Simulator::secrets() const {
  std::vector<Secret> out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    for (const auto& o : nodes_[id]->identity().own) out.push_back(Secret{"pseudonym", names_[id], o.pseudonym});
    out.push_back(Secret{"ui", names_[id], uis_[id]});
  }
  std::set<Bytes> keys;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    for (const auto& [f_id, s] : nodes_[id]->sessions()) {
      if (keys.insert(s.k_ses.bytes).second) out.push_back(Secret{"session_key", s.id, s.k_ses.bytes});
    }
  }
  return out;
}

Metrics Simulator::metrics() const {
  Metrics m;
  m.handshakes_attempted = handshakes_.size();
  for (const auto& h : handshakes_) m.handshakes_succeeded += handshake_succeeded(h) ? 1 : 0;
  std::vector<AuditFrame> frames;
  for (std::size_t i = 0; i < tx_.size(); ++i) {
    const auto& t = tx_[i];
    ++m.frames_by_type[std::string(wire::frame_type_name(t.type))];
    frames.push_back(AuditFrame{i, t.t, names_[t.sender], std::string(wire::frame_type_name(t.type)), t.octets});
  }
  m.frames_total = tx_.size();
  m.data_sent = data_sent_;
  m.data_delivered = data_delivered_;
  m.data_failed = data_failed_;
  m.reputation_events = reps_.size();
  m.audit = audit_anonymity(frames, secrets());
  return m;
}

Json Simulator::summary(std::uint64_t seed) const {
  const Metrics m = metrics();
  Json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  j["provider"] = scenario_.provider;
  j["frame_size"] = scenario_.protocol.frame_size;
  j["end_time"] = scenario_.end_time;
  j["nodes"] = names_.size();
  j["handshakes"] = {{"attempted", m.handshakes_attempted},
                     {"succeeded", m.handshakes_succeeded},
                     {"success_rate", m.handshake_success_rate()}};
  Json frames = Json::object();
  for (const auto& [type, n] : m.frames_by_type) frames[type] = n;
  j["frames"] = {{"total", m.frames_total}, {"by_type", std::move(frames)}};
  j["data"] = {{"sent", m.data_sent}, {"delivered", m.data_delivered}, {"failed", m.data_failed}};
  j["reputation_events"] = m.reputation_events;
  Json lens = Json::array();
  for (auto l : m.audit.lengths) lens.push_back(l);
  j["audit"] = {{"frames", m.audit.frames},
                {"constant_length", m.audit.constant_length()},
                {"frame_lengths", std::move(lens)},
                {"violations", m.audit.violations.size()},
                {"ok", m.audit.ok()}};
  Json sessions = Json::array();
  for (const auto& h : handshakes_) {
    sessions.push_back({{"t", h.t},
                        {"session", h.label},
                        {"initiator", names_[h.initiator]},
                        {"responder", names_[h.responder]},
                        {"dest", h.dest_alias},
                        {"authenticated", handshake_succeeded(h)}});
  }
  j["sessions"] = std::move(sessions);
  return j;
}

std::string Simulator::reputation_tsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "t\tobserver\tsubject\toe\tsr\tir\tcause\n";
  for (const auto& r : reps_) {
    out << r.t << '\t' << names_[r.observer] << '\t' << names_[r.subject] << '\t' << r.oe << '\t' << r.sr << '\t'
        << r.ir << '\t' << r.cause << '\n';
  }
  return out.str();
}

}  // namespace anap::sim
