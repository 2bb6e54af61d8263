#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>

#include "anap/node.hpp"
#include "json.hpp"

namespace anap::sim {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// scenario

struct NodeSpec {
  std::string name;
  double x = 0.0;
  double y = 0.0;
  double range = 100.0;
  std::vector<std::string> pseudonyms;  // explicit octets; empty means generated
  std::size_t pseudonym_count = 3;
  std::optional<std::string> ui;
};

struct MoveSpec {
  double at = 0.0;
  std::string node;
  double x = 0.0;
  double y = 0.0;
};

struct PowerOffSpec {
  double at = 0.0;
  std::string node;
};

struct ReplaySpec {
  double delay = 1.0;
  std::size_t count = 1;
  std::set<wire::FrameType> types;
};

struct DiscreditSpec {
  std::string target;
  double value = -1.0;
};

struct AdversarySpec {
  std::string node;
  double drop = 0.0;
  double tamper = 0.0;
  std::set<wire::FrameType> affects{wire::FrameType::REQ, wire::FrameType::REP, wire::FrameType::ACK,
                                    wire::FrameType::DATA, wire::FrameType::ERR};
  std::optional<ReplaySpec> replay;
  std::optional<DiscreditSpec> discredit;
  bool duplicate_req = false;
};

enum class IntentKind { Handshake, Data, Votes };

struct IntentSpec {
  IntentKind kind = IntentKind::Handshake;
  double at = 0.0;
  std::string from;     // acting node
  std::string to;       // pseudonym alias (handshake, data)
  std::string payload;  // data only
  std::size_t repeat = 1;
  double interval = 1.0;
};

struct Scenario {
  std::vector<NodeSpec> nodes;
  std::vector<MoveSpec> mobility;
  std::vector<PowerOffSpec> power_off;
  std::vector<AdversarySpec> adversaries;
  std::vector<IntentSpec> intents;
  std::string provider = "desk";
  node::ProtocolParams protocol;
  rep::Params reputation;
  std::map<std::string, double> scoring;
  double vote_interval = 0.0;  // 0 disables periodic vote rounds
  double end_time = 30.0;
};

/// Throws ScenarioInvalid.
Scenario parse_scenario(const nlohmann::json& j);
/// Throws IOFailure, ScenarioInvalid.
Scenario load_scenario(const std::string& path);

// ---------------------------------------------------------------------------
// anonymity audit

struct Secret {
  std::string kind;  // pseudonym | ui | session_key
  std::string owner;
  Bytes octets;
};

struct AuditFrame {
  std::size_t index = 0;  // position in the trace
  double t = 0.0;
  std::string sender;
  std::string type;
  Bytes octets;
};

struct Violation {
  std::size_t index = 0;
  double t = 0.0;
  std::string sender;
  std::string type;
  std::string secret_kind;
  std::string owner;
  std::size_t offset = 0;
};

struct AuditReport {
  std::size_t frames = 0;
  std::set<std::size_t> lengths;
  std::vector<Violation> violations;
  bool constant_length() const { return lengths.size() <= 1; }
  bool ok() const { return constant_length() && violations.empty(); }
};

AuditReport audit_anonymity(const std::vector<AuditFrame>& frames, const std::vector<Secret>& secrets);

Json secrets_to_json(const std::vector<Secret>& secrets);
/// Throws MalformedTrace.
std::vector<Secret> secrets_from_json(const nlohmann::json& j);

/// One JSON record per line. Throws MalformedTrace.
std::vector<Json> parse_trace(std::istream& in);
std::vector<AuditFrame> frames_from_trace(const std::vector<Json>& records);

/// Narrated, time-ordered account of one session's protocol steps.
std::vector<std::string> explain(const std::vector<Json>& records, const std::string& session);

// ---------------------------------------------------------------------------
// simulator

struct TxRecord {
  double t = 0.0;
  NodeId sender = 0;
  std::optional<NodeId> to;
  std::vector<NodeId> receivers;
  std::vector<NodeId> overhearers;
  wire::FrameType type = wire::FrameType::REQ;
  node::TxKind kind = node::TxKind::Originate;
  Bytes octets;
};

struct RepRecord {
  double t = 0.0;
  NodeId observer = 0;
  NodeId subject = 0;
  double oe = 0.0;
  double sr = 0.0;
  double ir = 0.0;
  std::string cause;
};

struct EventRecord {
  double t = 0.0;
  NodeId node = 0;
  node::TraceEvent ev;
};

struct HandshakeRecord {
  double t = 0.0;
  NodeId initiator = 0;
  NodeId responder = 0;
  std::string dest_alias;
  std::string label;  // empty when origination failed
};

struct Metrics {
  std::size_t handshakes_attempted = 0;
  std::size_t handshakes_succeeded = 0;
  std::map<std::string, std::size_t> frames_by_type;
  std::size_t frames_total = 0;
  std::size_t data_sent = 0;
  std::size_t data_delivered = 0;
  std::size_t data_failed = 0;
  std::size_t reputation_events = 0;
  AuditReport audit;
  double handshake_success_rate() const {
    return handshakes_attempted ? static_cast<double>(handshakes_succeeded) / handshakes_attempted : 0.0;
  }
};

class Simulator final : public node::Environment {
 public:
  /// Runs the setup epoch (authority registration and list distribution).
  /// Throws ScenarioInvalid.
  Simulator(Scenario scenario, std::uint64_t seed);
  ~Simulator() override;

  void run() { run_until(scenario_.end_time); }
  void run_until(double t);

  /// Schedules an arbitrary action; used by tests to script mid-run steps.
  void at(double t, std::function<void()> fn);

  node::Node& node(const std::string& name);
  NodeId id_of(const std::string& name) const;
  std::size_t node_count() const { return nodes_.size(); }
  bool alive(NodeId id) const { return alive_.at(id); }
  /// Octets of a pseudonym alias ("D1") or explicit pseudonym.
  const Bytes& pseudonym(const std::string& alias) const;

  const std::vector<TxRecord>& transmissions() const { return tx_; }
  const std::vector<RepRecord>& reputation_events() const { return reps_; }
  const std::vector<EventRecord>& events() const { return events_; }
  const std::vector<HandshakeRecord>& handshakes() const { return handshakes_; }
  const std::vector<Json>& trace() const { return trace_; }
  std::string trace_jsonl() const;

  bool handshake_succeeded(const HandshakeRecord& h) const;
  std::vector<Secret> secrets() const;
  Metrics metrics() const;
  Json summary(std::uint64_t seed) const;
  /// Tab-separated time series: t, observer, subject, oe, sr, ir.
  std::string reputation_tsv() const;

  // node::Environment
  double now() const override { return now_; }
  Rng& rng() override { return rng_; }
  void broadcast(NodeId from, Bytes frame, wire::FrameType type, node::TxKind kind) override;
  void unicast(NodeId from, NodeId to, Bytes frame, wire::FrameType type, node::TxKind kind) override;
  std::vector<NodeId> neighbors(NodeId of) const override;
  void schedule(NodeId owner, double delay, std::function<void()> fn) override;
  std::string name_of(NodeId id) const override;
  void on_event(NodeId node, const node::TraceEvent& ev) override;
  void on_reputation(NodeId observer, const rep::Record& r, std::string_view cause) override;
  void on_deliver(NodeId node, const std::string& sess, const Bytes& payload) override;

 private:
  struct Queued {
    double t;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Queued& a, const Queued& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };
  struct Alias {
    NodeId node = 0;
    std::size_t index = 0;
  };

  void push(double t, std::function<void()> fn);
  void setup_identities();
  void schedule_script();
  void transmit(NodeId from, std::optional<NodeId> to, Bytes frame, wire::FrameType type, node::TxKind kind);
  /// Applies drop / tamper / replay / duplicate behaviour; false when dropped.
  bool adversary_hook(NodeId from, std::optional<NodeId> to, Bytes& frame, wire::FrameType type,
                      node::TxKind kind);
  void record_adv(NodeId node, std::string_view action, wire::FrameType type);
  void run_intent(const IntentSpec& in);
  const Alias& alias(const std::string& a) const;

  Scenario scenario_;
  Rng rng_;
  std::unique_ptr<crypto::Provider> provider_;
  std::unique_ptr<identity::TrustedAuthority> ta_;
  std::vector<std::string> names_;
  std::map<std::string, NodeId> by_name_;
  std::vector<std::pair<double, double>> pos_;
  std::vector<double> range_;
  std::vector<bool> alive_;
  std::vector<Bytes> uis_;
  std::map<std::string, Alias> aliases_;
  std::vector<std::unique_ptr<node::Node>> nodes_;
  std::map<NodeId, AdversarySpec> adversaries_;

  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Queued, std::vector<Queued>, Later> queue_;

  std::vector<TxRecord> tx_;
  std::vector<RepRecord> reps_;
  std::vector<EventRecord> events_;
  std::vector<HandshakeRecord> handshakes_;
  std::vector<Json> trace_;
  std::size_t data_sent_ = 0;
  std::size_t data_delivered_ = 0;
  std::size_t data_failed_ = 0;
};

}  // namespace anap::sim
