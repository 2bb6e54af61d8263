#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>

#include "anap/crypto.hpp"
#include "anap/wire.hpp"

namespace anap::rep {

struct Params {
  double rho = 0.9;    // own-experience fading factor
  double alpha = 0.75; // own-experience weight in SR
  double beta = 0.6;   // own-experience weight in IR
  double gamma = 0.5;  // IR time-fading factor
};

/// Throws DomainError when any parameter leaves [0,1].
void validate(const Params& p);
/// Non-empty when the tuning rule gamma < alpha is violated.
std::optional<std::string> params_warning(const Params& p);

struct Vote {
  NodeId subject = 0;
  double value = 0.0;
  NodeId voter = 0;
  double voter_ir = 0.0;  // evaluator's IR of the voter, frozen at ingestion
};

/// oe·ρ^dt + st·(1−ρ^dt). Throws DomainError.
double update_own_experience(double oe_old, double st, double rho, double dt);

/// α·oe + (1−α)·Σ ir·v / Σ ir over voters with ir > 0; oe when none qualify.
double update_service_reputation(double oe, std::span<const Vote> votes, double alpha);

/// β·oe + γ^dt·(1−β)·Σ ir·(v−oe) / Σ ir over voters with ir > 0, clamped to
/// [−1,1]; β·oe (clamped) when none qualify.
double update_information_reputation(double oe, std::span<const Vote> votes, double beta,
                                     double gamma, double dt);

struct Satisfaction {
  double value = 0.0;
  std::string cause;
};

/// Behaviour class → satisfaction degree.
class ScoringTable {
 public:
  ScoringTable();

  /// Throws UnknownEventClass.
  Satisfaction score(std::string_view event_class) const;
  /// Throws DomainError for values outside [−1,1].
  void set(const std::string& event_class, double value);
  const std::map<std::string, double, std::less<>>& entries() const { return table_; }

 private:
  std::map<std::string, double, std::less<>> table_;
};

struct Record {
  NodeId peer = 0;
  double oe = 0.0;
  double sr = 0.0;
  double ir = 0.0;
  double oe_updated_at = 0.0;
  double ir_updated_at = 0.0;
};

/// One node's view of every peer. Unknown peers read as the neutral record
/// with timestamps at the simulation epoch.
class ReputationTable {
 public:
  ReputationTable(Params params, ScoringTable scoring);

  /// Scores the event, folds it into OE and recomputes SR and IR.
  const Record& observe(NodeId subject, std::string_view event_class, double now);

  /// Stores each (subject, value) from `voter` with the voter's current IR
  /// and recomputes the affected subjects. Votes about `self` or by the
  /// voter about itself are skipped. Returns the accepted votes.
  std::vector<Vote> ingest(NodeId self, NodeId voter, std::span<const wire::VoteEntry> entries,
                           double now);

  Record get(NodeId peer) const;
  double sr(NodeId peer) const { return get(peer).sr; }
  const std::map<NodeId, Record>& records() const { return records_; }
  std::vector<Vote> votes_about(NodeId subject) const;
  const Params& params() const { return params_; }

 private:
  Record& slot(NodeId peer);
  void recompute(Record& r, double now);

  Params params_;
  ScoringTable scoring_;
  std::map<NodeId, Record> records_;
  std::map<NodeId, std::map<NodeId, Vote>> votes_;  // subject → voter → latest vote
};

/// Requester side of the anonymous recommendation exchange.
class VoteExchange {
 public:
  struct Request {
    std::uint32_t seq = 0;
    crypto::AsymKeyPair tpk;  // temporary pair, distinct from pseudonym keys
    Bytes seq_hash;
    double expiry = 0.0;
    std::set<NodeId> responded;
  };

  explicit VoteExchange(std::uint32_t first_seq = 1) : next_seq_(first_seq) {}

  const Request& open(const crypto::Provider& p, Rng& rng, double now, double timeout);

  /// Decrypts and returns a response's entries. nullopt for a response to
  /// an expired request. Throws UnknownSeq, DuplicateResponder, DecryptFail.
  std::optional<std::vector<wire::VoteEntry>> accept(const crypto::Provider& p, ByteView seq_hash,
                                                      NodeId responder, ByteView body, double now);

  /// Drops requests whose expiry has passed; their hashes stay recognised.
  void expire(double now);

  std::size_t outstanding() const { return open_.size(); }

 private:
  std::uint32_t next_seq_;
  std::map<Bytes, Request> open_;
  std::set<Bytes> expired_;
};

}  // namespace anap::rep
