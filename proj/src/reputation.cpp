#include "anap/reputation.hpp"

#include <algorithm>
#include <cmath>

namespace anap::rep {
namespace {

void require_range(double v, double lo, double hi, const char* what) {
  if (!(v >= lo && v <= hi)) throw Error(Errc::DomainError, std::string(what) + " out of range");
}

void require_dt(double dt) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw Error(Errc::DomainError, "elapsed time must be >= 0");
}

void check_votes(std::span<const Vote> votes) {
  for (const auto& v : votes) {
    require_range(v.value, -1.0, 1.0, "vote value");
    require_range(v.voter_ir, -1.0, 1.0, "voter IR");
  }
}

struct Weighted {
  double sum_ir = 0.0;
  double sum_ir_v = 0.0;
};

template <class F>
Weighted weigh(std::span<const Vote> votes, F value_of) {
  Weighted w;
  for (const auto& v : votes) {
    if (v.voter_ir > 0.0) {
      w.sum_ir += v.voter_ir;
      w.sum_ir_v += v.voter_ir * value_of(v);
    }
  }
  return w;
}

}  // namespace

void validate(const Params& p) {
  require_range(p.rho, 0.0, 1.0, "rho");
  require_range(p.alpha, 0.0, 1.0, "alpha");
  require_range(p.beta, 0.0, 1.0, "beta");
  require_range(p.gamma, 0.0, 1.0, "gamma");
}

std::optional<std::string> params_warning(const Params& p) {
  if (p.gamma < p.alpha) return std::nullopt;
  return "gamma should be below alpha so SR evolves faster than IR";
}

double update_own_experience(double oe_old, double st, double rho, double dt) {
  require_range(oe_old, -1.0, 1.0, "oe");
  require_range(st, -1.0, 1.0, "satisfaction");
  require_range(rho, 0.0, 1.0, "rho");
  require_dt(dt);
  const double f = std::pow(rho, dt);
  return oe_old * f + st * (1.0 - f);
}

double update_service_reputation(double oe, std::span<const Vote> votes, double alpha) {
  require_range(oe, -1.0, 1.0, "oe");
  require_range(alpha, 0.0, 1.0, "alpha");
  check_votes(votes);
  const auto w = weigh(votes, [](const Vote& v) { return v.value; });
  if (w.sum_ir <= 0.0) return oe;
  // clamp absorbs rounding only; the exact value is a convex combination
  return std::clamp(alpha * oe + (1.0 - alpha) * (w.sum_ir_v / w.sum_ir), -1.0, 1.0);
}

double update_information_reputation(double oe, std::span<const Vote> votes, double beta,
                                     double gamma, double dt) {
  require_range(oe, -1.0, 1.0, "oe");
  require_range(beta, 0.0, 1.0, "beta");
  require_range(gamma, 0.0, 1.0, "gamma");
  require_dt(dt);
  check_votes(votes);
  const auto w = weigh(votes, [oe](const Vote& v) { return v.value - oe; });
  if (w.sum_ir <= 0.0) return std::clamp(beta * oe, -1.0, 1.0);
  const double raw = beta * oe + std::pow(gamma, dt) * (1.0 - beta) * (w.sum_ir_v / w.sum_ir);
  return std::clamp(raw, -1.0, 1.0);
}

ScoringTable::ScoringTable()
    : table_{
          {"forward_ok", 1.0},
          {"tamper", -1.0},
          {"drop", -1.0},
          {"bad_message", -1.0},
          {"duplicate_req", -0.5},
          {"replay", -0.5},
          {"duplicate_reply", -0.5},
          {"delay", -0.5},
          {"double_relay", -0.5},
          {"duplicate_vote", -0.5},
          {"exchange_timeout", -0.5},
      } {}

Satisfaction ScoringTable::score(std::string_view event_class) const {
  auto it = table_.find(event_class);
  if (it == table_.end()) {
    throw Error(Errc::UnknownEventClass, "no score for '" + std::string(event_class) + "'");
  }
  return Satisfaction{it->second, it->first};
}

void ScoringTable::set(const std::string& event_class, double value) {
  require_range(value, -1.0, 1.0, "satisfaction");
  table_[event_class] = value;
}

ReputationTable::ReputationTable(Params params, ScoringTable scoring)
    : params_(params), scoring_(std::move(scoring)) {
  validate(params_);
}

Record& ReputationTable::slot(NodeId peer) {
  auto [it, fresh] = records_.try_emplace(peer);
  if (fresh) it->second.peer = peer;
  return it->second;
}

Record ReputationTable::get(NodeId peer) const {
  auto it = records_.find(peer);
  if (it != records_.end()) return it->second;
  Record r;
  r.peer = peer;
  return r;
}

std::vector<Vote> ReputationTable::votes_about(NodeId subject) const {
  std::vector<Vote> out;
  auto it = votes_.find(subject);
  if (it == votes_.end()) return out;
  for (const auto& [voter, v] : it->second) out.push_back(v);
  return out;
}

void ReputationTable::recompute(Record& r, double now) {
  const auto votes = votes_about(r.peer);
  r.sr = update_service_reputation(r.oe, votes, params_.alpha);
  r.ir = update_information_reputation(r.oe, votes, params_.beta, params_.gamma,
                                       std::max(0.0, now - r.ir_updated_at));
  r.ir_updated_at = std::max(r.ir_updated_at, now);
}

const Record& ReputationTable::observe(NodeId subject, std::string_view event_class, double now) {
  const Satisfaction st = scoring_.score(event_class);
  Record& r = slot(subject);
  r.oe = update_own_experience(r.oe, st.value, params_.rho, std::max(0.0, now - r.oe_updated_at));
  r.oe_updated_at = std::max(r.oe_updated_at, now);
  recompute(r, now);
  return r;
}

std::vector<Vote> ReputationTable::ingest(NodeId self, NodeId voter,
                                          std::span<const wire::VoteEntry> entries, double now) {
  for (const auto& e : entries) require_range(e.value, -1.0, 1.0, "vote value");
  const double voter_ir = get(voter).ir;
  std::vector<Vote> accepted;
  for (const auto& e : entries) {
    if (e.subject == self || e.subject == voter) continue;
    Vote v{e.subject, e.value, voter, voter_ir};
    votes_[e.subject][voter] = v;
    accepted.push_back(v);
  }
  for (const auto& v : accepted) recompute(slot(v.subject), now);
  return accepted;
}

const VoteExchange::Request& VoteExchange::open(const crypto::Provider& p, Rng& rng, double now,
                                                double timeout) {
  Request req;
  req.seq = next_seq_++;
  req.tpk = p.generate_keypair(rng);
  req.seq_hash = wire::vote_seq_hash(p, req.seq);
  req.expiry = now + timeout;
  auto [it, inserted] = open_.insert_or_assign(req.seq_hash, std::move(req));
  (void)inserted;
  return it->second;
}

void VoteExchange::expire(double now) {
  for (auto it = open_.begin(); it != open_.end();) {
    if (now > it->second.expiry) {
      expired_.insert(it->first);
      it = open_.erase(it);
    } else {
      ++it;
    }
  }
}

std::optional<std::vector<wire::VoteEntry>> VoteExchange::accept(const crypto::Provider& p,
                                                                  ByteView seq_hash, NodeId responder,
                                                                  ByteView body, double now) {
  expire(now);
  const Bytes key(seq_hash.begin(), seq_hash.end());
  auto it = open_.find(key);
  if (it == open_.end()) {
    if (expired_.count(key)) return std::nullopt;
    throw Error(Errc::UnknownSeq, "response matches no outstanding request");
  }
  Request& req = it->second;
  if (req.responded.count(responder)) {
    throw Error(Errc::DuplicateResponder, "second response from the same node");
  }
  std::vector<wire::VoteEntry> entries;
  try {
    entries = wire::decode_vote_list(p.asym_decrypt(req.tpk.secret_key, body));
  } catch (const Error&) {
    throw Error(Errc::DecryptFail, "response does not decrypt under the temporary key");
  }
  req.responded.insert(responder);
  return entries;
}

}  // namespace anap::rep
