#include <doctest.h>

#include <cmath>
#include <functional>

#include "anap/reputation.hpp"
#include "reputation_oracle.hpp"

using namespace anap;
using namespace anap::rep;

namespace {

struct Case {
  double oe, st, rho, alpha, beta, gamma, dt;
  std::vector<Vote> votes;
};

// Mixes interior values with the boundary points the formulas are most
// sensitive to.
double pick_unit(Rng& rng) {
  switch (rng.below(8)) {
    case 0: return 0.0;
    case 1: return 1.0;
    default: return rng.uniform();
  }
}

double pick_signed(Rng& rng) {
  switch (rng.below(10)) {
    case 0: return -1.0;
    case 1: return 1.0;
    case 2: return 0.0;
    default: return rng.uniform(-1.0, 1.0);
  }
}

Case random_case(Rng& rng) {
  Case c{pick_signed(rng), pick_signed(rng), pick_unit(rng), pick_unit(rng),
         pick_unit(rng),   pick_unit(rng),   rng.below(6) == 0 ? 0.0 : rng.uniform(0.0, 20.0), {}};
  const auto n = rng.below(7);
  for (std::uint64_t i = 0; i < n; ++i) {
    c.votes.push_back(Vote{static_cast<NodeId>(i), pick_signed(rng), static_cast<NodeId>(100 + i), pick_signed(rng)});
  }
  return c;
}

std::vector<oracle::OracleVote> to_oracle(const std::vector<Vote>& votes) {
  std::vector<oracle::OracleVote> out;
  for (const auto& v : votes) out.push_back({v.voter_ir, v.value});
  return out;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an anap::Error");
  return Errc::IOFailure;
}

bool in_range(double x) { return x >= -1.0 && x <= 1.0; }

}  // namespace

TEST_CASE("worked examples: own experience") {
  CHECK(update_own_experience(0.0, 1.0, 0.5, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(update_own_experience(0.37, -0.9, 1.0, 4.0) == 0.37);
  for (double rho : {0.0, 0.3, 0.9}) CHECK(update_own_experience(0.8, 0.8, rho, 2.5) == doctest::Approx(0.8));
}

TEST_CASE("worked examples: service reputation") {
  std::vector<Vote> one{{7, 1.0, 1, 1.0}};
  CHECK(update_service_reputation(0.5, one, 0.5) == doctest::Approx(0.75));
  std::vector<Vote> distrusted{{7, -1.0, 1, 0.0}, {7, 1.0, 2, -0.4}};
  CHECK(update_service_reputation(0.6, distrusted, 0.7) == 0.6);
  std::vector<Vote> symmetric{{7, 0.4, 1, 0.5}, {7, -0.4, 2, 0.5}};
  CHECK(update_service_reputation(0.0, symmetric, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("worked examples: information reputation") {
  std::vector<Vote> agree{{7, 0.5, 1, 1.0}};
  CHECK(update_information_reputation(0.5, agree, 0.5, 0.9, 0.0) == doctest::Approx(0.25));
  CHECK(update_information_reputation(0.5, agree, 1.0, 0.3, 7.0) == doctest::Approx(0.5));
  std::vector<Vote> opposite{{7, 1.0, 1, 1.0}};
  CHECK(update_information_reputation(-1.0, opposite, 0.0, 1.0, 0.0) == 1.0);
  CHECK(update_information_reputation(0.4, {}, 0.5, 0.5, 1.0) == doctest::Approx(0.2));
}

TEST_CASE("oracle agreement within 1e-12 over 10000 generated inputs") {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Case c = random_case(rng);
    CAPTURE(i);
    const double oe = update_own_experience(c.oe, c.st, c.rho, c.dt);
    const double sr = update_service_reputation(c.oe, c.votes, c.alpha);
    const double ir = update_information_reputation(c.oe, c.votes, c.beta, c.gamma, c.dt);
    const auto ov = to_oracle(c.votes);
    const double d = std::max({std::abs(oe - oracle::own_experience(c.oe, c.st, c.rho, c.dt)),
                               std::abs(sr - oracle::service_reputation(c.oe, ov, c.alpha)),
                               std::abs(ir - oracle::information_reputation(c.oe, ov, c.beta, c.gamma, c.dt))});
    worst = std::max(worst, d);
    CHECK(d <= 1e-12);
    CHECK(in_range(oe));
    CHECK(in_range(sr));
    CHECK(in_range(ir));
  }
  MESSAGE("worst deviation from oracle: " << worst);
}

TEST_CASE("property: range preservation across random update sequences") {
  Rng rng(77);
  ScoringTable scoring;
  std::vector<std::string> classes;
  for (const auto& [k, v] : scoring.entries()) classes.push_back(k);
  for (int run = 0; run < 200; ++run) {
    CAPTURE(run);
    ReputationTable t(Params{pick_unit(rng), pick_unit(rng), pick_unit(rng), pick_unit(rng)}, scoring);
    double now = 0.0;
    for (int step = 0; step < 60; ++step) {
      now += rng.uniform(0.0, 3.0);
      const NodeId subject = static_cast<NodeId>(rng.below(5));
      if (rng.below(3)) {
        t.observe(subject, classes[rng.below(classes.size())], now);
      } else {
        std::vector<wire::VoteEntry> entries;
        for (int k = 0; k < 3; ++k) entries.push_back({static_cast<std::uint32_t>(rng.below(5)), pick_signed(rng)});
        t.ingest(99, static_cast<NodeId>(rng.below(5)), entries, now);
      }
      for (const auto& [peer, r] : t.records()) {
        CHECK(in_range(r.oe));
        CHECK(in_range(r.sr));
        CHECK(in_range(r.ir));
      }
    }
  }
}

TEST_CASE("property: own experience gap decays geometrically toward a constant satisfaction") {
  Rng rng(5);
  for (int run = 0; run < 500; ++run) {
    const double rho = rng.uniform(0.0, 0.99);
    const double dt = rng.uniform(0.1, 3.0);
    const double st = pick_signed(rng);
    double oe = pick_signed(rng);
    for (int k = 0; k < 20; ++k) {
      const double gap = std::abs(oe - st);
      oe = update_own_experience(oe, st, rho, dt);
      CHECK(std::abs(oe - st) == doctest::Approx(gap * std::pow(rho, dt)).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("property: scaling every voter's IR leaves SR unchanged") {
  Rng rng(6);
  for (int run = 0; run < 2000; ++run) {
    Case c = random_case(rng);
    const double k = rng.uniform(0.05, 1.0);
    auto scaled = c.votes;
    for (auto& v : scaled) v.voter_ir *= k;
    CHECK(update_service_reputation(c.oe, c.votes, c.alpha) ==
          doctest::Approx(update_service_reputation(c.oe, scaled, c.alpha)).epsilon(1e-12));
  }
}

TEST_CASE("property: votes echoing own experience leave IR at beta times OE") {
  Rng rng(8);
  for (int run = 0; run < 2000; ++run) {
    Case c = random_case(rng);
    for (auto& v : c.votes) v.value = c.oe;
    CHECK(update_information_reputation(c.oe, c.votes, c.beta, c.gamma, c.dt) ==
          doctest::Approx(c.beta * c.oe).epsilon(1e-12));
  }
}

TEST_CASE("out-of-range inputs raise DomainError") {
  CHECK(code_of([] { update_own_experience(1.5, 0.0, 0.5, 1.0); }) == Errc::DomainError);
  CHECK(code_of([] { update_own_experience(0.0, -1.1, 0.5, 1.0); }) == Errc::DomainError);
  CHECK(code_of([] { update_own_experience(0.0, 0.0, 1.5, 1.0); }) == Errc::DomainError);
  CHECK(code_of([] { update_own_experience(0.0, 0.0, 0.5, -1.0); }) == Errc::DomainError);
  CHECK(code_of([] { update_own_experience(0.0, 0.0, 0.5, NAN); }) == Errc::DomainError);
  CHECK(code_of([] { update_service_reputation(0.0, {}, 2.0); }) == Errc::DomainError);
  std::vector<Vote> bad{{1, 3.0, 2, 0.5}};
  CHECK(code_of([&] { update_service_reputation(0.0, bad, 0.5); }) == Errc::DomainError);
  CHECK(code_of([] { update_information_reputation(0.0, {}, 0.5, -0.1, 1.0); }) == Errc::DomainError);
  CHECK(code_of([] { validate(Params{0.9, 0.75, 1.2, 0.5}); }) == Errc::DomainError);
}

TEST_CASE("parameter warning fires unless gamma is below alpha") {
  CHECK_FALSE(params_warning(Params{}).has_value());
  CHECK(params_warning(Params{0.9, 0.5, 0.6, 0.5}).has_value());
  CHECK(params_warning(Params{0.9, 0.4, 0.6, 0.8}).has_value());
}

TEST_CASE("scoring table defaults, overrides and unknown classes") {
  ScoringTable s;
  CHECK(s.score("forward_ok").value == 1.0);
  CHECK(s.score("tamper").value == -1.0);
  CHECK(s.score("drop").value == -1.0);
  CHECK(s.score("duplicate_req").value == -0.5);
  CHECK(s.score("replay").cause == "replay");
  CHECK(code_of([&] { s.score("sneezing"); }) == Errc::UnknownEventClass);
  s.set("delay", -0.25);
  CHECK(s.score("delay").value == -0.25);
  CHECK(code_of([&] { s.set("delay", -2.0); }) == Errc::DomainError);
}

TEST_CASE("unknown peers read as neutral and observations fold in with elapsed time") {
  ReputationTable t(Params{0.5, 0.75, 0.6, 0.5}, ScoringTable{});
  CHECK(t.get(3).oe == 0.0);
  CHECK(t.get(3).sr == 0.0);
  const auto& r = t.observe(3, "forward_ok", 1.0);
  CHECK(r.oe == doctest::Approx(0.5));
  CHECK(r.sr == doctest::Approx(0.5));
  CHECK(r.ir == doctest::Approx(0.3));
  CHECK(t.observe(3, "forward_ok", 2.0).oe == doctest::Approx(0.75));
}

TEST_CASE("ingested votes carry the evaluator's IR of the voter and skip self-reference") {
  ReputationTable t(Params{0.5, 0.5, 0.6, 0.4}, ScoringTable{});
  t.observe(2, "forward_ok", 1.0);  // voter 2 gains positive IR
  const double ir2 = t.get(2).ir;
  REQUIRE(ir2 > 0.0);
  std::vector<wire::VoteEntry> entries{{5, -1.0}, {2, 1.0}, {9, 0.5}};
  auto accepted = t.ingest(9, 2, entries, 1.0);
  REQUIRE(accepted.size() == 1);
  CHECK(accepted[0].subject == 5);
  CHECK(accepted[0].voter_ir == ir2);
  // SR of 5 = 0.5·0 + 0.5·(−1)
  CHECK(t.sr(5) == doctest::Approx(-0.5));

  // a voter we hold at IR 0 does not move anything
  t.ingest(9, 7, std::vector<wire::VoteEntry>{{6, -1.0}}, 1.0);
  CHECK(t.sr(6) == 0.0);
}

TEST_CASE("vote exchange accepts one response per responder and expires quietly") {
  auto p = crypto::make_provider("desk");
  Rng rng(1);
  VoteExchange vx;
  const auto& req = vx.open(*p, rng, 0.0, 2.0);
  const Bytes hash = req.seq_hash;
  const Bytes tpk = req.tpk.public_key;
  CHECK(hash == wire::vote_seq_hash(*p, req.seq));
  const Bytes body = p->asym_encrypt(tpk, wire::encode_vote_list({{1, 0.5}, {3, -0.25}}, rng), rng);

  auto got = vx.accept(*p, hash, 10, body, 0.5);
  REQUIRE(got.has_value());
  CHECK(got->size() == 2);
  CHECK(vx.accept(*p, hash, 11, body, 0.6).has_value());
  CHECK(code_of([&] { vx.accept(*p, hash, 10, body, 0.7); }) == Errc::DuplicateResponder);
  CHECK(code_of([&] { vx.accept(*p, wire::vote_seq_hash(*p, 999), 12, body, 0.7); }) == Errc::UnknownSeq);
  Bytes broken = body;
  broken[3] ^= 1;
  CHECK(code_of([&] { vx.accept(*p, hash, 12, broken, 0.8); }) == Errc::DecryptFail);
  CHECK_FALSE(vx.accept(*p, hash, 13, body, 2.5).has_value());
  CHECK(vx.outstanding() == 0);
}

TEST_CASE("temporary vote keys differ from request to request") {
  auto p = crypto::make_provider("real");
  Rng rng(2);
  VoteExchange vx;
  const Bytes a = vx.open(*p, rng, 0.0, 1.0).tpk.public_key;
  const Bytes b = vx.open(*p, rng, 0.0, 1.0).tpk.public_key;
  CHECK(a != b);
  CHECK(vx.outstanding() == 2);
}
