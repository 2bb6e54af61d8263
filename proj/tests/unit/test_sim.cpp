#include <doctest.h>

#include <functional>
#include <sstream>

#include "anap/sim.hpp"

using namespace anap;
using namespace anap::sim;

namespace {

Json line_scenario() {
  return Json::parse(R"({
    "provider": "desk",
    "end_time": 3,
    "nodes": [
      {"name": "S", "x": 0,   "y": 0, "range": 120},
      {"name": "A", "x": 100, "y": 0, "range": 120},
      {"name": "B", "x": 200, "y": 0, "range": 120},
      {"name": "C", "x": 300, "y": 0, "range": 120},
      {"name": "D", "x": 400, "y": 0, "range": 120}
    ],
    "intents": [
      {"type": "handshake", "at": 0.1, "from": "S", "to": "D1"},
      {"type": "data", "at": 1.0, "from": "S", "to": "D1", "payload": "hello D"}
    ]
  })");
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

Errc invalid_after(const std::function<void(Json&)>& edit) {
  Json j = line_scenario();
  edit(j);
  return code_of([&] { parse_scenario(j); });
}

std::size_t entries_for(const node::Node& n, const Bytes& id) {
  std::size_t c = 0;
  for (const auto& e : n.ft()) c += (e.path_id == id);
  return c;
}

}  // namespace

TEST_CASE("path selection ranks by first-hop SR and skips busy hops") {
  using node::ReplyCandidate;
  std::vector<ReplyCandidate> two{{4, 0.2, {}}, {7, 0.8, {}}};
  CHECK(node::select_paths(two, 1, {}) == std::vector<std::size_t>{1});
  CHECK(node::select_paths(two, 2, {}) == std::vector<std::size_t>{1, 0});
  CHECK(node::select_paths(two, 1, {7}) == std::vector<std::size_t>{0});
  CHECK(node::select_paths(two, 1, {4, 7}).empty());
  CHECK(node::select_paths({{3, -0.5, {}}}, 1, {}) == std::vector<std::size_t>{0});
  std::vector<ReplyCandidate> tie{{9, 0.5, {}}, {2, 0.5, {}}};
  CHECK(node::select_paths(tie, 1, {}) == std::vector<std::size_t>{1});
  std::vector<ReplyCandidate> same_hop{{5, 0.9, {}}, {5, 0.1, {}}};
  CHECK(node::select_paths(same_hop, 2, {}) == std::vector<std::size_t>{0});
}

TEST_CASE("session labels use the first four R_ID octets and the sequence number") {
  const Bytes r{0xde, 0xad, 0xbe, 0xef, 0x01, 0x02};
  CHECK(node::session_label(r, 12) == "deadbeef:12");
}

TEST_CASE("scenario validation rejects malformed input") {
  CHECK_NOTHROW(parse_scenario(line_scenario()));
  CHECK(invalid_after([](Json& j) { j.erase("nodes"); }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["nodes"][1]["name"] = "S"; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["nodes"][1]["name"] = ""; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["protocol"] = {{"rt_timout", 3}}; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["protocol"] = {{"rt_timeout", -3}}; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["reputation"] = {{"rho", 1.5}}; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["scoring"] = {{"drop", -2}}; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["frame_size"] = 64; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["provider"] = "rot13"; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["intents"][0]["from"] = "Q"; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["intents"][0]["type"] = "teleport"; }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) {
          j["adversaries"] = Json::array({{{"node", "A"}, {"drop", 1.5}}});
        }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) {
          j["adversaries"] = Json::array({{{"node", "A"}, {"affects", Json::array({"NOPE"})}}});
        }) == Errc::ScenarioInvalid);
  CHECK(invalid_after([](Json& j) { j["mobility"] = Json::array({{{"at", 1}, {"node", "Z"}}}); }) ==
        Errc::ScenarioInvalid);
}

TEST_CASE("loading a missing scenario file is an IO failure") {
  CHECK(code_of([] { load_scenario("/nonexistent/scenario.json"); }) == Errc::IOFailure);
}

TEST_CASE("line topology handshake: both ends authenticated with one session key") {
  Simulator s(parse_scenario(line_scenario()), 1);
  s.run();
  REQUIRE(s.handshakes().size() == 1);
  const auto& h = s.handshakes()[0];
  REQUIRE(s.handshake_succeeded(h));
  const auto* at_s = s.node("S").find_session(h.label);
  const auto* at_d = s.node("D").find_session(h.label);
  REQUIRE(at_s);
  REQUIRE(at_d);
  CHECK(at_s->authenticated);
  CHECK(at_d->authenticated);
  CHECK(at_s->k_ses == at_d->k_ses);
  CHECK(at_s->initiator);
  CHECK_FALSE(at_d->initiator);

  auto p = crypto::make_provider("desk");
  CHECK(at_s->r_id == p->hash(s.pseudonym("D1")).bytes);
  const auto& rq = s.node("S").rqt();
  REQUIRE(rq.count({at_s->r_id, at_s->seq}) == 1);
  CHECK(rq.at({at_s->r_id, at_s->seq}).reply);

  for (const char* mid : {"A", "B", "C"}) {
    CAPTURE(mid);
    CHECK(entries_for(s.node(mid), at_s->r_id) == 1);
    CHECK(entries_for(s.node(mid), at_s->f_id) == 1);
  }

  const auto m = s.metrics();
  CHECK(m.data_delivered == 1);
  CHECK(m.audit.ok());
  CHECK(m.frames_by_type.at("REQ") <= 5);
}

TEST_CASE("intermediate forward entries carry keys on both sides and endpoints have a null cell") {
  Simulator s(parse_scenario(line_scenario()), 2);
  s.run();
  const auto* ses = s.node("S").find_session(s.handshakes().at(0).label);
  REQUIRE(ses);
  for (const char* mid : {"A", "B", "C"}) {
    for (const auto& e : s.node(mid).ft()) {
      if (e.path_id != ses->r_id && e.path_id != ses->f_id) continue;
      CHECK(e.k_from.has_value());
      CHECK(e.k_to.has_value());
    }
  }
  bool s_null = false;
  for (const auto& e : s.node("S").ft()) {
    if (e.path_id == ses->r_id || e.path_id == ses->f_id) s_null |= !e.k_from.has_value() || !e.k_to.has_value();
  }
  CHECK(s_null);
}

TEST_CASE("reverse entries expire strictly after their timeout") {
  Json j = line_scenario();
  j["protocol"] = {{"rt_timeout", 5}};
  Simulator s(parse_scenario(j), 3);
  s.run_until(1.0);
  auto& a = s.node("A");
  REQUIRE(a.rt().size() == 1);
  const double inserted = a.rt().begin()->second.inserted_at;
  CHECK(a.timer_sweep(inserted + 4.0) == 0);
  CHECK(a.rt().size() == 1);
  CHECK(a.timer_sweep(inserted + 6.0) >= 1);
  CHECK(a.rt().empty());
}

TEST_CASE("sending on an unknown or unauthenticated session is refused") {
  Simulator s(parse_scenario(line_scenario()), 4);
  s.run_until(0.1001);
  auto& n = s.node("S");
  CHECK(code_of([&] { n.send_data("00000000:1", to_bytes("x")); }) == Errc::SessionNotAuthenticated);
  CHECK(code_of([&] { n.originate_request(to_bytes("nobody")); }) == Errc::UnknownDestination);
}

TEST_CASE("same seed gives byte-identical traces and a different seed does not") {
  const auto sc = parse_scenario(line_scenario());
  Simulator a(sc, 42), b(sc, 42), c(sc, 43);
  a.run();
  b.run();
  c.run();
  CHECK(a.trace_jsonl() == b.trace_jsonl());
  CHECK(a.reputation_tsv() == b.reputation_tsv());
  CHECK(a.trace_jsonl() != c.trace_jsonl());
}

TEST_CASE("trace round-trips through the parser and explain narrates all three phases") {
  Simulator s(parse_scenario(line_scenario()), 5);
  s.run();
  std::istringstream in(s.trace_jsonl());
  const auto records = parse_trace(in);
  CHECK(records.size() == s.trace().size());
  const auto frames = frames_from_trace(records);
  CHECK(frames.size() == s.transmissions().size());
  CHECK(audit_anonymity(frames, s.secrets()).ok());

  const auto lines = explain(records, s.handshakes().at(0).label);
  auto has = [&](const char* needle) {
    return std::any_of(lines.begin(), lines.end(), [&](const std::string& l) { return l.find(needle) != std::string::npos; });
  };
  CHECK(has("Phase I "));
  CHECK(has("Phase II "));
  CHECK(has("Phase III "));
  CHECK(explain(records, "ffffffff:9").empty());
}

TEST_CASE("malformed trace input is rejected") {
  std::istringstream bad_json("{\"kind\":\"tx\",\"t\":0}\n{\"kind\":");
  CHECK(code_of([&] { parse_trace(bad_json); }) == Errc::MalformedTrace);
  std::istringstream no_kind("{\"t\":0}\n");
  CHECK(code_of([&] { parse_trace(no_kind); }) == Errc::MalformedTrace);
  std::vector<Json> recs{Json{{"kind", "tx"}, {"t", 0.0}, {"sender", "S"}, {"type", "REQ"}, {"hex", "zz"}}};
  CHECK(code_of([&] { frames_from_trace(recs); }) == Errc::MalformedTrace);
}

TEST_CASE("audit finds planted secrets and length variation") {
  std::vector<AuditFrame> frames{{0, 0.0, "S", "REQ", to_bytes("....S1-pseudo....")},
                                 {1, 0.1, "A", "REQ", to_bytes("......")}};
  std::vector<Secret> secrets{{"pseudonym", "S", to_bytes("S1-pseudo")}};
  const auto r = audit_anonymity(frames, secrets);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].offset == 4);
  CHECK(r.violations[0].owner == "S");
  CHECK_FALSE(r.constant_length());
  CHECK_FALSE(r.ok());
  const auto round = secrets_from_json(secrets_to_json(secrets));
  REQUIRE(round.size() == 1);
  CHECK(round[0].octets == secrets[0].octets);
}

TEST_CASE("the leak control plants the source pseudonym on the air") {
  Json j = line_scenario();
  j["protocol"] = {{"plant_leak", true}};
  Simulator s(parse_scenario(j), 6);
  s.run();
  const auto m = s.metrics();
  CHECK_FALSE(m.audit.violations.empty());
}

TEST_CASE("summary carries the schema version and the frame totals") {
  Simulator s(parse_scenario(line_scenario()), 7);
  s.run();
  const auto sum = s.summary(7);
  CHECK(sum["schema_version"] == 1);
  CHECK(sum["frames"]["total"].get<std::size_t>() == s.transmissions().size());
  CHECK(s.reputation_tsv().rfind("t\tobserver\tsubject\toe\tsr\tir\tcause\n", 0) == 0);
}
