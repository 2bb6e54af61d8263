#include <cmath>
#include <fstream>

#include "anap/sim.hpp"

namespace anap::sim {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::ScenarioInvalid, what); }

double num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) invalid(std::string("'") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid(std::string("'") + key + "' must be finite");
  return d;
}

std::string str(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) invalid(std::string("missing string '") + key + "'");
  return j.at(key).get<std::string>();
}

std::size_t count(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    invalid(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

bool flag(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) invalid(std::string("'") + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

wire::FrameType frame_type(const std::string& s) {
  static const std::map<std::string, wire::FrameType> kTypes{
      {"REQ", wire::FrameType::REQ},     {"REP", wire::FrameType::REP},   {"ACK", wire::FrameType::ACK},
      {"ERR", wire::FrameType::ERR},     {"REQV", wire::FrameType::REQV}, {"REPV", wire::FrameType::REPV},
      {"DATA", wire::FrameType::DATA},   {"SECK1", wire::FrameType::SECK1},
      {"SECK2", wire::FrameType::SECK2}};
  auto it = kTypes.find(s);
  if (it == kTypes.end()) invalid("unknown frame type '" + s + "'");
  return it->second;
}

std::set<wire::FrameType> frame_types(const json& j) {
  if (!j.is_array()) invalid("frame type list must be an array");
  std::set<wire::FrameType> out;
  for (const auto& t : j) {
    if (!t.is_string()) invalid("frame type must be a string");
    out.insert(frame_type(t.get<std::string>()));
  }
  return out;
}

double probability(const json& j, const char* key) {
  const double p = num(j, key, 0.0);
  if (p < 0.0 || p > 1.0) invalid(std::string("'") + key + "' must lie in [0,1]");
  return p;
}

double non_negative(const json& j, const char* key, double fallback) {
  const double v = num(j, key, fallback);
  if (v < 0.0) invalid(std::string("'") + key + "' must be >= 0");
  return v;
}

double positive(const json& j, const char* key, double fallback) {
  const double v = num(j, key, fallback);
  if (!(v > 0.0)) invalid(std::string("'") + key + "' must be > 0");
  return v;
}

node::ProtocolParams protocol_params(const json& j, node::ProtocolParams p) {
  if (!j.is_object()) invalid("'protocol' must be an object");
  static const std::set<std::string> kKnown{
      "rt_timeout",       "ft_timeout",        "maintenance_wait", "handshake_timeout",
      "seck_timeout",     "watchdog_timeout",  "delay_threshold",  "sweep_interval",
      "vote_timeout",     "reply_window",      "max_paths",        "overhear_intermediates",
      "pseudonym_hints",  "plant_leak"};
  for (const auto& [k, v] : j.items()) {
    if (!kKnown.count(k)) invalid("unknown protocol parameter '" + k + "'");
  }
  p.rt_timeout = positive(j, "rt_timeout", p.rt_timeout);
  p.ft_timeout = positive(j, "ft_timeout", p.ft_timeout);
  p.maintenance_wait = positive(j, "maintenance_wait", p.maintenance_wait);
  p.handshake_timeout = positive(j, "handshake_timeout", p.handshake_timeout);
  p.seck_timeout = positive(j, "seck_timeout", p.seck_timeout);
  p.watchdog_timeout = positive(j, "watchdog_timeout", p.watchdog_timeout);
  p.delay_threshold = positive(j, "delay_threshold", p.delay_threshold);
  p.sweep_interval = positive(j, "sweep_interval", p.sweep_interval);
  p.vote_timeout = positive(j, "vote_timeout", p.vote_timeout);
  p.reply_window = non_negative(j, "reply_window", p.reply_window);
  p.max_paths = count(j, "max_paths", p.max_paths);
  if (p.max_paths == 0) invalid("'max_paths' must be at least 1");
  p.overhear_intermediates = flag(j, "overhear_intermediates", p.overhear_intermediates);
  p.pseudonym_hints = flag(j, "pseudonym_hints", p.pseudonym_hints);
  p.plant_leak = flag(j, "plant_leak", p.plant_leak);
  return p;
}

}  // namespace

Scenario parse_scenario(const json& j) {
  if (!j.is_object()) invalid("scenario must be a JSON object");
  Scenario sc;
  if (j.contains("provider")) sc.provider = str(j, "provider");
  std::unique_ptr<crypto::Provider> provider;
  try {
    provider = crypto::make_provider(sc.provider);
  } catch (const std::invalid_argument&) {
    invalid("unknown crypto provider '" + sc.provider + "'");
  }

  sc.protocol.frame_size = count(j, "frame_size", sc.protocol.frame_size);
  const std::size_t min_size = wire::min_frame_size(provider->info());
  if (sc.protocol.frame_size < min_size) {
    invalid("frame_size " + std::to_string(sc.protocol.frame_size) + " is below the minimum " +
            std::to_string(min_size) + " for provider " + sc.provider);
  }
  if (sc.protocol.frame_size > 65535) invalid("frame_size exceeds 65535");
  if (j.contains("protocol")) sc.protocol = protocol_params(j.at("protocol"), sc.protocol);

  if (j.contains("reputation")) {
    const auto& r = j.at("reputation");
    if (!r.is_object()) invalid("'reputation' must be an object");
    sc.reputation.rho = num(r, "rho", sc.reputation.rho);
    sc.reputation.alpha = num(r, "alpha", sc.reputation.alpha);
    sc.reputation.beta = num(r, "beta", sc.reputation.beta);
    sc.reputation.gamma = num(r, "gamma", sc.reputation.gamma);
    try {
      rep::validate(sc.reputation);
    } catch (const Error& e) {
      invalid(e.what());
    }
  }
  if (j.contains("scoring")) {
    const auto& s = j.at("scoring");
    if (!s.is_object()) invalid("'scoring' must be an object");
    for (const auto& [k, v] : s.items()) {
      if (!v.is_number()) invalid("scoring value for '" + k + "' must be a number");
      const double d = v.get<double>();
      if (!(d >= -1.0 && d <= 1.0)) invalid("scoring value for '" + k + "' must lie in [-1,1]");
      sc.scoring[k] = d;
    }
  }
  sc.vote_interval = non_negative(j, "vote_interval", 0.0);
  sc.end_time = positive(j, "end_time", sc.end_time);

  if (!j.contains("nodes") || !j.at("nodes").is_array() || j.at("nodes").empty()) {
    invalid("'nodes' must be a non-empty array");
  }
  std::set<std::string> names;
  std::set<std::string> explicit_names;
  for (const auto& n : j.at("nodes")) {
    if (!n.is_object()) invalid("node entry must be an object");
    NodeSpec ns;
    ns.name = str(n, "name");
    if (ns.name.empty() || ns.name.size() > 16) invalid("node name must be 1..16 characters");
    if (!names.insert(ns.name).second) invalid("duplicate node name '" + ns.name + "'");
    ns.x = num(n, "x", 0.0);
    ns.y = num(n, "y", 0.0);
    ns.range = positive(n, "range", ns.range);
    if (n.contains("pseudonyms")) {
      const auto& ps = n.at("pseudonyms");
      if (ps.is_array()) {
        for (const auto& p : ps) {
          if (!p.is_string()) invalid("pseudonym must be a string");
          const auto s = p.get<std::string>();
          if (s.empty() || s.size() > identity::kMaxPseudonymLen) invalid("pseudonym length out of range");
          if (!explicit_names.insert(s).second) invalid("pseudonym '" + s + "' used twice");
          ns.pseudonyms.push_back(s);
        }
        if (ns.pseudonyms.empty()) invalid("node '" + ns.name + "' needs at least one pseudonym");
      } else {
        ns.pseudonym_count = count(n, "pseudonyms", 3);
      }
    }
    if (ns.pseudonyms.empty() && (ns.pseudonym_count == 0 || ns.pseudonym_count > 16)) {
      invalid("pseudonym count must be 1..16");
    }
    if (n.contains("ui")) ns.ui = str(n, "ui");
    sc.nodes.push_back(std::move(ns));
  }
  auto known = [&](const std::string& name, const char* ctx) {
    if (!names.count(name)) invalid(std::string(ctx) + " names unknown node '" + name + "'");
  };

  if (j.contains("mobility")) {
    for (const auto& m : j.at("mobility")) {
      MoveSpec ms{non_negative(m, "at", 0.0), str(m, "node"), num(m, "x", 0.0), num(m, "y", 0.0)};
      known(ms.node, "mobility");
      sc.mobility.push_back(ms);
    }
  }
  if (j.contains("power_off")) {
    for (const auto& p : j.at("power_off")) {
      PowerOffSpec ps{non_negative(p, "at", 0.0), str(p, "node")};
      known(ps.node, "power_off");
      sc.power_off.push_back(ps);
    }
  }
  if (j.contains("adversaries")) {
    std::set<std::string> seen;
    for (const auto& a : j.at("adversaries")) {
      AdversarySpec as;
      as.node = str(a, "node");
      known(as.node, "adversary");
      if (!seen.insert(as.node).second) invalid("node '" + as.node + "' has two adversary profiles");
      as.drop = probability(a, "drop");
      as.tamper = probability(a, "tamper");
      if (a.contains("affects")) as.affects = frame_types(a.at("affects"));
      if (a.contains("replay")) {
        const auto& r = a.at("replay");
        ReplaySpec rs;
        rs.delay = positive(r, "delay", rs.delay);
        rs.count = count(r, "count", rs.count);
        if (!r.contains("types")) invalid("replay needs 'types'");
        rs.types = frame_types(r.at("types"));
        as.replay = rs;
      }
      if (a.contains("discredit")) {
        const auto& d = a.at("discredit");
        DiscreditSpec ds{str(d, "target"), num(d, "value", -1.0)};
        known(ds.target, "discredit");
        if (ds.value < -1.0 || ds.value > 1.0) invalid("discredit value must lie in [-1,1]");
        as.discredit = ds;
      }
      as.duplicate_req = flag(a, "duplicate_req", false);
      sc.adversaries.push_back(std::move(as));
    }
  }
  if (j.contains("intents")) {
    for (const auto& i : j.at("intents")) {
      IntentSpec is;
      const auto type = str(i, "type");
      if (type == "handshake") {
        is.kind = IntentKind::Handshake;
      } else if (type == "data") {
        is.kind = IntentKind::Data;
      } else if (type == "votes") {
        is.kind = IntentKind::Votes;
      } else {
        invalid("unknown intent type '" + type + "'");
      }
      is.at = non_negative(i, "at", 0.0);
      is.from = str(i, "from");
      known(is.from, "intent");
      if (is.kind != IntentKind::Votes) is.to = str(i, "to");
      if (is.kind == IntentKind::Data) {
        is.payload = i.contains("payload") ? str(i, "payload") : std::string("data");
        if (is.payload.size() > wire::kMaxDataPayload) invalid("data payload too large");
      }
      is.repeat = count(i, "repeat", 1);
      if (is.repeat == 0) invalid("'repeat' must be at least 1");
      is.interval = positive(i, "interval", 1.0);
      sc.intents.push_back(std::move(is));
    }
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IOFailure, "cannot open scenario " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    invalid(std::string("scenario is not valid JSON: ") + e.what());
  }
  try {
    return parse_scenario(j);
  } catch (const json::exception& e) {
    invalid(std::string("scenario has a wrongly typed field: ") + e.what());
  }
}

}  // namespace anap::sim
