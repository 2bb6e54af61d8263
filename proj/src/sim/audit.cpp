#include <algorithm>
#include <istream>
#include <sstream>

#include "anap/sim.hpp"

namespace anap::sim {
namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::MalformedTrace, what); }

std::string phase_name(int phase) {
  switch (phase) {
    case 1: return "Phase I";
    case 2: return "Phase II";
    case 3: return "Phase III";
    case 4: return "Data";
    case 5: return "Maintenance";
    case 6: return "Votes";
    default: return "Link";
  }
}

}  // namespace

AuditReport audit_anonymity(const std::vector<AuditFrame>& frames, const std::vector<Secret>& secrets) {
  AuditReport r;
  r.frames = frames.size();
  for (const auto& f : frames) {
    r.lengths.insert(f.octets.size());
    for (const auto& s : secrets) {
      if (s.octets.empty()) continue;
      auto it = std::search(f.octets.begin(), f.octets.end(), s.octets.begin(), s.octets.end());
      if (it == f.octets.end()) continue;
      r.violations.push_back(Violation{f.index, f.t, f.sender, f.type, s.kind, s.owner,
                                       static_cast<std::size_t>(it - f.octets.begin())});
    }
  }
  return r;
}

Json secrets_to_json(const std::vector<Secret>& secrets) {
  Json arr = Json::array();
  for (const auto& s : secrets) arr.push_back({{"kind", s.kind}, {"owner", s.owner}, {"hex", to_hex(s.octets)}});
  return Json{{"secrets", std::move(arr)}};
}

std::vector<Secret> secrets_from_json(const nlohmann::json& j) {
  std::vector<Secret> out;
  try {
    for (const auto& s : j.at("secrets")) {
      out.push_back(Secret{s.at("kind").get<std::string>(), s.at("owner").get<std::string>(),
                           from_hex(s.at("hex").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("secrets file: ") + e.what());
  } catch (const Error& e) {
    malformed(std::string("secrets file: ") + e.what());
  }
  return out;
}

std::vector<Json> parse_trace(std::istream& in) {
  std::vector<Json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception&) {
      malformed("line " + std::to_string(lineno) + " is not a JSON record");
    }
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() || !j.contains("t")) {
      malformed("line " + std::to_string(lineno) + " lacks kind/t");
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<AuditFrame> frames_from_trace(const std::vector<Json>& records) {
  std::vector<AuditFrame> out;
  std::size_t index = 0;
  for (const auto& r : records) {
    if (r["kind"] != "tx") continue;
    try {
      out.push_back(AuditFrame{index, r.at("t").get<double>(), r.at("sender").get<std::string>(),
                               r.at("type").get<std::string>(), from_hex(r.at("hex").get<std::string>())});
    } catch (const Json::exception& e) {
      malformed(std::string("tx record: ") + e.what());
    } catch (const Error& e) {
      malformed(std::string("tx record: ") + e.what());
    }
    ++index;
  }
  return out;
}

std::vector<std::string> explain(const std::vector<Json>& records, const std::string& session) {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (r["kind"] != "ev") continue;
    if (!r.contains("sess") || r["sess"] != session) continue;
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(6);
    try {
      line << "t=" << r.at("t").get<double>() << "  " << r.at("node").get<std::string>() << "  "
           << phase_name(r.at("phase").get<int>()) << " step " << r.at("step").get<std::string>() << ": "
           << r.at("what").get<std::string>();
    } catch (const Json::exception& e) {
      malformed(std::string("event record: ") + e.what());
    }
    out.push_back(line.str());
  }
  return out;
}

}  // namespace anap::sim
