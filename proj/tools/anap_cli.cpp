#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "anap/sim.hpp"

namespace fs = std::filesystem;
using namespace anap;

namespace {

constexpr int kOk = 0;
constexpr int kViolations = 1;
constexpr int kInvalid = 2;
constexpr int kIo = 3;
constexpr std::uint64_t kDefaultSeed = 1;

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::IOFailure, "cannot write " + p.string());
  out << content;
  if (!out) throw Error(Errc::IOFailure, "short write to " + p.string());
}

std::vector<sim::Json> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IOFailure, "cannot open trace " + path);
  return sim::parse_trace(in);
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::ScenarioInvalid:
    case Errc::MalformedTrace: return kInvalid;
    case Errc::IOFailure: return kIo;
    default: return kInvalid;
  }
}

int cmd_run(const std::string& scenario_path, std::uint64_t seed, std::string out_dir) {
  if (const char* env = std::getenv("ANAP_OUT_DIR"); env && *env) out_dir = env;
  sim::Scenario sc = sim::load_scenario(scenario_path);
  sim::Simulator s(std::move(sc), seed);
  s.run();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IOFailure, "cannot create " + out_dir + ": " + ec.message());
  const fs::path dir(out_dir);
  const auto summary = s.summary(seed);
  write_file(dir / "trace.jsonl", s.trace_jsonl());
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "reputation.tsv", s.reputation_tsv());
  write_file(dir / "secrets.json", sim::secrets_to_json(s.secrets()).dump(2) + "\n");
  const auto& h = summary["handshakes"];
  std::cout << "handshakes " << h["succeeded"] << "/" << h["attempted"] << "  frames "
            << summary["frames"]["total"] << "  data " << summary["data"]["delivered"] << "/"
            << summary["data"]["sent"] << "  audit " << (summary["audit"]["ok"].get<bool>() ? "ok" : "FAILED")
            << "\n";
  return kOk;
}

int cmd_audit(const std::string& trace_path, const std::string& secrets_path) {
  const auto records = read_trace(trace_path);
  std::ifstream in(secrets_path);
  if (!in) throw Error(Errc::IOFailure, "cannot open secrets " + secrets_path);
  nlohmann::json sj;
  try {
    sj = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedTrace, std::string("secrets file: ") + e.what());
  }
  const auto report = sim::audit_anonymity(sim::frames_from_trace(records), sim::secrets_from_json(sj));
  for (const auto& v : report.violations) {
    std::cout << "violation: frame " << v.index << " t=" << v.t << " " << v.type << " from " << v.sender
              << " contains " << v.secret_kind << " of " << v.owner << " at offset " << v.offset << "\n";
  }
  if (!report.constant_length()) {
    std::cout << "violation: frame lengths differ (" << report.lengths.size() << " distinct)\n";
  }
  std::cout << report.frames << " frames, " << report.violations.size() << " secret occurrences, "
            << (report.constant_length() ? "constant length" : "variable length") << "\n";
  return report.ok() ? kOk : kViolations;
}

int cmd_explain(const std::string& trace_path, const std::string& session) {
  for (const auto& line : sim::explain(read_trace(trace_path), session)) std::cout << line << "\n";
  return kOk;
}

int cmd_hexdump(const std::string& trace_path, std::size_t index) {
  const auto frames = sim::frames_from_trace(read_trace(trace_path));
  if (index >= frames.size()) throw Error(Errc::MalformedTrace, "no frame " + std::to_string(index));
  const auto& f = frames[index];
  std::cout << f.type << " from " << f.sender << " t=" << f.t << " (" << f.octets.size() << " octets)\n";
  for (std::size_t off = 0; off < f.octets.size(); off += 16) {
    const auto n = std::min<std::size_t>(16, f.octets.size() - off);
    std::cout << to_hex(ByteView(f.octets).subspan(off, n)) << "\n";
  }
  return kOk;
}

int cmd_dump_pl(const std::string& scenario_path, std::uint64_t seed) {
  sim::Simulator s(sim::load_scenario(scenario_path), seed);
  const auto& rows = s.node(s.name_of(0)).identity().directory.rows();
  for (const auto& b : rows) {
    std::cout << std::string(b.pseudonym.begin(), b.pseudonym.end()) << "\t" << to_hex(b.public_key) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anap: anonymous authentication protocol simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = "out";
  auto* run = app.add_subcommand("run", "run a scenario and write trace, summary, reputation series");
  run->add_option("--scenario", scenario, "scenario JSON file")->required();
  run->add_option("--seed", seed, "simulation seed");
  run->add_option("--out", out_dir, "output directory (ANAP_OUT_DIR overrides)");

  std::string trace;
  std::string secrets;
  auto* audit = app.add_subcommand("audit", "scan a trace for secret octets and length variation");
  audit->add_option("--trace", trace, "trace.jsonl")->required();
  audit->add_option("--secrets", secrets, "secrets.json")->required();

  std::string session;
  auto* explain = app.add_subcommand("explain", "narrate one session's protocol steps");
  explain->add_option("--trace", trace, "trace.jsonl")->required();
  explain->add_option("--session", session, "session label <rid8hex>:<seq>")->required();

  std::size_t frame = 0;
  auto* hexdump = app.add_subcommand("hexdump", "print one on-air frame");
  hexdump->add_option("--trace", trace, "trace.jsonl")->required();
  hexdump->add_option("--frame", frame, "frame index among tx records");

  auto* dump_pl = app.add_subcommand("dump-pl", "print the public list produced by a scenario's setup");
  dump_pl->add_option("--scenario", scenario, "scenario JSON file")->required();
  dump_pl->add_option("--seed", seed, "simulation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(scenario, seed, out_dir);
    if (*audit) return cmd_audit(trace, secrets);
    if (*explain) return cmd_explain(trace, session);
    if (*hexdump) return cmd_hexdump(trace, frame);
    if (*dump_pl) return cmd_dump_pl(scenario, seed);
  } catch (const Error& e) {
    std::cerr << "anap: " << e.what() << "\n";
    return exit_code(e);
  }
  return kOk;
}
