#pragma once

#include <compare>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace anap {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Link-layer node identifier (public, independent of any pseudonym).
using NodeId = std::uint32_t;

enum class Errc {
  WrongKey,
  Oversize,
  DecryptFail,
  ExchangeTimeout,
  MalformedExchange,
  DuplicatePseudonym,
  UnknownRecipient,
  UnknownPseudonym,
  MalformedFrame,
  UnknownDestination,
  BadSignature,
  NoReversePath,
  DuplicateReply,
  StaleISeq,
  NoForwardPath,
  SessionNotAuthenticated,
  ReplayedISeq,
  PathUnrecoverable,
  DomainError,
  UnknownEventClass,
  UnknownSeq,
  DuplicateResponder,
  ScenarioInvalid,
  MalformedTrace,
  IOFailure,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

Bytes to_bytes(std::string_view s);
std::string to_hex(ByteView b);
Bytes from_hex(std::string_view hex);

Bytes concat(std::initializer_list<ByteView> parts);

/// True if `needle` occurs as a contiguous run inside `haystack`.
bool contains(ByteView haystack, ByteView needle);

/// Big-endian field writer used by every encoder in the project.
class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
  /// u8 length prefix
  void bytes8(ByteView b);
  /// u16 length prefix
  void bytes16(ByteView b);

  std::size_t size() const { return out_.size(); }
  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

/// Bounds-checked reader; every short read throws MalformedFrame.
class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  Bytes raw(std::size_t n);
  Bytes bytes8();
  Bytes bytes16();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }
  void expect_done() const;

 private:
  void need(std::size_t n) const;

  ByteView in_;
  std::size_t pos_ = 0;
};

/// Deterministic random source. Wraps mt19937_64 (whose output sequence is
/// fixed by the standard) and avoids std distributions, whose algorithms are
/// implementation-defined, so traces stay bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  Bytes bytes(std::size_t n);
  void fill(std::span<std::uint8_t> out);

 private:
  std::mt19937_64 engine_;
};

}  // namespace anap
