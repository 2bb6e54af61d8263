#include "anap/common.hpp"

#include <bit>
#include <cstring>

namespace anap {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::WrongKey: return "WrongKey";
    case Errc::Oversize: return "Oversize";
    case Errc::DecryptFail: return "DecryptFail";
    case Errc::ExchangeTimeout: return "ExchangeTimeout";
    case Errc::MalformedExchange: return "MalformedExchange";
    case Errc::DuplicatePseudonym: return "DuplicatePseudonym";
    case Errc::UnknownRecipient: return "UnknownRecipient";
    case Errc::UnknownPseudonym: return "UnknownPseudonym";
    case Errc::MalformedFrame: return "MalformedFrame";
    case Errc::UnknownDestination: return "UnknownDestination";
    case Errc::BadSignature: return "BadSignature";
    case Errc::NoReversePath: return "NoReversePath";
    case Errc::DuplicateReply: return "DuplicateReply";
    case Errc::StaleISeq: return "StaleISeq";
    case Errc::NoForwardPath: return "NoForwardPath";
    case Errc::SessionNotAuthenticated: return "SessionNotAuthenticated";
    case Errc::ReplayedISeq: return "ReplayedISeq";
    case Errc::PathUnrecoverable: return "PathUnrecoverable";
    case Errc::DomainError: return "DomainError";
    case Errc::UnknownEventClass: return "UnknownEventClass";
    case Errc::UnknownSeq: return "UnknownSeq";
    case Errc::DuplicateResponder: return "DuplicateResponder";
    case Errc::ScenarioInvalid: return "ScenarioInvalid";
    case Errc::MalformedTrace: return "MalformedTrace";
    case Errc::IOFailure: return "IOFailure";
  }
  return "Unknown";
}

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_hex(ByteView b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (auto c : b) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xf]);
  }
  return out;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::MalformedFrame, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::MalformedFrame, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

Bytes concat(std::initializer_list<ByteView> parts) {
  Bytes out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

bool contains(ByteView haystack, ByteView needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    if (haystack[i] == needle[0] &&
        std::memcmp(haystack.data() + i, needle.data(), needle.size()) == 0) {
      return true;
    }
  }
  return false;
}

void Writer::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v >> 8));
  u8(static_cast<std::uint8_t>(v));
}

void Writer::u32(std::uint32_t v) {
  u16(static_cast<std::uint16_t>(v >> 16));
  u16(static_cast<std::uint16_t>(v));
}

void Writer::u64(std::uint64_t v) {
  u32(static_cast<std::uint32_t>(v >> 32));
  u32(static_cast<std::uint32_t>(v));
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::bytes8(ByteView b) {
  if (b.size() > 0xff) throw Error(Errc::Oversize, "field exceeds u8 length prefix");
  u8(static_cast<std::uint8_t>(b.size()));
  raw(b);
}

void Writer::bytes16(ByteView b) {
  if (b.size() > 0xffff) throw Error(Errc::Oversize, "field exceeds u16 length prefix");
  u16(static_cast<std::uint16_t>(b.size()));
  raw(b);
}

void Reader::need(std::size_t n) const {
  if (remaining() < n) throw Error(Errc::MalformedFrame, "truncated field");
}

std::uint8_t Reader::u8() {
  need(1);
  return in_[pos_++];
}

std::uint16_t Reader::u16() {
  auto hi = u8();
  return static_cast<std::uint16_t>(hi << 8 | u8());
}

std::uint32_t Reader::u32() {
  std::uint32_t hi = u16();
  return hi << 16 | u16();
}

std::uint64_t Reader::u64() {
  std::uint64_t hi = u32();
  return hi << 32 | u32();
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

Bytes Reader::raw(std::size_t n) {
  need(n);
  Bytes out(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
            in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

Bytes Reader::bytes8() { return raw(u8()); }
Bytes Reader::bytes16() { return raw(u16()); }

void Reader::expect_done() const {
  if (!done()) throw Error(Errc::MalformedFrame, "trailing bytes");
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  // rejection sampling keeps the draw unbiased
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (;;) {
    auto v = next();
    if (v < limit) return v % n;
  }
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Bytes Rng::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

void Rng::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    auto v = next();
    for (int k = 0; k < 8 && i < out.size(); ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(v >> (8 * k));
    }
  }
}

}  // namespace anap
