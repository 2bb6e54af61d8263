#include <doctest.h>

#include "anap/crypto.hpp"

using namespace anap;
using namespace anap::crypto;

namespace {

// Digests of the octets "D1", computed once with Python's hashlib
// (sha256 and blake2b with digest_size=16) and frozen here.
constexpr const char* kRealD1 = "33a123e5d474e8f3495a7c304f17184276715204ccb2887317f37bcb216b4681";
constexpr const char* kDeskD1 = "5119c623314bbabd3eb9a4405b4a7123";

const char* kProviders[] = {"desk", "real"};

}  // namespace

TEST_CASE("hash is deterministic, fixed length and matches the frozen golden values") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    auto a = p->hash(to_bytes("D1"));
    auto b = p->hash(to_bytes("D1"));
    CHECK(a == b);
    CHECK(a.bytes.size() == p->info().digest_len);
    Bytes ext = to_bytes("D1");
    ext.push_back(0);
    CHECK(p->hash(ext) != a);
    CHECK(to_hex(a.bytes) == (std::string_view(name) == "real" ? kRealD1 : kDeskD1));
  }
}

TEST_CASE("unknown provider name is rejected") {
  CHECK_THROWS_AS(make_provider("rot13"), std::invalid_argument);
}

TEST_CASE("asymmetric encryption round-trips and rejects the wrong key") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(7);
    auto kp = p->generate_keypair(rng);
    auto other = p->generate_keypair(rng);
    for (std::size_t len : {0u, 1u, 63u, 300u, 1000u}) {
      Bytes m = rng.bytes(len);
      Bytes c = p->asym_encrypt(kp.public_key, m, rng);
      CHECK(c.size() == m.size() + p->info().asym_overhead);
      CHECK(p->asym_decrypt(kp.secret_key, c) == m);
      try {
        p->asym_decrypt(other.secret_key, c);
        FAIL("decrypt under a foreign key succeeded");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::WrongKey);
      }
    }
    Bytes c = p->asym_encrypt(kp.public_key, to_bytes("payload"), rng);
    c[c.size() / 2] ^= 0x01;
    CHECK_THROWS_AS(p->asym_decrypt(kp.secret_key, c), Error);
  }
}

TEST_CASE("asymmetric encryption enforces the plaintext ceiling") {
  auto p = make_provider("desk");
  Rng rng(1);
  auto kp = p->generate_keypair(rng);
  Bytes big(p->info().max_plaintext + 1);
  try {
    p->asym_encrypt(kp.public_key, big, rng);
    FAIL("oversize plaintext accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Oversize);
  }
}

TEST_CASE("signatures verify only for the exact message and key") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(11);
    auto kp = p->generate_keypair(rng);
    auto other = p->generate_keypair(rng);
    Bytes m = to_bytes("M_S bytes");
    Bytes sig = p->sign(kp.secret_key, m);
    CHECK(sig.size() == p->info().signature_len);
    CHECK(p->verify(kp.public_key, m, sig));
    Bytes m2 = m;
    m2.push_back(1);
    CHECK_FALSE(p->verify(kp.public_key, m2, sig));
    CHECK_FALSE(p->verify(other.public_key, m, sig));
    CHECK_FALSE(p->verify(kp.public_key, m, Bytes{1, 2, 3}));
    CHECK_FALSE(p->verify(Bytes{}, m, sig));
  }
}

TEST_CASE("signature soundness under single-bit mutation") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(3);
    auto kp = p->generate_keypair(rng);
    for (int trial = 0; trial < 200; ++trial) {
      Bytes m = rng.bytes(1 + rng.below(80));
      Bytes sig = p->sign(kp.secret_key, m);
      REQUIRE(p->verify(kp.public_key, m, sig));
      Bytes mm = m, ms = sig, mk = kp.public_key;
      mm[rng.below(mm.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
      ms[rng.below(ms.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
      mk[rng.below(mk.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
      CHECK_FALSE(p->verify(kp.public_key, mm, sig));
      CHECK_FALSE(p->verify(kp.public_key, m, ms));
      CHECK_FALSE(p->verify(mk, m, sig));
    }
  }
}

TEST_CASE("symmetric encryption round-trips over 1000 random cases and detects tampering") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      SymKey k = p->generate_session_key(rng);
      Bytes m = rng.bytes(rng.below(400));
      Bytes c = p->sym_encrypt(k, m, rng);
      CHECK(c.size() == m.size() + p->info().sym_overhead);
      REQUIRE(p->sym_decrypt(k, c) == m);
      c[rng.below(c.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
      CHECK_THROWS_AS(p->sym_decrypt(k, c), Error);
    }
  }
}

TEST_CASE("unidirectional link keys never decrypt the reverse direction") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(9);
    SymKey k_ab = p->generate_session_key(rng);
    SymKey k_ba = p->generate_session_key(rng);
    Bytes c = p->sym_encrypt(k_ab, to_bytes("frame A->B"), rng);
    try {
      p->sym_decrypt(k_ba, c);
      FAIL("reverse key decrypted");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DecryptFail);
    }
  }
}

TEST_CASE("asymmetric round-trip over 1000 random payloads") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(17);
    auto kp = p->generate_keypair(rng);
    for (int trial = 0; trial < 1000; ++trial) {
      Bytes m = rng.bytes(rng.below(300));
      REQUIRE(p->asym_decrypt(kp.secret_key, p->asym_encrypt(kp.public_key, m, rng)) == m);
    }
  }
}

TEST_CASE("session keys are fresh, sized and seed-determined") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng a(42), b(42);
    SymKey k1 = p->generate_session_key(a);
    SymKey k2 = p->generate_session_key(a);
    CHECK(k1.bytes.size() == p->info().sym_key_len);
    CHECK(k1.bytes != k2.bytes);
    CHECK(k1.key_id != k2.key_id);
    CHECK(p->generate_session_key(b) == k1);
  }
}

TEST_CASE("key transport agrees on a fresh key that never appears in the exchange frames") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(23);
    SymKey prev;
    for (int trial = 0; trial < 100; ++trial) {
      auto t = seck_exchange(*p, rng);
      CHECK(t.initiator_key == t.responder_key);
      CHECK_FALSE(contains(t.offer_frame, t.initiator_key.bytes));
      CHECK_FALSE(contains(t.reply_frame, t.initiator_key.bytes));
      CHECK_FALSE(contains(t.wrapped_key, t.initiator_key.bytes));
      CHECK(t.initiator_key.bytes != prev.bytes);
      CHECK(t.initiator_key.key_id != prev.key_id);
      prev = t.initiator_key;
    }
  }
}

TEST_CASE("key transport rejects mismatched and degenerate replies") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    Rng rng(29);
    auto init = SeckInitiator::start(*p, rng);
    auto acc = seck_accept(*p, init.offer(), rng);
    SeckReply wrong = acc.reply;
    wrong.xid ^= 1;
    try {
      init.finish(*p, wrong);
      FAIL("mismatched exchange id accepted");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MalformedExchange);
    }
    SeckReply degenerate{init.offer().xid, Bytes(init.offer().ephemeral.size(), 0)};
    try {
      init.finish(*p, degenerate);
      FAIL("degenerate reply accepted");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MalformedExchange);
    }
    // a wrapped key produced under a different exchange does not unwrap
    auto init2 = SeckInitiator::start(*p, rng);
    auto acc2 = seck_accept(*p, init2.offer(), rng);
    SymKey link = p->generate_session_key(rng);
    Bytes wrapped = seck_wrap(*p, init.finish(*p, acc.reply), link, rng);
    CHECK_THROWS_AS(seck_unwrap(*p, acc2.wrapping_key, wrapped), Error);
    CHECK(seck_unwrap(*p, acc.wrapping_key, wrapped) == link);
  }
}

TEST_CASE("a full transcript is bit-identical when replayed from the same seed") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = make_provider(name);
    auto run = [&] {
      Rng rng(99);
      Bytes out;
      auto kp = p->generate_keypair(rng);
      auto append = [&](const Bytes& b) { out.insert(out.end(), b.begin(), b.end()); };
      append(p->asym_encrypt(kp.public_key, to_bytes("hello"), rng));
      append(p->sign(kp.secret_key, to_bytes("hello")));
      auto t = seck_exchange(*p, rng);
      append(t.offer_frame);
      append(t.reply_frame);
      append(t.wrapped_key);
      append(p->sym_encrypt(t.initiator_key, to_bytes("data"), rng));
      return out;
    };
    CHECK(run() == run());
  }
}
