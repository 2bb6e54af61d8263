#include <doctest.h>

#include <functional>

#include "anap/identity.hpp"

using namespace anap;
using namespace anap::identity;

namespace {

const char* kProviders[] = {"desk", "real"};

struct User {
  Bytes ui;
  std::vector<OwnPseudonym> own;
};

User make_user(const crypto::Provider& p, Rng& rng, const std::string& ui,
               std::initializer_list<const char*> names) {
  std::vector<Bytes> ns;
  for (auto n : names) ns.push_back(to_bytes(n));
  return User{to_bytes(ui), generate_pseudonyms(p, rng, ns)};
}

Bytes registration_for(const crypto::Provider& p, Rng& rng, const TrustedAuthority& ta, const User& u) {
  std::vector<RegistrationEntry> reg;
  for (const auto& o : u.own) reg.push_back({o.pseudonym, o.keys.public_key});
  return p.asym_encrypt(ta.public_key(), encode_registration(reg), rng);
}

PseudonymBinding binding_of(const TrustedAuthority& ta, const OwnPseudonym& o) {
  for (const auto& b : ta.public_list()) {
    if (b.pseudonym == o.pseudonym) return b;
  }
  FAIL("pseudonym missing from the public list");
  return {};
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

}  // namespace

TEST_CASE("two users with two pseudonyms each both receive the full four-row public list") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = crypto::make_provider(name);
    Rng rng(11);
    TrustedAuthority ta(*p, rng);
    User x = make_user(*p, rng, "UI_x", {"X1", "X2"});
    User y = make_user(*p, rng, "UI_y", {"Y1", "Y2"});

    CHECK(ta.register_user(x.ui, registration_for(*p, rng, ta, x)) == 2);
    CHECK(ta.confidential_list().size() == 2);
    CHECK(ta.public_list().size() == 2);
    CHECK(ta.register_user(y.ui, registration_for(*p, rng, ta, y)) == 2);
    CHECK(ta.confidential_list().size() == 4);

    for (const User* u : {&x, &y}) {
      const auto& first = u->own.front();
      Bytes blob = ta.distribute_public_list(binding_of(ta, first), rng);
      auto pl = decode_public_list(p->asym_decrypt(first.keys.secret_key, blob));
      CHECK(pl == ta.public_list());
      REQUIRE(pl.size() == 4);
      for (const auto& b : pl) CHECK(verify_binding(*p, ta.public_key(), b));
    }
  }
}

TEST_CASE("empty registration accepts nothing and leaves the lists unchanged") {
  auto p = crypto::make_provider("desk");
  Rng rng(3);
  TrustedAuthority ta(*p, rng);
  Bytes enc = p->asym_encrypt(ta.public_key(), encode_registration({}), rng);
  CHECK(ta.register_user(to_bytes("UI_z"), enc) == 0);
  CHECK(ta.confidential_list().empty());
  CHECK(ta.public_list().empty());
}

TEST_CASE("re-registering a taken pseudonym is rejected as a whole request") {
  auto p = crypto::make_provider("desk");
  Rng rng(5);
  TrustedAuthority ta(*p, rng);
  User x = make_user(*p, rng, "UI_x", {"X1"});
  User y = make_user(*p, rng, "UI_y", {"Y1", "X1"});
  ta.register_user(x.ui, registration_for(*p, rng, ta, x));
  const auto before = ta.public_list();
  CHECK(code_of([&] { ta.register_user(y.ui, registration_for(*p, rng, ta, y)); }) ==
        Errc::DuplicatePseudonym);
  CHECK(ta.public_list() == before);

  User twice = make_user(*p, rng, "UI_w", {"W1", "W1"});
  CHECK(code_of([&] { ta.register_user(twice.ui, registration_for(*p, rng, ta, twice)); }) ==
        Errc::DuplicatePseudonym);
  CHECK(ta.public_list() == before);
}

TEST_CASE("registration not encrypted for the authority fails to decrypt") {
  auto p = crypto::make_provider("desk");
  Rng rng(6);
  TrustedAuthority ta(*p, rng);
  auto stranger = p->generate_keypair(rng);
  Bytes enc = p->asym_encrypt(stranger.public_key, encode_registration({}), rng);
  CHECK(code_of([&] { ta.register_user(to_bytes("UI"), enc); }) == Errc::DecryptFail);
}

TEST_CASE("deanonymize returns the owning identity and rejects unknown pseudonyms") {
  auto p = crypto::make_provider("desk");
  Rng rng(9);
  TrustedAuthority ta(*p, rng);
  User x = make_user(*p, rng, "UI_x", {"X1", "X2"});
  User y = make_user(*p, rng, "UI_y", {"Y1", "Y2"});
  ta.register_user(x.ui, registration_for(*p, rng, ta, x));
  ta.register_user(y.ui, registration_for(*p, rng, ta, y));
  CHECK(ta.deanonymize(to_bytes("X2")) == to_bytes("UI_x"));
  CHECK(ta.deanonymize(to_bytes("Y1")) == to_bytes("UI_y"));
  CHECK(code_of([&] { ta.deanonymize(to_bytes("Q9")); }) == Errc::UnknownPseudonym);
}

TEST_CASE("distribution to a binding outside the list is refused") {
  auto p = crypto::make_provider("desk");
  Rng rng(10);
  TrustedAuthority ta(*p, rng);
  User x = make_user(*p, rng, "UI_x", {"X1"});
  ta.register_user(x.ui, registration_for(*p, rng, ta, x));
  PseudonymBinding forged = binding_of(ta, x.own[0]);
  forged.pseudonym = to_bytes("X9");
  CHECK(code_of([&] { ta.distribute_public_list(forged, rng); }) == Errc::UnknownRecipient);
}

TEST_CASE("single-binding list decrypts to exactly that binding") {
  auto p = crypto::make_provider("real");
  Rng rng(12);
  TrustedAuthority ta(*p, rng);
  User x = make_user(*p, rng, "UI_x", {"X1"});
  ta.register_user(x.ui, registration_for(*p, rng, ta, x));
  auto b = binding_of(ta, x.own[0]);
  auto pl = decode_public_list(p->asym_decrypt(x.own[0].keys.secret_key, ta.distribute_public_list(b, rng)));
  REQUIRE(pl.size() == 1);
  CHECK(pl[0] == b);
}

TEST_CASE("tampered public list ciphertext does not decrypt") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = crypto::make_provider(name);
    Rng rng(13);
    TrustedAuthority ta(*p, rng);
    User x = make_user(*p, rng, "UI_x", {"X1", "X2"});
    ta.register_user(x.ui, registration_for(*p, rng, ta, x));
    Bytes blob = ta.distribute_public_list(binding_of(ta, x.own[0]), rng);
    for (std::size_t i = 0; i < blob.size(); i += 7) {
      Bytes t = blob;
      t[i] ^= 0x80;
      CHECK_THROWS_AS(p->asym_decrypt(x.own[0].keys.secret_key, t), Error);
    }
  }
}

TEST_CASE("property: the serialized public list never contains a registered identity") {
  auto p = crypto::make_provider("desk");
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    TrustedAuthority ta(*p, rng);
    std::vector<Bytes> uis;
    const auto users = 1 + rng.below(5);
    for (std::uint64_t u = 0; u < users; ++u) {
      std::vector<Bytes> names;
      const auto k = rng.below(4);
      for (std::uint64_t j = 0; j < k; ++j) names.push_back(to_bytes("P" + std::to_string(u) + "_" + std::to_string(j)));
      Bytes ui = to_bytes("user:" + to_hex(rng.bytes(6)));
      User usr{ui, generate_pseudonyms(*p, rng, names)};
      ta.register_user(ui, registration_for(*p, rng, ta, usr));
      uis.push_back(ui);
    }
    const Bytes plain = encode_public_list(ta.public_list());
    for (const auto& ui : uis) CHECK_FALSE(contains(plain, ui));
  }
}

TEST_CASE("property: confidential and public lists agree and every row verifies") {
  auto p = crypto::make_provider("desk");
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    CAPTURE(seed);
    Rng rng(seed * 31);
    TrustedAuthority ta(*p, rng);
    std::size_t expected = 0;
    const auto users = 1 + rng.below(4);
    for (std::uint64_t u = 0; u < users; ++u) {
      std::vector<Bytes> names;
      const auto k = rng.below(5);
      for (std::uint64_t j = 0; j < k; ++j) names.push_back(to_bytes("N" + std::to_string(u) + std::to_string(j)));
      User usr{to_bytes("UI" + std::to_string(u)), generate_pseudonyms(*p, rng, names)};
      expected += ta.register_user(usr.ui, registration_for(*p, rng, ta, usr));
    }
    const auto pl = ta.public_list();
    REQUIRE(pl.size() == expected);
    REQUIRE(ta.confidential_list().size() == expected);
    for (std::size_t i = 0; i < pl.size(); ++i) {
      CHECK(ta.confidential_list()[i].binding == pl[i]);
      CHECK(verify_binding(*p, ta.public_key(), pl[i]));
    }
  }
}

TEST_CASE("any mutation of a public list row breaks its signature") {
  for (auto name : kProviders) {
    CAPTURE(name);
    auto p = crypto::make_provider(name);
    Rng rng(21);
    TrustedAuthority ta(*p, rng);
    User x = make_user(*p, rng, "UI_x", {"X1"});
    ta.register_user(x.ui, registration_for(*p, rng, ta, x));
    const auto row = ta.public_list().at(0);
    REQUIRE(verify_binding(*p, ta.public_key(), row));
    for (int field = 0; field < 3; ++field) {
      auto m = row;
      Bytes& target = field == 0 ? m.pseudonym : field == 1 ? m.public_key : m.ta_signature;
      for (std::size_t i = 0; i < target.size(); ++i) {
        target[i] ^= 0x01;
        CHECK_FALSE(verify_binding(*p, ta.public_key(), m));
        target[i] ^= 0x01;
      }
    }
  }
}

TEST_CASE("directory lookup finds every row by pseudonym") {
  auto p = crypto::make_provider("desk");
  Rng rng(4);
  TrustedAuthority ta(*p, rng);
  User x = make_user(*p, rng, "UI_x", {"X1", "X2", "X3"});
  ta.register_user(x.ui, registration_for(*p, rng, ta, x));
  Directory dir(ta.public_list());
  CHECK(dir.size() == 3);
  for (const auto& o : x.own) {
    const auto* b = dir.find(o.pseudonym);
    REQUIRE(b != nullptr);
    CHECK(b->public_key == o.keys.public_key);
  }
  CHECK(dir.find(to_bytes("X4")) == nullptr);
}
