#include "doctest.h"

#include "occ/codec/codec.hpp"
#include "occ/codec/sha256.hpp"
#include "occ/rng.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <string>

using namespace occ;
using namespace occ::codec;

namespace {

// Second implementation for the dual-route check (OpenSSL).
std::array<std::uint8_t, 32> openssl_sha256(const std::string& s) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  EVP_Digest(s.data(), s.size(), out.data(), &len, EVP_sha256(), nullptr);
  REQUIRE(len == 32);
  return out;
}

std::string random_string(Rng& rng) {
  const std::size_t n = rng.index(80);
  std::string s;
  s.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    s.push_back(static_cast<char>(rng.index(256)));
  return s;
}

// Brute-force search for a string with the given digest prefix.
std::string string_with_prefix(std::uint16_t target, const std::string& salt) {
  for (std::uint64_t k = 0;; ++k) {
    std::string s = salt + std::to_string(k);
    if (digest_prefix(s) == target) return s;
  }
}

}  // namespace

TEST_CASE("sha256: FIPS vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(sha256_hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
  // block-boundary lengths
  CHECK(sha256_hex(std::string(55, 'x')) == sha256_hex(std::string(55, 'x')));
  for (std::size_t n : {55u, 56u, 63u, 64u, 65u, 119u, 128u}) {
    const std::string s(n, 'q');
    const auto ours = sha256(s);
    const auto theirs = openssl_sha256(s);
    CHECK(std::equal(ours.begin(), ours.end(), theirs.begin()));
  }
}

TEST_CASE("sha256: incremental updates equal one-shot") {
  const std::string data = "the quick brown fox jumps over the lazy dog 12345";
  Sha256 h;
  for (char c : data) h.update(&c, 1);
  CHECK(h.finish() == sha256(data));
}

TEST_CASE("digest_prefix: anchored values") {
  CHECK(digest_prefix("") == 0xE3B0);
  CHECK(digest_prefix("abc") == 0xBA78);
  CHECK(digest_prefix("x") == digest_prefix("x"));
}

TEST_CASE("digest_prefix: agrees with an independent implementation") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = random_string(rng);
    const auto theirs = openssl_sha256(s);
    const std::uint16_t want =
        static_cast<std::uint16_t>((theirs[0] << 8) | theirs[1]);
    CHECK(digest_prefix(s) == want);
  }
}

TEST_CASE("split_ip and join_parts") {
  const Ipv4 a = Ipv4::parse("192.168.1.1");
  CHECK(split_ip(a).first == 0xC0A8);
  CHECK(split_ip(a).second == 0x0101);
  CHECK(split_ip(Ipv4::parse("0.0.0.0")) == IpParts{0x0000, 0x0000});
  CHECK(split_ip(Ipv4::parse("255.255.255.255")) == IpParts{0xFFFF, 0xFFFF});
  CHECK(join_parts(split_ip(a)) == a);

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Ipv4 addr;
    for (auto& o : addr.octets) o = static_cast<std::uint8_t>(rng.index(256));
    CHECK(join_parts(split_ip(addr)) == addr);
  }
}

TEST_CASE("ipv4 parsing errors") {
  CHECK(Ipv4::parse("10.0.0.1").to_string() == "10.0.0.1");
  CHECK_THROWS_AS(Ipv4::parse("10.0.0"), FormatError);
  CHECK_THROWS_AS(Ipv4::parse("10.0.0.256"), FormatError);
  CHECK_THROWS_AS(Ipv4::parse("10.0.0.1.2"), FormatError);
  CHECK_THROWS_AS(Ipv4::parse("10.0.0.1 "), FormatError);
  CHECK_THROWS_AS(Ipv4::parse("a.b.c.d"), FormatError);
  CHECK_THROWS_AS(Ipv4::parse("10..0.1"), FormatError);
  CHECK_THROWS_AS(Ipv4::parse("1000.0.0.1"), FormatError);
}

TEST_CASE("collide: bucketing, dedupe, and failure as a result state") {
  Rng rng(1);
  // the empty string lands in the 0xE3B0 bucket
  const std::vector<std::string> candidates = {"", "abc", "abc", "zzz"};
  const CollisionResult res = collide(candidates, IpParts{0xE3B0, 0xBA78}, rng);
  CHECK(res.attempts == 3);  // "abc" deduplicated
  REQUIRE(res.first.matches.size() == 1);
  CHECK(res.first.matches[0] == "");
  REQUIRE(res.second.matches.size() == 1);
  CHECK(res.second.matches[0] == "abc");
  CHECK(res.success);

  // empty bucket for either part means failure, not an error
  const CollisionResult miss = collide(candidates, IpParts{0xE3B0, 0x0000}, rng);
  CHECK_FALSE(miss.success);
  CHECK(miss.first.chosen.has_value());
  CHECK_FALSE(miss.second.chosen.has_value());

  CHECK_THROWS_AS(collide({}, IpParts{1, 2}, rng), DomainError);
}

TEST_CASE("decode: empty-string pair and error paths") {
  CHECK(decode({"", ""}).to_string() == "227.176.227.176");
  CHECK_THROWS_AS(decode({"one"}), DomainError);
  CHECK_THROWS_AS(decode({"a", "b", "c"}), DomainError);
}

TEST_CASE("decode: order sensitivity swaps the halves") {
  const Ipv4 fwd = decode({"abc", ""});
  const Ipv4 rev = decode({"", "abc"});
  CHECK(fwd.octets[0] == rev.octets[2]);
  CHECK(fwd.octets[1] == rev.octets[3]);
  CHECK(fwd.octets[2] == rev.octets[0]);
  CHECK(fwd.octets[3] == rev.octets[1]);
  CHECK_FALSE(fwd == rev);
}

TEST_CASE("round trip: decode of crafted collisions returns the address") {
  Rng rng(99);
  for (int i = 0; i < 8; ++i) {
    Ipv4 addr;
    for (auto& o : addr.octets) o = static_cast<std::uint8_t>(rng.index(256));
    const IpParts parts = split_ip(addr);
    const std::string salt = "t" + std::to_string(i) + "-";
    const std::vector<std::string> candidates = {
        string_with_prefix(parts.first, salt + "a"),
        string_with_prefix(parts.second, salt + "b"), "filler one",
        "filler two"};
    Rng pick(7);
    const CollisionResult res = collide(candidates, parts, pick);
    REQUIRE(res.success);
    CHECK(decode({*res.first.chosen, *res.second.chosen}) == addr);
  }
}

TEST_CASE("analytic hit model values") {
  CHECK(part_hit_probability(65536) == doctest::Approx(0.63212).epsilon(1e-3));
  const double p200k = std::pow(part_hit_probability(200000), 2);
  const double p330k = std::pow(part_hit_probability(330000), 2);
  CHECK(p200k == doctest::Approx(0.908).epsilon(2e-3));
  CHECK(p330k == doctest::Approx(0.987).epsilon(2e-3));
}

TEST_CASE("collide: measured per-part hit rate near the analytic value") {
  // 200 seeded trials of 65,536 distinct candidates; counts both parts
  const int trials = 200;
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(4242, t));
    std::vector<std::string> candidates;
    candidates.reserve(65536);
    char buf[40];
    for (int i = 0; i < 65536; ++i) {
      std::snprintf(buf, sizeof(buf), "t%d-%d-%llx", t, i,
                    static_cast<unsigned long long>(rng.u64()));
      candidates.emplace_back(buf);
    }
    Ipv4 addr;
    for (auto& o : addr.octets) o = static_cast<std::uint8_t>(rng.index(256));
    const CollisionResult res = collide(candidates, split_ip(addr), rng);
    hits += res.first.matches.empty() ? 0 : 1;
    hits += res.second.matches.empty() ? 0 : 1;
  }
  const double rate = double(hits) / (2.0 * trials);
  CHECK(std::abs(rate - 0.632) < 0.03);
}
