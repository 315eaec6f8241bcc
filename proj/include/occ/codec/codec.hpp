#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "occ/errors.hpp"
#include "occ/rng.hpp"

namespace occ::codec {

struct Ipv4 {
  std::array<std::uint8_t, 4> octets{};

  static Ipv4 parse(const std::string& dotted);  // FormatError when malformed
  std::string to_string() const;

  friend bool operator==(const Ipv4&, const Ipv4&) = default;
};

// 16-bit halves of an address: first = (o1<<8)|o2, second = (o3<<8)|o4.
struct IpParts {
  std::uint16_t first = 0;
  std::uint16_t second = 0;

  friend bool operator==(const IpParts&, const IpParts&) = default;
};

IpParts split_ip(const Ipv4& addr);
Ipv4 join_parts(const IpParts& parts);

// First two bytes of SHA-256(s), big-endian.
std::uint16_t digest_prefix(std::string_view s);

struct CollisionResult {
  struct Bucket {
    std::vector<std::string> matches;  // sorted
    std::optional<std::string> chosen;
  };
  Bucket first;
  Bucket second;
  std::size_t attempts = 0;  // distinct candidates scanned
  bool success = false;      // both buckets non-empty
};

// Scans the candidates once (duplicates removed first), buckets the ones
// whose digest prefix equals either part, then picks one match per part
// uniformly at random. Collision failure is a result state, not an error.
CollisionResult collide(std::span<const std::string> candidates,
                        const IpParts& parts, Rng& rng);

// Recovers an address from the two command tweets in post order.
Ipv4 decode(const std::vector<std::string>& tweets);

// Analytic per-part hit model for N distinct candidates.
double part_hit_probability(std::size_t n_candidates);

}  // namespace occ::codec
