#include "occ/codec/codec.hpp"
#include "occ/codec/sha256.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace occ::codec {

Ipv4 Ipv4::parse(const std::string& dotted) {
  Ipv4 out;
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    if (pos >= dotted.size() || !std::isdigit(static_cast<unsigned char>(dotted[pos])))
      throw FormatError("ipv4: malformed address: " + dotted);
    long v = 0;
    std::size_t digits = 0;
    while (pos < dotted.size() && std::isdigit(static_cast<unsigned char>(dotted[pos]))) {
      v = v * 10 + (dotted[pos] - '0');
      ++pos;
      if (++digits > 3) throw FormatError("ipv4: octet too long: " + dotted);
    }
    if (v > 255) throw FormatError("ipv4: octet out of range: " + dotted);
    out.octets[i] = static_cast<std::uint8_t>(v);
    if (i < 3) {
      if (pos >= dotted.size() || dotted[pos] != '.')
        throw FormatError("ipv4: malformed address: " + dotted);
      ++pos;
    }
  }
  if (pos != dotted.size()) throw FormatError("ipv4: trailing characters: " + dotted);
  return out;
}

std::string Ipv4::to_string() const {
  std::string out;
  for (int i = 0; i < 4; ++i) {
    if (i) out += '.';
    out += std::to_string(octets[i]);
  }
  return out;
}

IpParts split_ip(const Ipv4& addr) {
  IpParts p;
  p.first = static_cast<std::uint16_t>((addr.octets[0] << 8) | addr.octets[1]);
  p.second = static_cast<std::uint16_t>((addr.octets[2] << 8) | addr.octets[3]);
  return p;
}

Ipv4 join_parts(const IpParts& parts) {
  Ipv4 a;
  a.octets[0] = static_cast<std::uint8_t>(parts.first >> 8);
  a.octets[1] = static_cast<std::uint8_t>(parts.first & 0xff);
  a.octets[2] = static_cast<std::uint8_t>(parts.second >> 8);
  a.octets[3] = static_cast<std::uint8_t>(parts.second & 0xff);
  return a;
}

std::uint16_t digest_prefix(std::string_view s) {
  const auto digest = sha256(s);
  return static_cast<std::uint16_t>((std::uint16_t(digest[0]) << 8) | digest[1]);
}

CollisionResult collide(std::span<const std::string> candidates,
                        const IpParts& parts, Rng& rng) {
  if (candidates.empty())
    throw DomainError("collide: empty candidate list");

  // Deduplicate so the distinct-draw hit model applies.
  std::unordered_set<std::string_view> seen;
  seen.reserve(candidates.size() * 2);

  CollisionResult result;
  for (const std::string& c : candidates) {
    if (!seen.insert(c).second) continue;
    ++result.attempts;
    const std::uint16_t prefix = digest_prefix(c);
    if (prefix == parts.first) result.first.matches.push_back(c);
    if (prefix == parts.second) result.second.matches.push_back(c);
  }

  // Sort buckets so the random pick is independent of scan order.
  std::sort(result.first.matches.begin(), result.first.matches.end());
  std::sort(result.second.matches.begin(), result.second.matches.end());
  if (!result.first.matches.empty())
    result.first.chosen = result.first.matches[rng.index(result.first.matches.size())];
  if (!result.second.matches.empty())
    result.second.chosen = result.second.matches[rng.index(result.second.matches.size())];
  result.success = result.first.chosen.has_value() && result.second.chosen.has_value();
  return result;
}

Ipv4 decode(const std::vector<std::string>& tweets) {
  if (tweets.size() != 2)
    throw DomainError("decode: expected exactly 2 tweets, got " +
                      std::to_string(tweets.size()));
  IpParts parts;
  parts.first = digest_prefix(tweets[0]);
  parts.second = digest_prefix(tweets[1]);
  return join_parts(parts);
}

double part_hit_probability(std::size_t n_candidates) {
  return 1.0 - std::pow(1.0 - 1.0 / 65536.0, static_cast<double>(n_candidates));
}

}  // namespace occ::codec
