#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace occ::osn {

using TweetId = std::uint64_t;
using SimMinutes = std::int64_t;

struct Tweet {
  TweetId id = 0;
  std::string author_id;
  std::string author_handle;
  std::string text;
  SimMinutes created_at = 0;
  bool is_retweet = false;
  std::optional<TweetId> retweet_of;
  std::string lang = "en";
  std::string avatar_url;  // normal-size link; suffix substitution gives 400x400
};

struct Trend {
  std::string topic;
  std::string area;
  std::int64_t volume = 0;  // trailing 24 sim-hours
  std::optional<std::int64_t> reported_volume;  // present iff volume > 10,000
};

struct SearchQuery {
  std::string query;
  std::string lang = "en";
  int count = 100;      // clamped to [1, 100]
  std::string cursor;   // empty for the first page
};

struct SearchPage {
  std::vector<Tweet> tweets;
  std::optional<std::string> next_cursor;
};

struct AccountCredentials {
  std::string account_id;
  std::string token;
};

// Table-IV style avatar link suffixes.
std::string size_suffix(int side);       // 48 -> "normal", ..., 400 -> "400x400"
int suffix_size(const std::string& s);   // inverse; DomainError when unknown

inline constexpr std::int64_t kVolumeGate = 10000;
inline constexpr int kTrendRefreshMinutes = 5;
inline constexpr int kMaxTrends = 50;
inline constexpr int kMaxSearchCount = 100;

}  // namespace occ::osn
