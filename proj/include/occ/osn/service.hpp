#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "occ/avatar/corpus.hpp"
#include "occ/osn/types.hpp"

namespace occ::osn {

struct TopicConfig {
  std::string name;
  double rate = 0;  // expected tweets per sim-minute
};

struct AreaConfig {
  std::string id;
  std::vector<TopicConfig> topics;
};

struct ServiceConfig {
  int port = 8471;
  std::uint64_t seed = 1;
  std::string admin_token = "admin";
  int avatar_quality = 85;
  int background_accounts = 100;
  std::uint64_t corpus_seed = 0;  // 0 = derived from seed
  double retweet_fraction = 0.12;
  std::vector<AreaConfig> areas;
  std::vector<std::string> templates;  // "{topic}" placeholder; builtin set when empty

  static ServiceConfig from_json_text(const std::string& text,
                                      const std::string& base_dir = "");
  static ServiceConfig load(const std::string& path);
};

// The simulated platform: accounts with size-variant avatars, posting and
// deletion, recency-ordered substring search with cursors, volume-gated
// trends recomputed on 5-minute boundaries, and a seeded Poisson background
// traffic generator driven by an explicit sim clock.
//
// All mutations go through a single writer lock; reads run concurrently on a
// shared lock. advance_clock is exclusive with everything else.
class Service {
 public:
  explicit Service(ServiceConfig cfg,
                   const avatar::Corpus* background_corpus = nullptr);

  std::vector<Trend> trends(const std::string& area,
                            std::optional<SimMinutes> epoch = {}) const;
  SearchPage search(const SearchQuery& q) const;
  Tweet get_tweet(TweetId id) const;
  Tweet post_tweet(const std::string& token, const std::string& text);
  void delete_tweet(const std::string& token, TweetId id);
  std::vector<std::uint8_t> avatar_bytes(const std::string& account_id,
                                         int size) const;
  // "{account}_{suffix}.jpg" as it appears in avatar links
  std::vector<std::uint8_t> avatar_by_path(const std::string& filename) const;

  AccountCredentials create_account(const std::string& handle);
  void set_avatar(const std::string& account_id, const std::string& token,
                  const avatar::Image& master);
  void set_avatar_png(const std::string& account_id, const std::string& token,
                      std::span<const std::uint8_t> png_bytes);

  SimMinutes now() const;
  SimMinutes advance_clock(int minutes);

  bool is_admin(const std::string& token) const;
  const ServiceConfig& config() const { return cfg_; }

  // Digest of the full observable state; equal seeds and advance sequences
  // give equal fingerprints.
  std::uint64_t state_fingerprint() const;

 private:
  struct TweetRec {
    Tweet tweet;
    std::string lower_text;
    bool deleted = false;
  };

  struct Account {
    std::string id;
    std::string handle;
    std::string token;
    std::map<int, std::vector<std::uint8_t>> avatar;  // size -> jpeg bytes
    int avatar_version = 0;
  };

  struct TopicState {
    TopicConfig cfg;
    std::string lower_name;
    std::map<std::int64_t, std::int64_t> buckets;  // 5-minute bucket -> count
    std::optional<TweetId> last_original;
  };

  struct AreaState {
    std::string id;
    std::vector<TopicState> topics;
    std::map<SimMinutes, std::vector<Trend>> snapshots;
  };

  const Account& require_token(const std::string& token) const;
  Tweet& append_tweet(const Account& author, std::string text, SimMinutes at,
                      bool is_retweet, std::optional<TweetId> retweet_of);
  void bump_topic_counters(const std::string& lower_text, SimMinutes at,
                           bool is_retweet, TweetId id);
  void inject_minute(SimMinutes minute);
  void recompute_trends(SimMinutes boundary);
  AccountCredentials create_account_locked(const std::string& handle);
  void install_variants(Account& acc, const avatar::Image& master);

  ServiceConfig cfg_;
  mutable std::shared_mutex mu_;
  SimMinutes now_ = 0;
  std::uint64_t next_account_ = 0;
  std::vector<TweetRec> tweets_;  // index = id - 1
  std::unordered_map<std::string, Account> accounts_;
  std::unordered_map<std::string, std::string> token_to_account_;
  std::vector<std::string> background_ids_;
  std::vector<AreaState> areas_;
};

}  // namespace occ::osn
